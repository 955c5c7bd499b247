use serde::{Deserialize, Serialize};

use super::condition::ConditionId;
use super::model::DenoiserModel;
use super::objective::{loss_and_grad, Draws};
use super::optim::{AdamW, AdamWConfig};
use crate::error::{Error, Result};
use crate::numerics::{seeded_rng, RngState, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub optimizer: AdamWConfig,
    /// Probability of a horizontal flip per drawn image.
    pub flip_prob: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 6000,
            batch_size: 32,
            optimizer: AdamWConfig::default(),
            flip_prob: 0.5,
            seed: 0,
        }
    }
}

/// One training image and every condition it may be trained under
/// (its domain plus its tags).
#[derive(Clone, Debug)]
pub struct TrainExample {
    pub image: Tensor,
    pub conditions: Vec<ConditionId>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossRecord {
    pub iter: usize,
    pub loss: f64,
    pub lr: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossLog(pub Vec<LossRecord>);

impl LossLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iter,loss,lr\n");
        for r in &self.0 {
            s.push_str(&format!("{},{:.9e},{:.9e}\n", r.iter, r.loss, r.lr));
        }
        s
    }

    /// Trailing mean of the loss over `window` records ending at `iter`.
    pub fn smoothed_at(&self, iter: usize, window: usize) -> Option<f64> {
        let end = self.0.iter().position(|r| r.iter == iter)?;
        let start = (end + 1).saturating_sub(window);
        let span = &self.0[start..=end];
        Some(span.iter().map(|r| r.loss).sum::<f64>() / span.len() as f64)
    }
}

/// Runs the optimizer with batches supplied by `sample`.
///
/// Iteration `i` draws everything from substream `i` of the seed, so a run
/// is reproducible and does not depend on how batches were produced before.
pub fn train_with<S>(
    model: &mut DenoiserModel,
    config: &TrainConfig,
    mut sample: S,
    mut progress: impl FnMut(&LossRecord),
) -> Result<LossLog>
where
    S: FnMut(&mut RngState, usize) -> Result<(Vec<f64>, Vec<ConditionId>)>,
{
    if config.batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    let root = seeded_rng(config.seed, 0x7261_696e);
    let mut opt = AdamW::new(config.optimizer, model.params());
    let d = model.spec().image_len();
    let steps = model.schedule().steps();
    let mut log = LossLog::default();
    for iter in 1..=config.iterations {
        let mut rng = root.substream(iter as u64);
        let (x0, conds) = sample(&mut rng, config.batch_size)?;
        let draws = Draws::sample(&mut rng, conds.len(), d, steps);
        let (loss, grads) = loss_and_grad(model, &x0, &conds, &draws)?;
        let lr = opt.step(model.params_mut(), &grads)?;
        if !loss.is_finite() {
            return Err(Error::Degenerate(format!("non-finite loss at iteration {iter}")));
        }
        let rec = LossRecord { iter, loss, lr };
        progress(&rec);
        log.0.push(rec);
    }
    Ok(log)
}

fn check_dataset(data: &[TrainExample], model: &DenoiserModel) -> Result<()> {
    if data.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    for domain in [ConditionId::NonMakeup, ConditionId::Makeup] {
        if !data.iter().any(|e| e.conditions.contains(&domain)) {
            return Err(Error::invalid(format!("training set has no {domain:?} images")));
        }
    }
    let shape = model.spec().image_shape;
    for (i, e) in data.iter().enumerate() {
        if e.image.shape() != shape {
            return Err(Error::ShapeMismatch {
                left: e.image.shape().to_vec(),
                right: shape.to_vec(),
            });
        }
        if e.conditions.is_empty() {
            return Err(Error::invalid(format!("training image {i} has no conditions")));
        }
        for &c in &e.conditions {
            model.vocabulary().validate(c)?;
        }
    }
    Ok(())
}

/// Trains on labelled images with uniform condition choice per draw and
/// random horizontal flips.
pub fn train(
    model: &mut DenoiserModel,
    data: &[TrainExample],
    config: &TrainConfig,
    progress: impl FnMut(&LossRecord),
) -> Result<LossLog> {
    check_dataset(data, model)?;
    let flip = config.flip_prob;
    train_with(
        model,
        config,
        |rng, batch| {
            let mut x0 = Vec::new();
            let mut conds = Vec::with_capacity(batch);
            for _ in 0..batch {
                let e = &data[rng.range_inclusive(0, data.len() - 1)];
                conds.push(e.conditions[rng.range_inclusive(0, e.conditions.len() - 1)]);
                if rng.bernoulli(flip) {
                    x0.extend_from_slice(e.image.flip_horizontal().data());
                } else {
                    x0.extend_from_slice(e.image.data());
                }
            }
            Ok((x0, conds))
        },
        progress,
    )
}
