use serde::{Deserialize, Serialize};

use super::arch::{Architecture, Net, NetCache};
use super::condition::{ConditionId, Vocabulary};
use super::layers::{dense_backward, dense_forward, silu_backward, silu_vec, timestep_embedding};
use super::params::{Grads, Init, ParamId, ParamSet};
use crate::error::{Error, Result};
use crate::numerics::{seeded_rng, Tensor};
use crate::schedule::{Schedule, ScheduleParams};

/// Everything needed to rebuild a model's graph; parameters live elsewhere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    /// `[height, width, channels]`.
    pub image_shape: [usize; 3],
    pub arch: Architecture,
    #[serde(default = "default_embed")]
    pub time_dim: usize,
    #[serde(default = "default_embed")]
    pub cond_dim: usize,
    #[serde(default = "default_cond_hidden")]
    pub cond_hidden: usize,
    #[serde(default = "default_sigma_data")]
    pub sigma_data: f64,
    #[serde(default)]
    pub vocabulary: Vocabulary,
    #[serde(default)]
    pub schedule: ScheduleParams,
}

fn default_embed() -> usize {
    64
}

fn default_cond_hidden() -> usize {
    128
}

fn default_sigma_data() -> f64 {
    0.5
}

impl ModelSpec {
    pub fn new(image_shape: [usize; 3], arch: Architecture, vocabulary: Vocabulary) -> Self {
        Self {
            image_shape,
            arch,
            time_dim: default_embed(),
            cond_dim: default_embed(),
            cond_hidden: default_cond_hidden(),
            sigma_data: default_sigma_data(),
            vocabulary,
            schedule: ScheduleParams::default(),
        }
    }

    pub fn image_len(&self) -> usize {
        self.image_shape.iter().product()
    }

    fn validate(&self) -> Result<()> {
        if self.image_shape.contains(&0) {
            return Err(Error::InvalidShape(self.image_shape.to_vec()));
        }
        if self.time_dim == 0 || self.time_dim % 2 != 0 {
            return Err(Error::invalid("time embedding dimension must be even and positive"));
        }
        if self.cond_dim == 0 || self.cond_hidden == 0 {
            return Err(Error::invalid("conditioning widths must be positive"));
        }
        if !(self.sigma_data > 0.0) {
            return Err(Error::invalid("sigma_data must be positive"));
        }
        Ok(())
    }
}

/// Conditional ε-predictor `f(x_t, t, l)`.
///
/// The raw network `F` sees a variance-normalized input and the prediction
/// is assembled as `ε̂ = a_t·x_t − b_t·F(c_t·x_t)` with
/// `σ² = (1 − ᾱ)/ᾱ`, `a_t = σ/(√ᾱ(σ² + σ_d²))`, `b_t = σ_d/√(σ² + σ_d²)` and
/// `c_t = 1/(√ᾱ·√(σ² + σ_d²))`, which keeps every timestep's regression
/// target at unit scale.
pub struct DenoiserModel {
    spec: ModelSpec,
    schedule: Schedule,
    params: ParamSet,
    cond_table: ParamId,
    cond_w: ParamId,
    cond_b: ParamId,
    net: Net,
}

pub(crate) struct ForwardCache {
    ts: Vec<usize>,
    rows: Vec<usize>,
    cin: Vec<f64>,
    pre: Vec<f64>,
    cvec: Vec<f64>,
    net: NetCache,
    b_t: Vec<f64>,
}

impl std::fmt::Debug for DenoiserModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DenoiserModel")
            .field("arch", &self.spec.arch)
            .field("image_shape", &self.spec.image_shape)
            .field("parameters", &self.params.scalar_count())
            .finish()
    }
}

impl DenoiserModel {
    /// Builds a freshly initialized model; `seed` fixes the initialization.
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let schedule = Schedule::from_params(&spec.schedule)?;
        let mut rng = seeded_rng(seed, 0x1417);
        let mut params = ParamSet::new();
        let rows = 2 + spec.vocabulary.len();
        let cond_table = params.register("cond.table", &[rows, spec.cond_dim], Init::Normal(0.02), &mut rng);
        let inp = spec.time_dim + spec.cond_dim;
        let cond_w = params.register(
            "cond.mix.weight",
            &[inp, spec.cond_hidden],
            Init::Normal(1.0 / (inp as f64).sqrt()),
            &mut rng,
        );
        let cond_b = params.register("cond.mix.bias", &[spec.cond_hidden], Init::Zeros, &mut rng);
        let net = Net::build(&spec.arch, spec.image_shape, spec.cond_hidden, &mut params, &mut rng)?;
        Ok(Self {
            spec,
            schedule,
            params,
            cond_table,
            cond_w,
            cond_b,
            net,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.spec.vocabulary
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.scalar_count()
    }

    /// Embedding row for `cond`.
    pub fn embedding(&self, cond: ConditionId) -> Result<&[f64]> {
        self.spec.vocabulary.validate(cond)?;
        let d = self.spec.cond_dim;
        let r = cond.row();
        Ok(&self.params.get(self.cond_table)[r * d..(r + 1) * d])
    }

    fn preconditioning(&self, t: usize) -> (f64, f64, f64) {
        let ab = self.schedule.alpha_bar(t);
        let sd2 = self.spec.sigma_data * self.spec.sigma_data;
        let s2 = (1.0 - ab) / ab;
        let norm = (s2 + sd2).sqrt();
        let a = s2.sqrt() / (ab.sqrt() * (s2 + sd2));
        let b = self.spec.sigma_data / norm;
        let c = 1.0 / (ab.sqrt() * norm);
        (a, b, c)
    }

    fn check_inputs(&self, xs: &[f64], ts: &[usize], conds: &[ConditionId]) -> Result<()> {
        let d = self.spec.image_len();
        if ts.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        if ts.len() != conds.len() || xs.len() != ts.len() * d {
            return Err(Error::ShapeMismatch {
                left: vec![xs.len()],
                right: vec![ts.len(), d],
            });
        }
        for &t in ts {
            if t < 1 || t > self.schedule.steps() {
                return Err(Error::TimestepOutOfRange {
                    t,
                    min: 1,
                    max: self.schedule.steps(),
                });
            }
        }
        for &c in conds {
            self.spec.vocabulary.validate(c)?;
        }
        Ok(())
    }

    pub(crate) fn forward(&self, xs: &[f64], ts: &[usize], conds: &[ConditionId]) -> Result<(Vec<f64>, ForwardCache)> {
        self.check_inputs(xs, ts, conds)?;
        let batch = ts.len();
        let d = self.spec.image_len();
        let (td, cd, ch) = (self.spec.time_dim, self.spec.cond_dim, self.spec.cond_hidden);
        let table = self.params.get(self.cond_table);
        let mut cin = Vec::with_capacity(batch * (td + cd));
        let mut u = Vec::with_capacity(xs.len());
        let mut coef = Vec::with_capacity(batch);
        for (s, (&t, &c)) in ts.iter().zip(conds).enumerate() {
            cin.extend(timestep_embedding(t, td));
            let r = c.row();
            cin.extend_from_slice(&table[r * cd..(r + 1) * cd]);
            let (a, b, ci) = self.preconditioning(t);
            u.extend(xs[s * d..(s + 1) * d].iter().map(|v| v * ci));
            coef.push((a, b));
        }
        let pre = dense_forward(&cin, batch, td + cd, ch, self.params.get(self.cond_w), self.params.get(self.cond_b));
        let cvec = silu_vec(&pre);
        let (f, net) = self.net.forward(&self.params, &u, batch, &cvec);
        let mut eps = Vec::with_capacity(xs.len());
        for s in 0..batch {
            let (a, b) = coef[s];
            for i in s * d..(s + 1) * d {
                eps.push(a * xs[i] - b * f[i]);
            }
        }
        Ok((
            eps,
            ForwardCache {
                ts: ts.to_vec(),
                rows: conds.iter().map(|c| c.row()).collect(),
                cin,
                pre,
                cvec,
                net,
                b_t: coef.iter().map(|c| c.1).collect(),
            },
        ))
    }

    /// Parameter gradients given `∂L/∂ε̂` for the cached batch.
    pub(crate) fn backward(&self, cache: &ForwardCache, deps: &[f64]) -> Grads {
        let batch = cache.ts.len();
        let d = self.spec.image_len();
        let (td, cd, ch) = (self.spec.time_dim, self.spec.cond_dim, self.spec.cond_hidden);
        let mut grads = self.params.zeros_like();
        let mut df = vec![0.0; deps.len()];
        for s in 0..batch {
            let b = cache.b_t[s];
            for i in s * d..(s + 1) * d {
                df[i] = -b * deps[i];
            }
        }
        let dcvec = self.net.backward(&self.params, &cache.net, &df, batch, &cache.cvec, &mut grads);
        let dpre = silu_backward(&cache.pre, &dcvec);
        let (dw, db) = grads.pair_mut(self.cond_w, self.cond_b);
        let dcin = dense_backward(&cache.cin, &dpre, batch, td + cd, ch, self.params.get(self.cond_w), dw, db, true)
            .expect("input gradient requested");
        let dtable = grads.get_mut(self.cond_table);
        for (s, &r) in cache.rows.iter().enumerate() {
            let src = &dcin[s * (td + cd) + td..(s + 1) * (td + cd)];
            for (g, v) in dtable[r * cd..(r + 1) * cd].iter_mut().zip(src) {
                *g += v;
            }
        }
        grads
    }

    /// Batched prediction over flattened images `xs: [batch, d]`.
    pub fn predict_eps_batch(&self, xs: &[f64], ts: &[usize], conds: &[ConditionId]) -> Result<Vec<f64>> {
        Ok(self.forward(xs, ts, conds)?.0)
    }

    pub fn predict_eps(&self, x_t: &Tensor, t: usize, cond: ConditionId) -> Result<Tensor> {
        if x_t.shape() != self.spec.image_shape {
            return Err(Error::ShapeMismatch {
                left: x_t.shape().to_vec(),
                right: self.spec.image_shape.to_vec(),
            });
        }
        let eps = self.predict_eps_batch(x_t.data(), &[t], &[cond])?;
        Tensor::new(x_t.shape(), eps)
    }
}
