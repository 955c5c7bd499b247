use crate::denoiser::{analytic_gaussian_denoiser, ConditionId, DenoiserModel, Vocabulary};
use crate::error::Result;
use crate::numerics::Tensor;
use crate::schedule::Schedule;

/// Anything that predicts ε from a noisy state under a condition.
pub trait EpsModel {
    fn schedule(&self) -> &Schedule;
    fn vocabulary(&self) -> &Vocabulary;
    fn predict_eps(&self, x_t: &Tensor, t: usize, cond: ConditionId) -> Result<Tensor>;
}

impl EpsModel for DenoiserModel {
    fn schedule(&self) -> &Schedule {
        DenoiserModel::schedule(self)
    }

    fn vocabulary(&self) -> &Vocabulary {
        DenoiserModel::vocabulary(self)
    }

    fn predict_eps(&self, x_t: &Tensor, t: usize, cond: ConditionId) -> Result<Tensor> {
        DenoiserModel::predict_eps(self, x_t, t, cond)
    }
}

/// The exact ε-predictor for `x0 ~ N(mean, s²I)`; ignores the condition.
#[derive(Clone, Debug)]
pub struct GaussianOracle {
    pub mean: Tensor,
    pub s: f64,
    pub schedule: Schedule,
    pub vocabulary: Vocabulary,
}

impl GaussianOracle {
    pub fn new(mean: Tensor, s: f64, schedule: Schedule) -> Self {
        Self {
            mean,
            s,
            schedule,
            vocabulary: Vocabulary::default(),
        }
    }
}

impl EpsModel for GaussianOracle {
    fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    fn predict_eps(&self, x_t: &Tensor, t: usize, _: ConditionId) -> Result<Tensor> {
        analytic_gaussian_denoiser(&self.mean, self.s, t, x_t, &self.schedule)
    }
}
