use std::path::Path;

use serde::{Deserialize, Serialize};

use madiff_core::denoiser::{Architecture, ModelSpec, TrainConfig, Vocabulary};
use madiff_core::evaluation::ProtocolConfig;
use madiff_core::schedule::ScheduleParams;

/// Network shape; the image shape and vocabulary come from the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub arch: Architecture,
    pub time_dim: usize,
    pub cond_dim: usize,
    pub cond_hidden: usize,
    pub sigma_data: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let spec = ModelSpec::new([1, 1, 1], Architecture::Mlp { hidden: 512, blocks: 2 }, Vocabulary::default());
        Self {
            arch: spec.arch,
            time_dim: spec.time_dim,
            cond_dim: spec.cond_dim,
            cond_hidden: spec.cond_hidden,
            sigma_data: spec.sigma_data,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Number of (non-makeup, makeup) pairs scored.
    pub pairs: usize,
    pub k_list: Vec<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            pairs: 10,
            k_list: vec![40, 80, 120, 160, 200, 240],
        }
    }
}

/// Every tunable of a run. Precedence: command-line flag, then this file,
/// then the built-in defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub schedule: ScheduleParams,
    pub model: ModelConfig,
    pub training: TrainConfig,
    pub protocol: ProtocolConfig,
    pub eval: EvalConfig,
}

/// Offset separating removal passes from transfers under one seed.
const REMOVAL_SEED_OFFSET: u64 = 0x5eed_0000;

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
    }

    /// Spreads the run seed into every seeded subsystem.
    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
            self.training.seed = s;
            self.protocol.transfer.translate.seed = s;
            self.protocol.removal.seed = s.wrapping_add(REMOVAL_SEED_OFFSET);
        }
        self
    }

    pub fn model_spec(&self, image_shape: [usize; 3], vocabulary: Vocabulary) -> ModelSpec {
        let mut spec = ModelSpec::new(image_shape, self.model.arch.clone(), vocabulary);
        spec.time_dim = self.model.time_dim;
        spec.cond_dim = self.model.cond_dim;
        spec.cond_hidden = self.model.cond_hidden;
        spec.sigma_data = self.model.sigma_data;
        spec.schedule = self.schedule;
        spec
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"seed": 1, "sed": 2}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"training": {"iters": 2}}"#).is_err());
    }

    #[test]
    fn partial_files_keep_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"training": {"optimizer": {"lr": 0.001}}}"#).unwrap();
        assert_eq!(c.training.optimizer.lr, 0.001);
        assert_eq!(c.training.optimizer.weight_decay, 1e-2);
        assert_eq!(c.protocol.transfer.translate.k, 180);
        assert_eq!(c.protocol.release.eyes, 100);
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = RunConfig::default().with_seed(Some(9));
        assert_eq!(c.training.seed, 9);
        let back: RunConfig = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }
}
