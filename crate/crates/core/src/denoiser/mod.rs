//! Conditional ε-predictor, its training objective and optimizer.

mod arch;
mod condition;
mod file;
pub mod layers;
mod model;
mod objective;
mod optim;
mod oracle;
mod params;
mod train;

pub use arch::Architecture;
pub use condition::{ConditionId, Vocabulary};
pub use file::{load_model, model_from_bytes, model_to_bytes, quantize_params, save_model, MAGIC};
pub use model::{DenoiserModel, ModelSpec};
pub use objective::{eps_loss, loss, loss_and_grad, loss_with, noised_batch, Draws};
pub use optim::{AdamW, AdamWConfig};
pub use oracle::analytic_gaussian_denoiser;
pub use params::{Grads, Init, ParamId, ParamSet};
pub use train::{train, train_with, LossLog, LossRecord, TrainConfig, TrainExample};
