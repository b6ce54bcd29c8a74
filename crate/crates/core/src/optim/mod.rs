//! Loss, optimizers and the training loops built on them.

mod adam;
mod cmaes;
mod loss;
mod train;

pub use adam::{adam_step, AdamState};
pub use cmaes::{minimize, CmaEs, CmaOutcome, CmaState};
pub use loss::{loss, loss_gradient, mse_gradient, mse_loss, Dataset, Reduction};
pub use train::{train_adam, train_cmaes, CmaConfig, StopReason, TrainConfig, TrainReport};
