//! Adversarial training: Adam, losses and the alternating update loop.

mod adam;
mod config;
mod loss;
mod trainer;

pub use adam::{Adam, ADAM_EPS};
pub use config::TrainConfig;
pub use loss::{gan_losses, l1, AdvLoss};
pub use trainer::{load_pairs, train, Pair, Phase, StepRecord, TrainSummary, Trainer, LOG_HEADER};
