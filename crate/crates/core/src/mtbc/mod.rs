//! Multitask behavioral cloning: joint pretraining of a shared
//! representation with per-task heads, head-only transfer to a target task,
//! the single-task BC baseline, and exact evaluation of learned policies.

mod config;
mod eval;
pub(crate) mod optim;
mod train;

pub use config::{ModelConfig, Optimizer, TrainConfig};
pub use eval::{evaluate_policy, tabularize, PolicyEvaluation, ReturnAnchors};
pub use train::{
    final_losses, train_bc, train_multitask, transfer, write_loss_trace, EpochLoss, MultitaskModel,
};
