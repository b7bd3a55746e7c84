//! Trainer-side digital twin of the device policy and the SAC learner.

mod adam;
mod buffer;
mod gradcheck;
mod mlp;
mod policy;
mod sac;

pub use adam::Adam;
pub use buffer::{ReplayBuffer, Transition};
pub use gradcheck::{grad_check, numeric_gradient, relative_error, FD_STEP};
pub use mlp::{param_count, Mlp, Tape};
pub use policy::{normalize_obs, IntPlan, TrainingView, TwinPolicy, INPUT_STEP};
pub use sac::{
    actor_loss_and_grad, critic_input, critic_loss_and_grad, critic_targets, squashed_log_density,
    tanh_gaussian_sample, temperature_loss_and_grad, ActorBatch, ActorStats, EntropyTemp,
    LossRecord, SacAgent, SacConfig,
};

use thiserror::Error;

use crate::qnet::QnetError;

#[derive(Debug, Error)]
pub enum TwinError {
    #[error(transparent)]
    Quant(#[from] QnetError),
    #[error("empty batch")]
    EmptyBatch,
    #[error("replay buffer holds {have} transitions, batch needs {need}")]
    BufferTooSmall { have: usize, need: usize },
    #[error("non-finite {stage} loss at update {step}: {detail}")]
    NonFinite {
        stage: &'static str,
        step: u64,
        detail: String,
    },
}
