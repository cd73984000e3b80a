//! Two-stage learning: behavioral cloning on expert states, then adversarial
//! imitation against a Wasserstein-divergence critic.

mod adversarial;
mod bc;
mod log;
mod rollout;

pub use adversarial::{
    critic_objective, generator_gradient, generator_objective, grad_penalty, grad_penalty_many,
    interpolate_pairs, wgail_train, CriticBatch, CriticStats, CriticTerms, GailConfig,
    GeneratorStats, WgailTrainer, WindowBatch,
};
pub use bc::{bc_loss, bc_train, teacher_forced_loss, BcConfig, BcTrainer};
pub use log::{LogRecord, TrainLog, LOG_HEADER};
pub use rollout::{
    agent_trajectories, compounding_rollout, forecast_batch, frames_to_batch, PolicyForecaster,
};

use crate::data::MotionDataset;
use crate::error::{Error, Result};
use crate::mdp::EpisodeConfig;

fn check_dataset(data: &MotionDataset, pose_dim: usize, episode: &EpisodeConfig) -> Result<()> {
    if data.pose_dim() != pose_dim {
        return Err(Error::invalid(format!(
            "dataset pose_dim {} does not match policy pose_dim {pose_dim}",
            data.pose_dim()
        )));
    }
    if data.valid_positions(episode.span()).is_empty() {
        return Err(Error::invalid(format!(
            "no training sequence has the {} frames one trajectory needs",
            episode.span()
        )));
    }
    Ok(())
}

/// Non-finite values inside a step become a divergence report.
fn diverged(e: Error, iteration: usize, phase: &'static str, windows: &[(usize, usize)]) -> Error {
    match e {
        Error::NonFinite(_) => Error::Diverged {
            iteration,
            phase,
            batch: windows.to_vec(),
        },
        other => other,
    }
}
