//! Human pose forecasting as a deterministic MDP, learned by behavioral
//! cloning followed by Wasserstein-divergence adversarial imitation.
//!
//! Module map:
//! - [`autodiff`]: tape-based reverse mode with differentiable backward rules, Adam.
//! - [`nn`]: GRU/LSTM cells, the seq2seq policy generator and the critic, checkpoints.
//! - [`mdp`]: progressive-prediction decomposition, transition and rollout.
//! - [`imitation`]: behavioral cloning and the adversarial D/G steps.
//! - [`data`]: datasets, synthetic motion, mean angle error and evaluation.
//! - [`config`]: the flat `key = value` run configuration.

pub mod autodiff;
pub mod config;
pub mod data;
pub mod error;
pub mod imitation;
pub mod mdp;
pub mod nn;
pub mod rng;

pub use autodiff::{gradient, Precision, Tape, Tensor, Var};
pub use error::{Error, Result};
pub use mdp::{EpisodeConfig, Frames};
