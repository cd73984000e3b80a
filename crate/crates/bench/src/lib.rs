//! Fixtures shared by the benchmarks.

use posegail::data::{gen_synthetic, MotionDataset};
use posegail::nn::{CriticConfig, LstmCritic, PolicyConfig, Seq2SeqPolicy};
use posegail::rng::{stream, Stream};
use posegail::{EpisodeConfig, Result};

/// Desk-scale sizes: 6-dimensional poses, 32 hidden units, 16 trajectories.
pub const POSE_DIM: usize = 6;
pub const HIDDEN: usize = 32;
pub const BATCH: usize = 16;

/// 50 observed frames, 25 predicted in windows of 5.
pub fn episode() -> EpisodeConfig {
    EpisodeConfig::new(50, 25, 5).expect("valid episode")
}

pub fn policy() -> Result<Seq2SeqPolicy> {
    Seq2SeqPolicy::new(
        PolicyConfig::new(POSE_DIM, HIDDEN),
        &mut stream(0, Stream::PolicyInit),
    )
}

pub fn critic() -> Result<LstmCritic> {
    LstmCritic::new(
        CriticConfig::new(POSE_DIM, HIDDEN),
        &mut stream(0, Stream::CriticInit),
    )
}

/// Eight synthetic sequences of 300 frames.
pub fn dataset() -> Result<MotionDataset> {
    gen_synthetic(8, 300, POSE_DIM, 1)
}
