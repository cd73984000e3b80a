//! Datasets, synthetic motion, the mean angle error metric and evaluation.

mod dataset;
mod eval;
mod metrics;
mod synthetic;

pub use dataset::{
    load_dataset, read_frames_csv, sample_trajectories, save_dataset, write_frames_csv,
    MotionDataset, SequenceMeta, MANIFEST,
};
pub use eval::{evaluate, ErrorRow, ErrorTable, EvalOptions, Forecaster, ZeroVelocity};
pub use metrics::{
    batch_mean_angle_error, mean_angle_error, zero_velocity, HorizonSet, STANDARD_HORIZONS_MS,
};
pub use synthetic::{gen_synthetic, SYNTHETIC_PERIOD_MS};
