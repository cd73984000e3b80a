use std::f64::consts::TAU;

use rand::Rng;

use super::dataset::{MotionDataset, SequenceMeta};
use crate::error::{Error, Result};
use crate::mdp::Frames;
use crate::rng::{stream, Stream};

/// Frame period of generated data, in milliseconds.
pub const SYNTHETIC_PERIOD_MS: u32 = 40;

/// Per-dimension sinusoids `A sin(w n + phi) + B` with
/// `A in [0.2, 1]`, `w in [0.05, 0.5]` rad/frame, `phi in [0, 2pi)`, `B in [-0.5, 0.5]`.
///
/// Parameters are drawn per sequence, per dimension, in the order A, w, phi, B.
pub fn gen_synthetic(
    n_seqs: usize,
    length: usize,
    pose_dim: usize,
    seed: u64,
) -> Result<MotionDataset> {
    if n_seqs == 0 || length == 0 || pose_dim == 0 {
        return Err(Error::invalid(
            "sequence count, length and pose_dim must be positive",
        ));
    }
    let mut rng = stream(seed, Stream::Synthetic);
    let mut ds = MotionDataset::new(pose_dim, SYNTHETIC_PERIOD_MS)?;
    for s in 0..n_seqs {
        let waves: Vec<[f64; 4]> = (0..pose_dim)
            .map(|_| {
                [
                    rng.gen_range(0.2..=1.0),
                    rng.gen_range(0.05..=0.5),
                    rng.gen_range(0.0..TAU),
                    rng.gen_range(-0.5..=0.5),
                ]
            })
            .collect();
        let mut data = Vec::with_capacity(length * pose_dim);
        for n in 0..length {
            for &[a, w, phi, b] in &waves {
                data.push(a * (w * n as f64 + phi).sin() + b);
            }
        }
        ds.push(
            Frames::new(pose_dim, data)?,
            SequenceMeta {
                file: format!("seq_{s:03}.csv"),
                subject: "synthetic".into(),
                action: "sinusoid".into(),
            },
        )?;
    }
    Ok(ds)
}
