use crate::error::{Error, Result};
use crate::mdp::Frames;

/// Standard reporting horizons in milliseconds.
pub const STANDARD_HORIZONS_MS: [u32; 6] = [80, 160, 320, 400, 560, 1000];

/// Evaluation horizons and the 1-based frame index each one lands on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HorizonSet {
    period_ms: u32,
    horizons_ms: Vec<u32>,
}

impl HorizonSet {
    pub fn new(horizons_ms: &[u32], period_ms: u32) -> Result<Self> {
        if period_ms == 0 {
            return Err(Error::invalid("frame period must be positive"));
        }
        if horizons_ms.is_empty() {
            return Err(Error::invalid("no horizons"));
        }
        for &h in horizons_ms {
            if h == 0 || h % period_ms != 0 {
                return Err(Error::invalid(format!(
                    "horizon {h} ms is not a positive multiple of the {period_ms} ms frame period"
                )));
            }
        }
        Ok(HorizonSet {
            period_ms,
            horizons_ms: horizons_ms.to_vec(),
        })
    }

    pub fn standard(period_ms: u32) -> Result<Self> {
        Self::new(&STANDARD_HORIZONS_MS, period_ms)
    }

    /// Parses `"80,160,320"`.
    pub fn parse(list: &str, period_ms: u32) -> Result<Self> {
        let hs = list
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<u32>()
                    .map_err(|_| Error::invalid(format!("bad horizon {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(&hs, period_ms)
    }

    pub fn horizons_ms(&self) -> &[u32] {
        &self.horizons_ms
    }

    pub fn period_ms(&self) -> u32 {
        self.period_ms
    }

    /// 1-based frame index for each horizon.
    pub fn frames(&self) -> Vec<usize> {
        self.horizons_ms
            .iter()
            .map(|&h| (h / self.period_ms) as usize)
            .collect()
    }

    pub fn max_frame(&self) -> usize {
        self.frames().into_iter().max().unwrap_or(0)
    }
}

/// Euclidean distance between predicted and true frames at each horizon.
pub fn mean_angle_error(
    predicted: &Frames,
    truth: &Frames,
    horizons: &HorizonSet,
) -> Result<Vec<f64>> {
    if predicted.pose_dim() != truth.pose_dim() || predicted.len() != truth.len() {
        return Err(Error::shape(
            "mean_angle_error",
            format!(
                "{}x{} vs {}x{}",
                predicted.len(),
                predicted.pose_dim(),
                truth.len(),
                truth.pose_dim()
            ),
        ));
    }
    horizons
        .frames()
        .into_iter()
        .map(|f| {
            if f > predicted.len() {
                return Err(Error::invalid(format!(
                    "horizon frame {f} is beyond the {} predicted frames",
                    predicted.len()
                )));
            }
            let p = predicted.frame(f - 1);
            let t = truth.frame(f - 1);
            Ok(p.iter()
                .zip(t)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt())
        })
        .collect()
}

/// Per-horizon error averaged over samples, summed in sample order.
pub fn batch_mean_angle_error(
    predicted: &[Frames],
    truth: &[Frames],
    horizons: &HorizonSet,
) -> Result<Vec<f64>> {
    if predicted.len() != truth.len() || predicted.is_empty() {
        return Err(Error::invalid(
            "prediction and truth batches must be nonempty and equal length",
        ));
    }
    let mut acc = vec![0.0; horizons.horizons_ms().len()];
    for (p, t) in predicted.iter().zip(truth) {
        for (a, e) in acc.iter_mut().zip(mean_angle_error(p, t, horizons)?) {
            *a += e;
        }
    }
    let n = predicted.len() as f64;
    Ok(acc.into_iter().map(|a| a / n).collect())
}

/// Forecast that repeats the last observed frame `l` times.
pub fn zero_velocity(prefix: &Frames, l: usize) -> Result<Frames> {
    if prefix.is_empty() {
        return Err(Error::invalid(
            "zero-velocity baseline needs at least one observed frame",
        ));
    }
    prefix.repeat_last(l)
}
