//! Evaluation harness: roll a forecaster over test windows and tabulate the
//! per-action, per-horizon mean angle error.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::index;

use super::dataset::MotionDataset;
use super::metrics::{batch_mean_angle_error, zero_velocity, HorizonSet};
use crate::error::{Error, Result};
use crate::mdp::{EpisodeConfig, Frames};
use crate::rng::{stream, Stream};

/// Predicts `l` frames after each `t`-frame prefix.
pub trait Forecaster {
    fn forecast(&self, prefixes: &[&Frames], episode: &EpisodeConfig) -> Result<Vec<Frames>>;
}

/// Repeats the last observed frame.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroVelocity;

impl Forecaster for ZeroVelocity {
    fn forecast(&self, prefixes: &[&Frames], episode: &EpisodeConfig) -> Result<Vec<Frames>> {
        prefixes
            .iter()
            .map(|p| zero_velocity(p, episode.l))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EvalOptions {
    /// Seeded subsample size per action; `None` uses every valid window.
    pub max_windows_per_action: Option<usize>,
    pub seed: u64,
    /// Windows per forecaster call.
    pub chunk: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            max_windows_per_action: Some(128),
            seed: 0,
            chunk: 128,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRow {
    pub action: String,
    pub horizon_ms: u32,
    pub mean_angle_error: f64,
}

/// Rows sorted by action, then by horizon order.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ErrorTable {
    pub rows: Vec<ErrorRow>,
}

/// The test windows for one action: (sequence index, start).
fn action_windows(ds: &MotionDataset, span: usize) -> BTreeMap<String, Vec<(usize, usize)>> {
    let mut by_action: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, m) in ds.meta().iter().enumerate() {
        by_action.entry(m.action.clone()).or_default().push(i);
    }
    by_action
        .into_iter()
        .map(|(action, mut seqs)| {
            // canonical order, independent of dataset order
            seqs.sort_by(|&a, &b| {
                let (ma, mb) = (&ds.meta()[a], &ds.meta()[b]);
                (&ma.subject, &ma.file, ds.sequences()[a].data().len()).cmp(&(
                    &mb.subject,
                    &mb.file,
                    ds.sequences()[b].data().len(),
                ))
            });
            let windows = seqs
                .into_iter()
                .flat_map(|s| {
                    let len = ds.sequences()[s].len();
                    let n = if len >= span { len - span + 1 } else { 0 };
                    (0..n).map(move |start| (s, start))
                })
                .collect();
            (action, windows)
        })
        .collect()
}

pub fn evaluate<F: Forecaster + ?Sized>(
    forecaster: &F,
    test: &MotionDataset,
    episode: &EpisodeConfig,
    horizons: &HorizonSet,
    options: &EvalOptions,
) -> Result<ErrorTable> {
    episode.validate()?;
    if test.is_empty() {
        return Err(Error::invalid("empty test set"));
    }
    if horizons.max_frame() > episode.l {
        return Err(Error::invalid(format!(
            "horizon frame {} exceeds prediction length {}",
            horizons.max_frame(),
            episode.l
        )));
    }
    let span = episode.span();
    let mut rng = stream(options.seed, Stream::EvalSubsample);
    let mut table = ErrorTable::default();
    for (action, mut windows) in action_windows(test, span) {
        if windows.is_empty() {
            continue;
        }
        if let Some(max) = options.max_windows_per_action {
            if windows.len() > max {
                let mut picked = index::sample(&mut rng, windows.len(), max).into_vec();
                picked.sort_unstable();
                windows = picked.into_iter().map(|i| windows[i]).collect();
            }
        }
        let mut sums = vec![0.0; horizons.horizons_ms().len()];
        for chunk in windows.chunks(options.chunk.max(1)) {
            let trajs = chunk
                .iter()
                .map(|&w| test.window(w, span))
                .collect::<Result<Vec<_>>>()?;
            let prefixes = trajs
                .iter()
                .map(|tr| tr.window(0, episode.t))
                .collect::<Result<Vec<_>>>()?;
            let truth = trajs
                .iter()
                .map(|tr| tr.window(episode.t, episode.l))
                .collect::<Result<Vec<_>>>()?;
            let refs: Vec<&Frames> = prefixes.iter().collect();
            let predicted = forecaster.forecast(&refs, episode)?;
            let errs = batch_mean_angle_error(&predicted, &truth, horizons)?;
            for (s, e) in sums.iter_mut().zip(errs) {
                *s += e * chunk.len() as f64;
            }
        }
        let n = windows.len() as f64;
        for (&h, s) in horizons.horizons_ms().iter().zip(sums) {
            table.rows.push(ErrorRow {
                action: action.clone(),
                horizon_ms: h,
                mean_angle_error: s / n,
            });
        }
    }
    if table.rows.is_empty() {
        return Err(Error::invalid(format!(
            "no test sequence admits a window of {span} frames"
        )));
    }
    Ok(table)
}

impl ErrorTable {
    pub fn get(&self, action: &str, horizon_ms: u32) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.action == action && r.horizon_ms == horizon_ms)
            .map(|r| r.mean_angle_error)
    }

    /// Mean over actions at one horizon.
    pub fn average(&self, horizon_ms: u32) -> Option<f64> {
        let v: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.horizon_ms == horizon_ms)
            .map(|r| r.mean_angle_error)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("action,horizon_ms,mean_angle_error\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{}", r.action, r.horizon_ms, r.mean_angle_error);
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<ErrorTable> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, "action,horizon_ms,mean_angle_error")) => {}
            _ => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: 1,
                    msg: "expected header action,horizon_ms,mean_angle_error".into(),
                })
            }
        }
        let mut rows = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::Parse {
                path: path.to_path_buf(),
                line: i as u64 + 1,
                msg: msg.to_string(),
            };
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 3 {
                return Err(bad("expected 3 columns"));
            }
            rows.push(ErrorRow {
                action: cells[0].to_string(),
                horizon_ms: cells[1].parse().map_err(|_| bad("bad horizon"))?,
                mean_angle_error: cells[2].parse().map_err(|_| bad("bad error value"))?,
            });
        }
        Ok(ErrorTable { rows })
    }

    /// Actions as rows, horizons as columns.
    pub fn to_wide_string(&self) -> String {
        let mut horizons: Vec<u32> = Vec::new();
        for r in &self.rows {
            if !horizons.contains(&r.horizon_ms) {
                horizons.push(r.horizon_ms);
            }
        }
        let mut actions: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !actions.contains(&r.action.as_str()) {
                actions.push(&r.action);
            }
        }
        let mut s = format!("{:<16}", "millisec");
        for h in &horizons {
            let _ = write!(s, "{h:>8}");
        }
        s.push('\n');
        for a in actions {
            let _ = write!(s, "{a:<16}");
            for &h in &horizons {
                match self.get(a, h) {
                    Some(e) => {
                        let _ = write!(s, "{e:>8.3}");
                    }
                    None => s.push_str("       -"),
                }
            }
            s.push('\n');
        }
        s
    }

    /// Row-by-row merge with `baseline`; `delta = self - baseline`.
    pub fn compare(&self, baseline: &ErrorTable) -> Result<String> {
        let mut s = String::from("action,horizon_ms,mean_angle_error,baseline_error,delta\n");
        for r in &self.rows {
            let b = baseline.get(&r.action, r.horizon_ms).ok_or_else(|| {
                Error::invalid(format!(
                    "baseline has no row for {} at {} ms",
                    r.action, r.horizon_ms
                ))
            })?;
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.action,
                r.horizon_ms,
                r.mean_angle_error,
                b,
                r.mean_angle_error - b
            );
        }
        Ok(s)
    }
}
