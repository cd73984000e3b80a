//! Dataset directory: `manifest.tsv` plus one CSV of frames per sequence.
//!
//! ```text
//! manifest.tsv: file <TAB> subject <TAB> action <TAB> frame_period_ms <TAB> pose_dim
//! <file>.csv:   one frame per row, pose_dim comma-separated decimals, no header
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;

use crate::error::{Error, Result};
use crate::mdp::Frames;

pub const MANIFEST: &str = "manifest.tsv";
const MANIFEST_COLUMNS: [&str; 5] = ["file", "subject", "action", "frame_period_ms", "pose_dim"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SequenceMeta {
    pub file: String,
    pub subject: String,
    pub action: String,
}

/// Expert demonstrations: variable-length sequences sharing one pose_dim and
/// frame period.
#[derive(Clone, Debug, PartialEq)]
pub struct MotionDataset {
    pose_dim: usize,
    frame_period_ms: u32,
    sequences: Vec<Frames>,
    meta: Vec<SequenceMeta>,
}

impl MotionDataset {
    pub fn new(pose_dim: usize, frame_period_ms: u32) -> Result<Self> {
        if pose_dim == 0 || frame_period_ms == 0 {
            return Err(Error::invalid("pose_dim and frame period must be positive"));
        }
        Ok(MotionDataset {
            pose_dim,
            frame_period_ms,
            sequences: Vec::new(),
            meta: Vec::new(),
        })
    }

    pub fn push(&mut self, frames: Frames, meta: SequenceMeta) -> Result<()> {
        if frames.pose_dim() != self.pose_dim {
            return Err(Error::shape(
                "MotionDataset::push",
                format!(
                    "{} has pose_dim {}, dataset {}",
                    meta.file,
                    frames.pose_dim(),
                    self.pose_dim
                ),
            ));
        }
        if frames.is_empty() {
            return Err(Error::invalid(format!("{} has no frames", meta.file)));
        }
        self.sequences.push(frames);
        self.meta.push(meta);
        Ok(())
    }

    pub fn pose_dim(&self) -> usize {
        self.pose_dim
    }

    pub fn frame_period_ms(&self) -> u32 {
        self.frame_period_ms
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn sequences(&self) -> &[Frames] {
        &self.sequences
    }

    pub fn meta(&self) -> &[SequenceMeta] {
        &self.meta
    }

    /// Splits every sequence in time: the last `test_frames` of each go to the
    /// second dataset, the rest to the first.
    pub fn split_tail(&self, test_frames: usize) -> Result<(MotionDataset, MotionDataset)> {
        let mut train = MotionDataset::new(self.pose_dim, self.frame_period_ms)?;
        let mut test = MotionDataset::new(self.pose_dim, self.frame_period_ms)?;
        for (s, m) in self.sequences.iter().zip(&self.meta) {
            if s.len() <= test_frames {
                return Err(Error::invalid(format!(
                    "{} has {} frames, cannot hold out {test_frames}",
                    m.file,
                    s.len()
                )));
            }
            let cut = s.len() - test_frames;
            train.push(s.window(0, cut)?, m.clone())?;
            test.push(s.window(cut, test_frames)?, m.clone())?;
        }
        Ok((train, test))
    }

    /// Every (sequence, start) that admits a window of `span` frames, in order.
    pub fn valid_positions(&self, span: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, s) in self.sequences.iter().enumerate() {
            if s.len() >= span {
                out.extend((0..=s.len() - span).map(|start| (i, start)));
            }
        }
        out
    }

    fn count_positions(&self, span: usize) -> usize {
        self.sequences
            .iter()
            .filter(|s| s.len() >= span)
            .map(|s| s.len() - span + 1)
            .sum()
    }

    /// `n` uniform draws over all valid (sequence, start) positions.
    pub fn sample_windows<R: Rng + ?Sized>(
        &self,
        span: usize,
        n: usize,
        rng: &mut R,
    ) -> Result<Vec<(usize, usize)>> {
        let total = self.count_positions(span);
        if span == 0 || total == 0 {
            return Err(Error::invalid(format!(
                "no sequence admits a window of {span} frames"
            )));
        }
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let mut u = rng.gen_range(0..total);
            for (i, s) in self.sequences.iter().enumerate() {
                if s.len() < span {
                    continue;
                }
                let count = s.len() - span + 1;
                if u < count {
                    out.push((i, u));
                    break;
                }
                u -= count;
            }
        }
        Ok(out)
    }

    pub fn window(&self, (seq, start): (usize, usize), span: usize) -> Result<Frames> {
        self.sequences
            .get(seq)
            .ok_or_else(|| Error::invalid(format!("no sequence {seq}")))?
            .window(start, span)
    }
}

/// Draws `n` length-`span` trajectories uniformly over valid positions.
pub fn sample_trajectories<R: Rng + ?Sized>(
    ds: &MotionDataset,
    span: usize,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Frames>> {
    ds.sample_windows(span, n, rng)?
        .into_iter()
        .map(|pos| ds.window(pos, span))
        .collect()
}

fn format_value(v: f64) -> String {
    // 17 significant digits: exact round trip through text
    format!("{v:.16e}")
}

pub fn write_frames_csv(path: &Path, frames: &Frames) -> Result<()> {
    let mut out = String::with_capacity(frames.data().len() * 24);
    for f in frames.iter() {
        let row: Vec<String> = f.iter().map(|&v| format_value(v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a frame CSV. Errors name the file and 1-based line.
pub fn read_frames_csv(path: &Path) -> Result<Frames> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| parse_error(path, 0, e.to_string()))?;
    let mut dim = None;
    let mut data = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_error(path, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        match dim {
            None => dim = Some(rec.len()),
            Some(d) if d != rec.len() => {
                return Err(parse_error(
                    path,
                    line,
                    format!("expected {d} values, found {}", rec.len()),
                ));
            }
            _ => {}
        }
        for cell in rec.iter() {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| parse_error(path, line, format!("not a number: {cell:?}")))?;
            data.push(v);
        }
    }
    let dim = dim.ok_or_else(|| parse_error(path, 0, "no frames".into()))?;
    Frames::new(dim, data)
}

fn parse_error(path: &Path, line: u64, msg: String) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    }
}

/// Loads a dataset directory and validates its invariants.
pub fn load_dataset(dir: &Path) -> Result<MotionDataset> {
    let manifest = dir.join(MANIFEST);
    if !manifest.exists() {
        return Err(Error::MissingFile(manifest));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(true)
        .from_path(&manifest)
        .map_err(|e| parse_error(&manifest, 0, e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| parse_error(&manifest, 1, e.to_string()))?
        .clone();
    let got: Vec<&str> = headers.iter().collect();
    if got != MANIFEST_COLUMNS {
        return Err(parse_error(
            &manifest,
            1,
            format!("expected columns {MANIFEST_COLUMNS:?}, found {got:?}"),
        ));
    }
    let mut ds: Option<MotionDataset> = None;
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_error(&manifest, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let period: u32 = rec[3].trim().parse().map_err(|_| {
            parse_error(
                &manifest,
                line,
                format!("bad frame_period_ms {:?}", &rec[3]),
            )
        })?;
        let dim: usize = rec[4]
            .trim()
            .parse()
            .map_err(|_| parse_error(&manifest, line, format!("bad pose_dim {:?}", &rec[4])))?;
        let ds = match &mut ds {
            Some(d) => d,
            None => ds.insert(MotionDataset::new(dim, period)?),
        };
        if ds.pose_dim != dim || ds.frame_period_ms != period {
            return Err(parse_error(
                &manifest,
                line,
                "pose_dim or frame period differs between sequences".into(),
            ));
        }
        let file: PathBuf = dir.join(&rec[0]);
        let frames = read_frames_csv(&file)?;
        if frames.pose_dim() != dim {
            return Err(parse_error(
                &file,
                1,
                format!(
                    "{} values per frame, manifest says pose_dim {dim}",
                    frames.pose_dim()
                ),
            ));
        }
        ds.push(
            frames,
            SequenceMeta {
                file: rec[0].to_string(),
                subject: rec[1].to_string(),
                action: rec[2].to_string(),
            },
        )?;
    }
    ds.ok_or_else(|| parse_error(&manifest, 1, "manifest lists no sequences".into()))
}

/// Writes `manifest.tsv` and one CSV per sequence into `dir` (created if needed).
pub fn save_dataset(ds: &MotionDataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut manifest = fs::File::create(dir.join(MANIFEST))?;
    writeln!(manifest, "{}", MANIFEST_COLUMNS.join("\t"))?;
    for (s, m) in ds.sequences.iter().zip(&ds.meta) {
        writeln!(
            manifest,
            "{}\t{}\t{}\t{}\t{}",
            m.file, m.subject, m.action, ds.frame_period_ms, ds.pose_dim
        )?;
        write_frames_csv(&dir.join(&m.file), s)?;
    }
    Ok(())
}
