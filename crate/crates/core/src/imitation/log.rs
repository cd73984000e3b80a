use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::error::{Error, Result};

pub const LOG_HEADER: &str = "iteration,phase,loss,penalty,wasserstein_gap,seconds";

#[derive(Clone, Debug, PartialEq)]
pub struct LogRecord {
    pub iteration: usize,
    /// `bc`, `critic` or `generator`.
    pub phase: String,
    pub loss: f64,
    pub penalty: Option<f64>,
    pub wasserstein_gap: Option<f64>,
    /// Wall-clock seconds since the log was opened.
    pub seconds: f64,
}

impl LogRecord {
    fn to_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{:.3}",
            self.iteration,
            self.phase,
            self.loss,
            opt(self.penalty),
            opt(self.wasserstein_gap),
            self.seconds
        )
    }

    /// Equal in every column except the wall clock.
    pub fn same_values(&self, other: &LogRecord) -> bool {
        let bits = |v: Option<f64>| v.map(f64::to_bits);
        self.iteration == other.iteration
            && self.phase == other.phase
            && self.loss.to_bits() == other.loss.to_bits()
            && bits(self.penalty) == bits(other.penalty)
            && bits(self.wasserstein_gap) == bits(other.wasserstein_gap)
    }
}

/// Training records, optionally mirrored line by line to a CSV file.
#[derive(Debug)]
pub struct TrainLog {
    records: Vec<LogRecord>,
    sink: Option<(PathBuf, File)>,
    started: Instant,
}

impl Default for TrainLog {
    fn default() -> Self {
        TrainLog::new()
    }
}

impl TrainLog {
    pub fn new() -> Self {
        TrainLog {
            records: Vec::new(),
            sink: None,
            started: Instant::now(),
        }
    }

    /// Appends to `path`, writing the header if the file is new or empty.
    pub fn with_file(path: &Path) -> Result<Self> {
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        if file.metadata()?.len() == 0 {
            writeln!(file, "{LOG_HEADER}")?;
        }
        Ok(TrainLog {
            records: Vec::new(),
            sink: Some((path.to_path_buf(), file)),
            started: Instant::now(),
        })
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    pub fn push(
        &mut self,
        iteration: usize,
        phase: &str,
        loss: f64,
        penalty: Option<f64>,
        wasserstein_gap: Option<f64>,
    ) -> Result<()> {
        if let Some(last) = self.records.iter().rev().find(|r| r.phase == phase) {
            if iteration <= last.iteration {
                return Err(Error::invalid(format!(
                    "{phase} iteration {iteration} does not follow {}",
                    last.iteration
                )));
            }
        }
        let record = LogRecord {
            iteration,
            phase: phase.to_string(),
            loss,
            penalty,
            wasserstein_gap,
            seconds: self.started.elapsed().as_secs_f64(),
        };
        if let Some((_, file)) = &mut self.sink {
            writeln!(file, "{}", record.to_line())?;
            file.flush()?;
        }
        self.records.push(record);
        Ok(())
    }

    /// Records of one phase, in order.
    pub fn phase<'a>(&'a self, phase: &'a str) -> impl Iterator<Item = &'a LogRecord> + 'a {
        self.records.iter().filter(move |r| r.phase == phase)
    }

    pub fn read_csv(path: &Path) -> Result<Vec<LogRecord>> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let reader = BufReader::new(File::open(path)?);
        let mut out = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let bad = |msg: &str| Error::Parse {
                path: path.to_path_buf(),
                line: i as u64 + 1,
                msg: msg.to_string(),
            };
            if i == 0 {
                if line != LOG_HEADER {
                    return Err(bad("unexpected log header"));
                }
                continue;
            }
            let c: Vec<&str> = line.split(',').collect();
            if c.len() != 6 {
                return Err(bad("expected 6 columns"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
            let opt = |s: &str| {
                if s.is_empty() {
                    Ok(None)
                } else {
                    num(s).map(Some)
                }
            };
            out.push(LogRecord {
                iteration: c[0].parse().map_err(|_| bad("bad iteration"))?,
                phase: c[1].to_string(),
                loss: num(c[2])?,
                penalty: opt(c[3])?,
                wasserstein_gap: opt(c[4])?,
                seconds: num(c[5])?,
            });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        let mut log = TrainLog::with_file(&path).unwrap();
        log.push(1, "bc", 0.1 + 0.2, None, None).unwrap();
        log.push(1, "critic", -1e-7, Some(3.5), Some(-0.25))
            .unwrap();
        log.push(2, "bc", 1.0 / 3.0, None, None).unwrap();
        let back = TrainLog::read_csv(&path).unwrap();
        assert_eq!(back.len(), 3);
        for (a, b) in back.iter().zip(log.records()) {
            assert!(a.same_values(b));
        }
    }

    #[test]
    fn appends_without_second_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        TrainLog::with_file(&path)
            .unwrap()
            .push(1, "bc", 1.0, None, None)
            .unwrap();
        TrainLog::with_file(&path)
            .unwrap()
            .push(1, "critic", 1.0, None, None)
            .unwrap();
        assert_eq!(TrainLog::read_csv(&path).unwrap().len(), 2);
    }

    #[test]
    fn iterations_must_increase_per_phase() {
        let mut log = TrainLog::new();
        log.push(1, "critic", 0.0, None, None).unwrap();
        log.push(1, "generator", 0.0, None, None).unwrap();
        assert!(log.push(1, "critic", 0.0, None, None).is_err());
        assert_eq!(log.phase("generator").count(), 1);
    }
}
