use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use posegail::data::{gen_synthetic, save_dataset};

use crate::util::prepare_out_dir;

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long, default_value_t = 8)]
    seqs: usize,
    /// Frames per sequence.
    #[arg(long, default_value_t = 400)]
    len: usize,
    /// Values per frame.
    #[arg(long, default_value_t = 6)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Hold out the last N frames of every sequence: writes `out/train` and `out/test`.
    #[arg(long)]
    holdout: Option<usize>,
    #[arg(long)]
    force: bool,
}

pub fn run(a: GenArgs) -> Result<()> {
    let ds = gen_synthetic(a.seqs, a.len, a.dim, a.seed)?;
    prepare_out_dir(&a.out, a.force)?;
    match a.holdout {
        None => save_dataset(&ds, &a.out)?,
        Some(n) => {
            let (train, test) = ds.split_tail(n)?;
            save_dataset(&train, &a.out.join("train"))?;
            save_dataset(&test, &a.out.join("test"))?;
        }
    }
    println!(
        "{} sequences x {} frames x {} dims at {} ms/frame -> {}",
        ds.len(),
        a.len,
        ds.pose_dim(),
        ds.frame_period_ms(),
        a.out.display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::fs;

    use crate::util::testing::{path, posegail};

    #[test]
    fn same_seed_same_directory() {
        let tmp = tempfile::tempdir().unwrap();
        let (a, b) = (path(tmp.path(), "a"), path(tmp.path(), "b"));
        for out in [&a, &b] {
            posegail(&[
                "gen", "--seqs", "8", "--len", "400", "--dim", "6", "--seed", "7", "--out", out,
            ])
            .unwrap();
        }
        let mut names: Vec<_> = fs::read_dir(&a)
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        assert_eq!(names.len(), 9);
        for n in &names {
            let left = fs::read(tmp.path().join("a").join(n)).unwrap();
            assert_eq!(left, fs::read(tmp.path().join("b").join(n)).unwrap());
        }
    }

    #[test]
    fn existing_destination_needs_force() {
        let tmp = tempfile::tempdir().unwrap();
        let out = path(tmp.path(), "a");
        posegail(&["gen", "--out", &out]).unwrap();
        let err = posegail(&["gen", "--out", &out]).unwrap_err();
        assert!(format!("{err:#}").contains("--force"));
        posegail(&["gen", "--out", &out, "--force"]).unwrap();
    }

    #[test]
    fn zero_dimension_is_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let out = path(tmp.path(), "c");
        assert!(posegail(&["gen", "--dim", "0", "--out", &out]).is_err());
        assert!(!tmp.path().join("c").exists());
    }

    #[test]
    fn holdout_splits_every_sequence() {
        let tmp = tempfile::tempdir().unwrap();
        let out = path(tmp.path(), "d");
        posegail(&[
            "gen",
            "--seqs",
            "3",
            "--len",
            "40",
            "--dim",
            "3",
            "--holdout",
            "15",
            "--out",
            &out,
        ])
        .unwrap();
        let lines = |rel: &str| {
            fs::read_to_string(tmp.path().join(rel))
                .unwrap()
                .lines()
                .count()
        };
        assert_eq!(lines("d/test/seq_000.csv"), 15);
        assert_eq!(lines("d/train/seq_000.csv"), 25);
    }
}
