use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use posegail::data::{read_frames_csv, write_frames_csv, zero_velocity};
use posegail::imitation::forecast_batch;
use posegail::nn::{checkpoint, Seq2SeqPolicy};
use posegail::Precision;

use crate::util::{parse_precision, resolve_config};

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("forecaster").required(true).args(["checkpoint", "zero_velocity"])))]
pub struct PredictArgs {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Repeat the last observed frame instead of running a policy.
    #[arg(long)]
    zero_velocity: bool,
    /// Observed frames, one per row; the last `observed_frames` rows are used.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Defaults to `resolved.cfg` beside the checkpoint.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Arithmetic of the forward pass; defaults to the checkpoint's.
    #[arg(long, value_parser = parse_precision)]
    precision: Option<Precision>,
}

pub fn run(a: PredictArgs) -> Result<()> {
    let cfg = resolve_config(a.config.as_deref(), a.checkpoint.as_deref(), &a.overrides)?;
    let episode = cfg.episode()?;
    let frames = read_frames_csv(&a.input)?;
    if frames.len() < episode.t {
        bail!(
            "{} has {} frames; at least {} are needed",
            a.input.display(),
            frames.len(),
            episode.t
        );
    }
    let prefix = frames.window(frames.len() - episode.t, episode.t)?;
    let predicted = match &a.checkpoint {
        None => zero_velocity(&prefix, episode.l)?,
        Some(path) => {
            let (params, stored) = checkpoint::load(path)?;
            let policy =
                Seq2SeqPolicy::from_checkpoint(&params, cfg.decoder_feed, cfg.residual_output)
                    .with_context(|| format!("loading policy from {}", path.display()))?;
            if policy.config().pose_dim != frames.pose_dim() {
                bail!(
                    "input has {} values per frame, the policy expects {}",
                    frames.pose_dim(),
                    policy.config().pose_dim
                );
            }
            let precision = a.precision.unwrap_or(stored);
            forecast_batch(&policy, &[&prefix], &episode, precision)?
                .pop()
                .expect("one prefix in, one forecast out")
        }
    };
    write_frames_csv(&a.out, &predicted)?;
    eprintln!("wrote {} frames to {}", predicted.len(), a.out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::fs;

    use crate::util::testing::{path, posegail, small_dataset, train};

    #[test]
    fn forecasts_and_input_errors() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path();
        let data = small_dataset(dir);
        train(&data, &path(dir, "run"), &["--stage", "bc"]).unwrap();
        let ckpt = path(dir, "run/final.ckpt");
        let input = path(dir, "d/seq_001.csv");
        let predict = |extra: &[&str], out: &str| {
            let out = path(dir, out);
            let args = [&["predict", "--input", &input, "--out", &out][..], extra].concat();
            posegail(&args).map(|_| fs::read_to_string(&out).unwrap())
        };

        let p = predict(&["--checkpoint", &ckpt], "p.csv").unwrap();
        assert_eq!(p.lines().count(), 4);
        assert!(p.lines().all(|l| l.split(',').count() == 3));

        let cfg = path(dir, "run/resolved.cfg");
        let z = predict(&["--zero-velocity", "--config", &cfg], "z.csv").unwrap();
        let source = fs::read_to_string(dir.join("d/seq_001.csv")).unwrap();
        let last = source.lines().last().unwrap();
        assert_eq!(z.lines().count(), 4);
        assert!(z.lines().all(|l| l == last));

        fs::write(dir.join("short.csv"), "1,2,3\n4,5,6\n").unwrap();
        let short = path(dir, "short.csv");
        let err = posegail(&[
            "predict",
            "--checkpoint",
            &ckpt,
            "--input",
            &short,
            "--out",
            &path(dir, "s.csv"),
        ])
        .unwrap_err();
        assert!(format!("{err:#}").contains("at least 6"));

        fs::write(dir.join("bad.csv"), "1,2,3\n4,oops,6\n").unwrap();
        let bad = path(dir, "bad.csv");
        let err = posegail(&[
            "predict",
            "--checkpoint",
            &ckpt,
            "--input",
            &bad,
            "--out",
            &path(dir, "b.csv"),
        ])
        .unwrap_err();
        assert!(format!("{err:#}").contains("bad.csv:2:"), "{err:#}");
    }
}
