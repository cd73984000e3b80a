use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use posegail::data::{
    evaluate, load_dataset, ErrorTable, EvalOptions, Forecaster, HorizonSet, ZeroVelocity,
};
use posegail::imitation::PolicyForecaster;
use posegail::nn::{checkpoint, Seq2SeqPolicy};
use posegail::Precision;

use crate::util::{parse_precision, resolve_config};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    ZeroVelocity,
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("forecaster").required(true).args(["checkpoint", "baseline"])))]
pub struct EvalArgs {
    /// Test dataset directory.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, value_enum)]
    baseline: Option<Baseline>,
    /// Comma-separated horizons in milliseconds.
    #[arg(long, default_value = "80,160,320,400,560,1000")]
    horizons: String,
    /// Table CSV to write; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Error table to compare against; the output gains baseline and delta columns.
    #[arg(long)]
    compare: Option<PathBuf>,
    /// Print the table with one column per horizon instead of CSV.
    #[arg(long)]
    wide: bool,
    /// Defaults to `resolved.cfg` beside the checkpoint.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Seed of the test-window subsample; defaults to the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Arithmetic of the forward pass; defaults to the checkpoint's.
    #[arg(long, value_parser = parse_precision)]
    precision: Option<Precision>,
}

pub fn run(a: EvalArgs) -> Result<()> {
    let cfg = resolve_config(a.config.as_deref(), a.checkpoint.as_deref(), &a.overrides)?;
    let episode = cfg.episode()?;
    let test = load_dataset(&a.data)?;
    let horizons = HorizonSet::parse(&a.horizons, test.frame_period_ms())?;
    let options = EvalOptions {
        max_windows_per_action: Some(cfg.eval_windows),
        seed: a.seed.unwrap_or(cfg.seed),
        ..Default::default()
    };
    let frames: Vec<String> = horizons.frames().iter().map(|f| f.to_string()).collect();
    eprintln!("horizons {} ms -> frames {}", a.horizons, frames.join(","));

    let policy;
    let forecaster: Box<dyn Forecaster + '_> = match &a.checkpoint {
        None => Box::new(ZeroVelocity),
        Some(path) => {
            let (params, stored) = checkpoint::load(path)?;
            policy = Seq2SeqPolicy::from_checkpoint(&params, cfg.decoder_feed, cfg.residual_output)
                .with_context(|| format!("loading policy from {}", path.display()))?;
            Box::new(PolicyForecaster {
                policy: &policy,
                precision: a.precision.unwrap_or(stored),
            })
        }
    };
    let table = evaluate(forecaster.as_ref(), &test, &episode, &horizons, &options)?;

    let text = match &a.compare {
        Some(path) => table.compare(&ErrorTable::read_csv(path)?)?,
        None if a.wide => table.to_wide_string(),
        None => table.to_csv(),
    };
    match &a.out {
        Some(path) => {
            std::fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}
