use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use posegail::config::RunConfig;
use posegail::Precision;

/// File written next to every run's outputs and read back by `predict` and `eval`.
pub const RESOLVED_CONFIG: &str = "resolved.cfg";

/// Creates `dir`, refusing an existing nonempty one unless `force` is set.
pub fn prepare_out_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let nonempty = fs::read_dir(dir)
            .with_context(|| format!("reading {}", dir.display()))?
            .next()
            .is_some();
        if nonempty && !force {
            bail!(
                "{} already exists; pass --force to overwrite",
                dir.display()
            );
        }
    }
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(())
}

/// Starts from `--config` when given, else from `resolved.cfg` beside
/// `checkpoint` when one exists, else from defaults; then applies `key=value`
/// overrides.
pub fn resolve_config(
    config: Option<&Path>,
    checkpoint: Option<&Path>,
    overrides: &[String],
) -> Result<RunConfig> {
    let mut cfg = match (config, checkpoint.and_then(sibling_config)) {
        (Some(p), _) => RunConfig::load(p)?,
        (None, Some(p)) => RunConfig::load(&p)?,
        (None, None) => RunConfig::default(),
    };
    for kv in overrides {
        let (k, v) = kv
            .split_once('=')
            .with_context(|| format!("--set expects key=value, got {kv:?}"))?;
        cfg.set(k.trim(), v.trim())?;
    }
    Ok(cfg)
}

fn sibling_config(checkpoint: &Path) -> Option<PathBuf> {
    let p = checkpoint.parent()?.join(RESOLVED_CONFIG);
    p.exists().then_some(p)
}

pub fn parse_precision(s: &str) -> Result<Precision, String> {
    s.parse().map_err(|e: posegail::Error| e.to_string())
}
