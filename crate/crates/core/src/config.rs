//! Run configuration: flat `key = value` text with `#` comments.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::autodiff::{AdamConfig, Precision};
use crate::error::{Error, Result};
use crate::imitation::{BcConfig, GailConfig};
use crate::mdp::EpisodeConfig;
use crate::nn::{CriticConfig, DecoderFeed, PolicyConfig, DEFAULT_CRITIC_WIDTHS};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub precision: Precision,
    pub data: Option<PathBuf>,
    pub observed_frames: usize,
    pub predicted_frames: usize,
    pub steps: usize,
    pub policy_hidden: usize,
    pub decoder_feed: DecoderFeed,
    pub residual_output: bool,
    pub critic_hidden: usize,
    pub critic_widths: Vec<usize>,
    pub leaky_slope: f64,
    pub bc_iterations: usize,
    pub bc_batch: usize,
    pub bc_lr: f64,
    pub gail_iterations: usize,
    pub critic_batch: usize,
    pub generator_batch: usize,
    pub penalty_k: f64,
    pub penalty_p: f64,
    pub critic_lr: f64,
    pub generator_lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub clip_norm: f64,
    /// Save a checkpoint every this many iterations; 0 disables.
    pub checkpoint_every: usize,
    pub eval_windows: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        let gail = GailConfig::default();
        let ep = EpisodeConfig::default();
        RunConfig {
            seed: 0,
            precision: Precision::Test,
            data: None,
            observed_frames: ep.t,
            predicted_frames: ep.l,
            steps: ep.k,
            policy_hidden: 1024,
            decoder_feed: DecoderFeed::default(),
            residual_output: false,
            critic_hidden: 1024,
            critic_widths: DEFAULT_CRITIC_WIDTHS.to_vec(),
            leaky_slope: 0.2,
            bc_iterations: BcConfig::default().iterations,
            bc_batch: BcConfig::default().batch,
            bc_lr: BcConfig::default().adam.lr,
            gail_iterations: gail.iterations,
            critic_batch: gail.critic_batch,
            generator_batch: gail.generator_batch,
            penalty_k: gail.penalty_k,
            penalty_p: gail.penalty_p,
            critic_lr: gail.critic_adam.lr,
            generator_lr: gail.generator_adam.lr,
            adam_beta1: adam.beta1,
            adam_beta2: adam.beta2,
            adam_eps: adam.eps,
            clip_norm: gail.clip_norm,
            checkpoint_every: 0,
            eval_windows: 128,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("bad boolean {value:?} for {key}"))),
    }
}

impl RunConfig {
    pub const KEYS: &'static [&'static str] = &[
        "seed",
        "precision",
        "data",
        "observed_frames",
        "predicted_frames",
        "steps",
        "policy_hidden",
        "decoder_feed",
        "residual_output",
        "critic_hidden",
        "critic_widths",
        "leaky_slope",
        "bc_iterations",
        "bc_batch",
        "bc_lr",
        "gail_iterations",
        "critic_batch",
        "generator_batch",
        "penalty_k",
        "penalty_p",
        "critic_lr",
        "generator_lr",
        "adam_beta1",
        "adam_beta2",
        "adam_eps",
        "clip_norm",
        "checkpoint_every",
        "eval_windows",
    ];

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "seed" => self.seed = parse_value(key, v)?,
            "precision" => {
                self.precision = v
                    .parse()
                    .map_err(|_| Error::Config(format!("bad precision {v:?}")))?
            }
            "data" => self.data = (!v.is_empty()).then(|| PathBuf::from(v)),
            "observed_frames" => self.observed_frames = parse_value(key, v)?,
            "predicted_frames" => self.predicted_frames = parse_value(key, v)?,
            "steps" => self.steps = parse_value(key, v)?,
            "policy_hidden" => self.policy_hidden = parse_value(key, v)?,
            "decoder_feed" => {
                self.decoder_feed = v.parse().map_err(|e: Error| Error::Config(e.to_string()))?
            }
            "residual_output" => self.residual_output = parse_bool(key, v)?,
            "critic_hidden" => self.critic_hidden = parse_value(key, v)?,
            "critic_widths" => {
                self.critic_widths = v
                    .split(',')
                    .map(|w| parse_value(key, w.trim()))
                    .collect::<Result<Vec<usize>>>()?
            }
            "leaky_slope" => self.leaky_slope = parse_value(key, v)?,
            "bc_iterations" => self.bc_iterations = parse_value(key, v)?,
            "bc_batch" => self.bc_batch = parse_value(key, v)?,
            "bc_lr" => self.bc_lr = parse_value(key, v)?,
            "gail_iterations" => self.gail_iterations = parse_value(key, v)?,
            "critic_batch" => self.critic_batch = parse_value(key, v)?,
            "generator_batch" => self.generator_batch = parse_value(key, v)?,
            "penalty_k" => self.penalty_k = parse_value(key, v)?,
            "penalty_p" => self.penalty_p = parse_value(key, v)?,
            "critic_lr" => self.critic_lr = parse_value(key, v)?,
            "generator_lr" => self.generator_lr = parse_value(key, v)?,
            "adam_beta1" => self.adam_beta1 = parse_value(key, v)?,
            "adam_beta2" => self.adam_beta2 = parse_value(key, v)?,
            "adam_eps" => self.adam_eps = parse_value(key, v)?,
            "clip_norm" => self.clip_norm = parse_value(key, v)?,
            "checkpoint_every" => self.checkpoint_every = parse_value(key, v)?,
            "eval_windows" => self.eval_windows = parse_value(key, v)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. A key may appear once.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut seen = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            let key = key.trim();
            if seen.contains(&key) {
                return Err(Error::Config(format!(
                    "line {}: duplicate key {key:?}",
                    n + 1
                )));
            }
            seen.push(key);
            self.set(key, value).map_err(|e| {
                Error::Config(format!(
                    "line {}: {}",
                    n + 1,
                    e.to_string().trim_start_matches("config error: ")
                ))
            })?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Every key with its resolved value, in [`RunConfig::KEYS`] order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for key in Self::KEYS {
            let _ = writeln!(s, "{key} = {}", self.get(key).expect("known key"));
        }
        s
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "seed" => self.seed.to_string(),
            "precision" => self.precision.name().to_string(),
            "data" => self
                .data
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
            "observed_frames" => self.observed_frames.to_string(),
            "predicted_frames" => self.predicted_frames.to_string(),
            "steps" => self.steps.to_string(),
            "policy_hidden" => self.policy_hidden.to_string(),
            "decoder_feed" => self.decoder_feed.name().to_string(),
            "residual_output" => self.residual_output.to_string(),
            "critic_hidden" => self.critic_hidden.to_string(),
            "critic_widths" => self
                .critic_widths
                .iter()
                .map(|w| w.to_string())
                .collect::<Vec<_>>()
                .join(","),
            "leaky_slope" => self.leaky_slope.to_string(),
            "bc_iterations" => self.bc_iterations.to_string(),
            "bc_batch" => self.bc_batch.to_string(),
            "bc_lr" => self.bc_lr.to_string(),
            "gail_iterations" => self.gail_iterations.to_string(),
            "critic_batch" => self.critic_batch.to_string(),
            "generator_batch" => self.generator_batch.to_string(),
            "penalty_k" => self.penalty_k.to_string(),
            "penalty_p" => self.penalty_p.to_string(),
            "critic_lr" => self.critic_lr.to_string(),
            "generator_lr" => self.generator_lr.to_string(),
            "adam_beta1" => self.adam_beta1.to_string(),
            "adam_beta2" => self.adam_beta2.to_string(),
            "adam_eps" => self.adam_eps.to_string(),
            "clip_norm" => self.clip_norm.to_string(),
            "checkpoint_every" => self.checkpoint_every.to_string(),
            "eval_windows" => self.eval_windows.to_string(),
            _ => return None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.episode()?;
        if self.policy_hidden == 0 || self.critic_hidden == 0 {
            return Err(Error::Config("hidden sizes must be positive".into()));
        }
        if self.critic_widths.last() != Some(&1) || self.critic_widths.contains(&0) {
            return Err(Error::Config(
                "critic_widths must be positive and end in 1".into(),
            ));
        }
        if self.eval_windows == 0 {
            return Err(Error::Config("eval_windows must be positive".into()));
        }
        self.bc_config().validate()?;
        self.gail_config().validate()
    }

    pub fn episode(&self) -> Result<EpisodeConfig> {
        EpisodeConfig::new(self.observed_frames, self.predicted_frames, self.steps)
            .map_err(|e| Error::Config(e.to_string()))
    }

    fn adam(&self, lr: f64) -> AdamConfig {
        AdamConfig {
            lr,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }

    pub fn policy_config(&self, pose_dim: usize) -> PolicyConfig {
        PolicyConfig {
            pose_dim,
            hidden: self.policy_hidden,
            decoder_feed: self.decoder_feed,
            residual_output: self.residual_output,
        }
    }

    pub fn critic_config(&self, pose_dim: usize) -> CriticConfig {
        CriticConfig {
            pose_dim,
            hidden: self.critic_hidden,
            widths: self.critic_widths.clone(),
            leaky_slope: self.leaky_slope,
        }
    }

    pub fn bc_config(&self) -> BcConfig {
        BcConfig {
            batch: self.bc_batch,
            iterations: self.bc_iterations,
            adam: self.adam(self.bc_lr),
            clip_norm: self.clip_norm,
            seed: self.seed,
        }
    }

    pub fn gail_config(&self) -> GailConfig {
        GailConfig {
            iterations: self.gail_iterations,
            critic_batch: self.critic_batch,
            generator_batch: self.generator_batch,
            penalty_k: self.penalty_k,
            penalty_p: self.penalty_p,
            critic_adam: self.adam(self.critic_lr),
            generator_adam: self.adam(self.generator_lr),
            clip_norm: self.clip_norm,
            seed: self.seed,
        }
    }
}
