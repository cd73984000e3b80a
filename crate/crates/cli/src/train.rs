use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use posegail::config::RunConfig;
use posegail::data::{load_dataset, MotionDataset};
use posegail::imitation::{BcTrainer, TrainLog, WgailTrainer};
use posegail::nn::{checkpoint, CriticModel, LstmCritic, ParamSet, PolicyModel, Seq2SeqPolicy};
use posegail::rng::{stream, Stream};
use posegail::{Error, Precision};

use crate::util::{parse_precision, prepare_out_dir, resolve_config, RESOLVED_CONFIG};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Stage {
    Bc,
    Gail,
    Both,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Training dataset directory; overrides the `data` key.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Flat `key = value` run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Stage::Both)]
    stage: Stage,
    /// Checkpoint to start the policy (and critic, if present) from.
    #[arg(long, required_if_eq("stage", "gail"))]
    init: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_precision)]
    precision: Option<Precision>,
    /// Override one configuration key, e.g. `--set bc_iterations=500`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    force: bool,
}

struct Run {
    cfg: RunConfig,
    out: PathBuf,
    data: MotionDataset,
    policy: Seq2SeqPolicy,
    critic: Option<LstmCritic>,
    log: TrainLog,
}

pub fn run(a: TrainArgs) -> Result<()> {
    let mut cfg = resolve_config(a.config.as_deref(), None, &a.overrides)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(p) = a.precision {
        cfg.precision = p;
    }
    if let Some(d) = &a.data {
        cfg.data = Some(d.clone());
    }
    cfg.validate()?;
    let data_dir = cfg
        .data
        .clone()
        .context("no dataset: pass --data or set the data key")?;
    let data = load_dataset(&data_dir)?;
    let dim = data.pose_dim();

    let (policy, critic) = match &a.init {
        Some(path) => {
            let (params, _) = checkpoint::load(path)?;
            let policy =
                Seq2SeqPolicy::from_params(cfg.policy_config(dim), params.with_prefix("policy."))
                    .with_context(|| {
                    format!("{} does not fit the configured policy", path.display())
                })?;
            let critic_params = params.with_prefix("critic.");
            let critic = if critic_params.is_empty() {
                None
            } else {
                Some(
                    LstmCritic::from_params(cfg.critic_config(dim), critic_params).with_context(
                        || format!("{} does not fit the configured critic", path.display()),
                    )?,
                )
            };
            (policy, critic)
        }
        None => (
            Seq2SeqPolicy::new(
                cfg.policy_config(dim),
                &mut stream(cfg.seed, Stream::PolicyInit),
            )?,
            None,
        ),
    };

    prepare_out_dir(&a.out, a.force)?;
    let log_path = a.out.join("log.csv");
    if log_path.exists() {
        fs::remove_file(&log_path)?;
    }
    fs::write(a.out.join(RESOLVED_CONFIG), cfg.to_text())?;
    eprintln!(
        "{} sequences, pose_dim {dim}; policy {} values; precision {}",
        data.len(),
        policy.params().num_values(),
        cfg.precision.name()
    );

    let mut run = Run {
        log: TrainLog::with_file(&log_path)?,
        out: a.out,
        cfg,
        data,
        policy,
        critic,
    };
    if matches!(a.stage, Stage::Bc | Stage::Both) {
        run.behavioral_cloning()?;
        run.save("bc.ckpt", false)?;
    }
    if matches!(a.stage, Stage::Gail | Stage::Both) {
        run.adversarial()?;
    }
    let path = run.save("final.ckpt", true)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

impl Run {
    fn save(&self, name: &str, with_critic: bool) -> Result<PathBuf> {
        let path = self.out.join(name);
        let params = match (&self.critic, with_critic) {
            (Some(c), true) => ParamSet::merged(&[self.policy.params(), c.params()])?,
            _ => self.policy.params().clone(),
        };
        checkpoint::save(&path, &params, self.cfg.precision)?;
        Ok(path)
    }

    fn periodic(&self, stage: &str, iteration: usize) -> Result<()> {
        let every = self.cfg.checkpoint_every;
        if every > 0 && iteration.is_multiple_of(every) {
            self.save(&format!("{stage}_{iteration:06}.ckpt"), true)?;
        }
        Ok(())
    }

    /// Saves the current parameters and passes the error on.
    fn abort(&self, e: Error) -> anyhow::Error {
        if matches!(e, Error::Diverged { .. }) {
            match self.save("diverged.ckpt", true) {
                Ok(p) => eprintln!("saved last parameters to {}", p.display()),
                Err(s) => eprintln!("could not save diverged checkpoint: {s:#}"),
            }
        }
        e.into()
    }

    fn behavioral_cloning(&mut self) -> Result<()> {
        let cfg = self.cfg.bc_config();
        let episode = self.cfg.episode()?;
        let mut trainer = BcTrainer::new(&self.policy, episode, cfg, self.cfg.precision)?;
        let start = Instant::now();
        for _ in 0..cfg.iterations {
            let loss = match trainer.step(&self.data, &mut self.policy, &mut self.log) {
                Ok(l) => l,
                Err(e) => return Err(self.abort(e)),
            };
            let it = trainer.iteration();
            report("bc", it, cfg.iterations, &start, &format!("loss {loss:.5}"));
            self.periodic("bc", it)?;
        }
        Ok(())
    }

    fn adversarial(&mut self) -> Result<()> {
        let cfg = self.cfg.gail_config();
        let episode = self.cfg.episode()?;
        let dim = self.data.pose_dim();
        if self.critic.is_none() {
            let init = &mut stream(self.cfg.seed, Stream::CriticInit);
            self.critic = Some(LstmCritic::new(self.cfg.critic_config(dim), init)?);
        }
        let mut trainer = WgailTrainer::new(
            &self.policy,
            self.critic.as_ref().expect("set above"),
            episode,
            cfg,
            self.cfg.precision,
        )?;
        let start = Instant::now();
        for _ in 0..cfg.iterations {
            let critic = self.critic.as_mut().expect("set above");
            if let Err(e) = trainer.iterate(&self.data, &mut self.policy, critic, &mut self.log) {
                return Err(self.abort(e));
            }
            let it = trainer.iteration();
            let gap = self
                .log
                .phase("critic")
                .last()
                .and_then(|r| r.wasserstein_gap)
                .unwrap_or(f64::NAN);
            report("gail", it, cfg.iterations, &start, &format!("gap {gap:.5}"));
            self.periodic("gail", it)?;
        }
        Ok(())
    }
}

fn report(stage: &str, it: usize, total: usize, start: &Instant, detail: &str) {
    let every = (total / 20).max(1);
    if it.is_multiple_of(every) || it == total {
        eprintln!(
            "{stage} {it}/{total} {detail} ({:.1}s)",
            start.elapsed().as_secs_f64()
        );
    }
}
