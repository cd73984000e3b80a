use rand_chacha::ChaCha8Rng;

use super::log::TrainLog;
use super::{check_dataset, diverged};
use crate::autodiff::{clip_global_norm, gradient_values, Adam, AdamConfig, Precision, Tape, Var};
use crate::data::MotionDataset;
use crate::error::{Error, Result};
use crate::mdp::{EpisodeConfig, Frames};
use crate::nn::{constant_frames, PolicyModel};
use crate::rng::{stream, Stream};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BcConfig {
    pub batch: usize,
    pub iterations: usize,
    pub adam: AdamConfig,
    /// Global gradient-norm ceiling; `<= 0` disables clipping.
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for BcConfig {
    fn default() -> Self {
        BcConfig {
            batch: 16,
            iterations: 2000,
            adam: AdamConfig::with_lr(1e-3),
            clip_norm: 5.0,
            seed: 0,
        }
    }
}

impl BcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 {
            return Err(Error::Config("bc batch must be positive".into()));
        }
        self.adam.validate()
    }
}

/// Mean absolute difference over every entry of every frame.
pub fn bc_loss(predicted: &[Var], expert: &[Var]) -> Result<Var> {
    if predicted.len() != expert.len() || predicted.is_empty() {
        return Err(Error::shape(
            "bc_loss",
            format!(
                "{} predicted frames vs {} expert frames",
                predicted.len(),
                expert.len()
            ),
        ));
    }
    let mut total: Option<Var> = None;
    let mut count = 0usize;
    for (p, e) in predicted.iter().zip(expert) {
        if p.shape() != e.shape() {
            return Err(Error::shape(
                "bc_loss",
                format!("{:?} vs {:?}", p.shape(), e.shape()),
            ));
        }
        count += p.value().numel();
        let term = p.sub(e)?.pow_abs(1.0)?.sum()?;
        total = Some(match total {
            Some(t) => t.add(&term)?,
            None => term,
        });
    }
    total.expect("nonempty").scale(1.0 / count as f64)
}

/// Teacher-forced loss on batched trajectories of `t + l` frames: every state
/// is built from true frames, and all K windows contribute.
pub fn teacher_forced_loss<P: PolicyModel>(
    policy: &P,
    p: &[Var],
    frames: &[Var],
    episode: &EpisodeConfig,
) -> Result<Var> {
    episode.validate()?;
    if frames.len() != episode.span() {
        return Err(Error::invalid(format!(
            "trajectory has {} frames, expected {}",
            frames.len(),
            episode.span()
        )));
    }
    let (t, m) = (episode.t, episode.m);
    let batch = frames[0].shape()[0];
    let mut memory = policy.begin(frames[0].tape(), batch)?;
    for f in &frames[..t] {
        memory = policy.observe(p, &memory, f)?;
    }
    let mut predicted = Vec::with_capacity(episode.l);
    for step in 0..episode.k {
        let window = &frames[t + step * m..t + (step + 1) * m];
        predicted.extend(policy.act(p, &memory, m, Some(window))?);
        if step + 1 < episode.k {
            for f in window {
                memory = policy.observe(p, &memory, f)?;
            }
        }
    }
    bc_loss(&predicted, &frames[t..])
}

/// Behavioral-cloning optimizer state.
pub struct BcTrainer {
    config: BcConfig,
    episode: EpisodeConfig,
    precision: Precision,
    adam: Adam,
    rng: ChaCha8Rng,
    iteration: usize,
}

impl BcTrainer {
    pub fn new<P: PolicyModel>(
        policy: &P,
        episode: EpisodeConfig,
        config: BcConfig,
        precision: Precision,
    ) -> Result<Self> {
        config.validate()?;
        episode.validate()?;
        Ok(BcTrainer {
            adam: Adam::new(config.adam, policy.params().tensors()),
            rng: stream(config.seed, Stream::BcBatches),
            config,
            episode,
            precision,
            iteration: 0,
        })
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Loss of `policy` on fixed trajectories.
    pub fn loss_on<P: PolicyModel>(&self, policy: &P, trajectories: &[&Frames]) -> Result<f64> {
        let tape = Tape::new(self.precision);
        tape.no_grad(|| {
            let p = policy.params().bind_frozen(&tape);
            let frames = constant_frames(&tape, trajectories)?;
            teacher_forced_loss(policy, &p, &frames, &self.episode)?
                .value()
                .item()
        })
    }

    /// One Adam step on the given trajectories. Returns the loss before the step.
    pub fn step_on<P: PolicyModel>(
        &mut self,
        policy: &mut P,
        trajectories: &[&Frames],
    ) -> Result<f64> {
        let tape = Tape::new(self.precision);
        let p = policy.params().bind(&tape);
        let frames = constant_frames(&tape, trajectories)?;
        let loss = teacher_forced_loss(policy, &p, &frames, &self.episode)?;
        let mut grads = gradient_values(&loss, &p)?;
        clip_global_norm(&mut grads, self.config.clip_norm);
        self.adam.step(policy.params_mut().tensors_mut(), &grads)?;
        policy.params_mut().round_to(self.precision);
        loss.value().item()
    }

    /// Samples a batch and takes one step.
    pub fn step<P: PolicyModel>(
        &mut self,
        data: &MotionDataset,
        policy: &mut P,
        log: &mut TrainLog,
    ) -> Result<f64> {
        check_dataset(data, policy.pose_dim(), &self.episode)?;
        let span = self.episode.span();
        let windows = data.sample_windows(span, self.config.batch, &mut self.rng)?;
        let trajectories = windows
            .iter()
            .map(|&w| data.window(w, span))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&Frames> = trajectories.iter().collect();
        let iteration = self.iteration + 1;
        let loss = self
            .step_on(policy, &refs)
            .map_err(|e| diverged(e, iteration, "bc", &windows))?;
        self.iteration = iteration;
        log.push(iteration, "bc", loss, None, None)?;
        Ok(loss)
    }
}

/// Runs `config.iterations` behavioral-cloning steps on `policy`.
pub fn bc_train<P: PolicyModel>(
    data: &MotionDataset,
    policy: &mut P,
    episode: EpisodeConfig,
    config: BcConfig,
    precision: Precision,
    log: &mut TrainLog,
) -> Result<()> {
    let mut trainer = BcTrainer::new(policy, episode, config, precision)?;
    for _ in 0..config.iterations {
        trainer.step(data, policy, log)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;

    fn frame_vars(tape: &Tape, rows: &[&[f64]]) -> Vec<Var> {
        rows.iter()
            .map(|r| tape.var(Tensor::new(&[1, r.len()], r.to_vec()).unwrap()))
            .collect()
    }

    #[test]
    fn identical_is_zero() {
        let tape = Tape::new(Precision::Test);
        let a = frame_vars(&tape, &[&[1.0, -2.0], &[0.5, 0.0]]);
        assert_eq!(bc_loss(&a, &a).unwrap().value().item().unwrap(), 0.0);
    }

    #[test]
    fn single_entry_difference() {
        let tape = Tape::new(Precision::Test);
        let a = frame_vars(&tape, &[&[2.0, 0.0]]);
        let b = frame_vars(&tape, &[&[0.0, 0.0]]);
        assert_eq!(bc_loss(&a, &b).unwrap().value().item().unwrap(), 1.0);
        assert_eq!(bc_loss(&b, &a).unwrap().value().item().unwrap(), 1.0);
    }

    #[test]
    fn shape_mismatch() {
        let tape = Tape::new(Precision::Test);
        let a = frame_vars(&tape, &[&[2.0, 0.0]]);
        let b = frame_vars(&tape, &[&[0.0, 0.0, 1.0]]);
        assert!(bc_loss(&a, &b).is_err());
        assert!(bc_loss(&a, &[]).is_err());
    }

    #[test]
    fn rejects_zero_batch() {
        let cfg = BcConfig {
            batch: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
