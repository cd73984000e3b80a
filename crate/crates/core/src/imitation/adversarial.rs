use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::log::TrainLog;
use super::rollout::agent_trajectories;
use super::{check_dataset, diverged};
use crate::autodiff::{
    clip_global_norm, gradient, gradient_values, Adam, AdamConfig, Precision, Tape, Tensor, Var,
};
use crate::data::MotionDataset;
use crate::error::{Error, Result};
use crate::mdp::{Action, EpisodeConfig, Frames, State};
use crate::nn::{CriticModel, PolicyModel};
use crate::rng::{stream, Stream};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GailConfig {
    /// Outer iterations, one critic step and one generator step each.
    pub iterations: usize,
    pub critic_batch: usize,
    pub generator_batch: usize,
    pub penalty_k: f64,
    pub penalty_p: f64,
    pub critic_adam: AdamConfig,
    pub generator_adam: AdamConfig,
    /// Global gradient-norm ceiling for both players; `<= 0` disables clipping.
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for GailConfig {
    fn default() -> Self {
        GailConfig {
            iterations: 2000,
            critic_batch: 16,
            generator_batch: 16,
            penalty_k: 2.0,
            penalty_p: 6.0,
            critic_adam: AdamConfig::with_lr(1e-4),
            generator_adam: AdamConfig::with_lr(1e-5),
            clip_norm: 5.0,
            seed: 0,
        }
    }
}

impl GailConfig {
    pub fn validate(&self) -> Result<()> {
        if self.critic_batch == 0 || self.generator_batch == 0 {
            return Err(Error::Config(
                "critic and generator batches must be positive".into(),
            ));
        }
        if self.penalty_k.is_nan()
            || self.penalty_k < 0.0
            || self.penalty_p.is_nan()
            || self.penalty_p <= 1.0
            || !self.penalty_p.is_finite()
        {
            return Err(Error::Config(format!(
                "penalty needs k >= 0 and p > 1, got k={} p={}",
                self.penalty_k, self.penalty_p
            )));
        }
        self.critic_adam.validate()?;
        self.generator_adam.validate()
    }
}

/// Elementwise `alpha * expert + (1 - alpha) * agent` for both halves of a pair.
pub fn interpolate_pairs(
    expert: (&State, &Action),
    agent: (&State, &Action),
    alpha: f64,
) -> Result<(State, Action)> {
    Ok((
        expert.0.lerp(agent.0, alpha)?,
        expert.1.lerp(agent.1, alpha)?,
    ))
}

/// Per-sample `k * |grad_{(state, action)} D|^p` as a `[batch, 1]` node that
/// stays differentiable in the critic parameters. `state` and `action` must be
/// graph inputs (leaves).
pub fn grad_penalty<C: CriticModel>(
    critic: &C,
    w: &[Var],
    state: &[Var],
    action: &[Var],
    k: f64,
    p: f64,
) -> Result<Var> {
    grad_penalty_many(critic, w, &[(state, action)], k, p)
}

/// [`grad_penalty`] for several pair batches scored together, stacked along rows.
pub fn grad_penalty_many<C: CriticModel>(
    critic: &C,
    w: &[Var],
    pairs: &[(&[Var], &[Var])],
    k: f64,
    p: f64,
) -> Result<Var> {
    if k.is_nan() || k < 0.0 || p.is_nan() || p <= 1.0 {
        return Err(Error::invalid(format!(
            "penalty needs k >= 0 and p > 1, got k={k} p={p}"
        )));
    }
    let score = critic.score_many(w, pairs)?;
    let inputs: Vec<Var> = pairs
        .iter()
        .flat_map(|(s, a)| s.iter().chain(a.iter()).cloned())
        .collect();
    let grads = gradient(&score.sum()?, &inputs)?;
    let mut offset = 0;
    let mut per_pair = Vec::with_capacity(pairs.len());
    for (s, a) in pairs {
        let n = s.len() + a.len();
        let g = Var::concat(&grads[offset..offset + n], 1)?;
        per_pair.push(g.l2_norm(Some(1))?);
        offset += n;
    }
    let norms = if per_pair.len() == 1 {
        per_pair.pop().expect("one pair")
    } else {
        Var::concat(&per_pair, 0)?
    };
    norms.pow_abs(p)?.scale(k)
}

/// Sampled `(sequence, start)` windows and their frames batched per time step.
pub type WindowBatch = (Vec<(usize, usize)>, Vec<Tensor>);

/// Expert and agent trajectories for one critic step, plus the interpolation
/// weights. `alphas[j * K + (i - 1)]` belongs to trajectory `j`, step `i`.
#[derive(Clone, Debug)]
pub struct CriticBatch {
    pub windows: Vec<(usize, usize)>,
    pub expert: Vec<Tensor>,
    pub agent: Vec<Tensor>,
    pub alphas: Vec<f64>,
}

/// Graph nodes of the critic objective.
pub struct CriticTerms {
    /// `gap - penalty`, the quantity the critic ascends.
    pub objective: Var,
    pub penalty: Var,
    /// `mean D(agent) - mean D(expert)`.
    pub gap: Var,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticStats {
    pub objective: f64,
    pub penalty: f64,
    pub gap: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneratorStats {
    /// Mean critic score of the policy's actions on its own states.
    pub objective: f64,
    pub gap: f64,
}

/// Per-row interpolation of batched frames.
fn interpolate_rows(expert: &[Tensor], agent: &[Tensor], alphas: &[f64]) -> Result<Vec<Tensor>> {
    expert
        .iter()
        .zip(agent)
        .map(|(e, a)| {
            let cols = e.shape()[1];
            let data = e
                .data()
                .iter()
                .zip(a.data())
                .enumerate()
                .map(|(idx, (x, y))| {
                    let alpha = alphas[idx / cols];
                    alpha * x + (1.0 - alpha) * y
                })
                .collect();
            Tensor::new(e.shape(), data)
        })
        .collect()
}

/// Sum of the critic's scores over all pairs, scored in one stacked pass.
fn score_sum<C: CriticModel>(critic: &C, w: &[Var], pairs: &[(Vec<Var>, Vec<Var>)]) -> Result<Var> {
    let refs: Vec<(&[Var], &[Var])> = pairs.iter().map(|(s, a)| (&s[..], &a[..])).collect();
    critic.score_many(w, &refs)?.sum()
}

/// The critic objective `mean[D(agent) - D(expert) - k |grad D(interp)|^p]`
/// over all (trajectory, step) pairs of the batch.
pub fn critic_objective<C: CriticModel>(
    critic: &C,
    w: &[Var],
    batch: &CriticBatch,
    episode: &EpisodeConfig,
    k: f64,
    p: f64,
) -> Result<CriticTerms> {
    let (t, m, steps) = (episode.t, episode.m, episode.k);
    if batch.expert.len() != episode.span() || batch.agent.len() != episode.span() {
        return Err(Error::invalid(
            "critic batch trajectories must span t + l frames",
        ));
    }
    let rows = batch.expert[0].shape()[0];
    if batch.alphas.len() != rows * steps {
        return Err(Error::invalid(format!(
            "{} interpolation weights for {rows} trajectories of {steps} steps",
            batch.alphas.len()
        )));
    }
    let tape = w
        .first()
        .ok_or_else(|| Error::invalid("critic has no parameters"))?
        .tape();
    let constants = |frames: &[Tensor]| -> Vec<Var> {
        frames.iter().map(|f| tape.constant(f.clone())).collect()
    };
    let expert = constants(&batch.expert);
    let agent = constants(&batch.agent);
    let cuts: Vec<usize> = (1..=steps).map(|i| t + (i - 1) * m).collect();
    let pairs = |frames: &[Var]| -> Vec<(Vec<Var>, Vec<Var>)> {
        cuts.iter()
            .map(|&c| (frames[..c].to_vec(), frames[c..c + m].to_vec()))
            .collect()
    };
    let expert_sum = score_sum(critic, w, &pairs(&expert))?;
    let agent_sum = score_sum(critic, w, &pairs(&agent))?;
    let penalty_sum = if k > 0.0 {
        let mut mixed = Vec::with_capacity(steps);
        for (i, &cut) in cuts.iter().enumerate() {
            let alphas: Vec<f64> = (0..rows).map(|j| batch.alphas[j * steps + i]).collect();
            let frames: Vec<Var> =
                interpolate_rows(&batch.expert[..cut + m], &batch.agent[..cut + m], &alphas)?
                    .into_iter()
                    .map(|f| tape.var(f))
                    .collect();
            let action = frames[cut..].to_vec();
            mixed.push((frames[..cut].to_vec(), action));
        }
        let refs: Vec<(&[Var], &[Var])> = mixed.iter().map(|(s, a)| (&s[..], &a[..])).collect();
        Some(grad_penalty_many(critic, w, &refs, k, p)?.sum()?)
    } else {
        None
    };
    let n = 1.0 / (rows * steps) as f64;
    let gap = agent_sum.sub(&expert_sum)?.scale(n)?;
    let penalty = match penalty_sum {
        Some(s) => s.scale(n)?,
        None => tape.constant(Tensor::zeros(&gap.shape())?),
    };
    Ok(CriticTerms {
        objective: gap.sub(&penalty)?,
        penalty,
        gap,
    })
}

/// Mean critic score of the policy's own actions along its compounding rollout
/// from the expert prefixes. States enter as constants, so the gradient in
/// `theta` only flows through the emitted actions.
pub fn generator_objective<P: PolicyModel, C: CriticModel>(
    policy: &P,
    theta: &[Var],
    critic: &C,
    w: &[Var],
    prefix: &[Var],
    episode: &EpisodeConfig,
) -> Result<Var> {
    if prefix.len() != episode.t {
        return Err(Error::invalid("generator prefix must hold t frames"));
    }
    let rows = prefix[0].shape()[0];
    let mut memory = policy.begin(prefix[0].tape(), rows)?;
    for f in prefix {
        memory = policy.observe(theta, &memory, f)?;
    }
    let mut trajectory: Vec<Var> = prefix.to_vec();
    let mut pairs = Vec::with_capacity(episode.k);
    for i in 1..=episode.k {
        let action = policy.act(theta, &memory, episode.m, None)?;
        pairs.push((trajectory.clone(), action.clone()));
        if i < episode.k {
            for f in &action {
                let f = f.detach();
                memory = policy.observe(theta, &memory, &f)?;
                trajectory.push(f);
            }
        }
    }
    score_sum(critic, w, &pairs)?.scale(1.0 / (rows * episode.k) as f64)
}

/// Mean critic score on the expert pairs of a batch, without a graph.
fn expert_score<C: CriticModel>(
    critic: &C,
    expert: &[Tensor],
    episode: &EpisodeConfig,
    precision: Precision,
) -> Result<f64> {
    let tape = Tape::new(precision);
    tape.no_grad(|| {
        let w = critic.params().bind_frozen(&tape);
        let frames: Vec<Var> = expert.iter().map(|f| tape.constant(f.clone())).collect();
        let pairs: Vec<(Vec<Var>, Vec<Var>)> = (1..=episode.k)
            .map(|i| {
                let cut = episode.state_len(i);
                (
                    frames[..cut].to_vec(),
                    frames[cut..cut + episode.m].to_vec(),
                )
            })
            .collect();
        let total = score_sum(critic, &w, &pairs)?.value().item()?;
        Ok(total / (expert[0].shape()[0] * episode.k) as f64)
    })
}

/// Policy gradient of the generator objective with the critic frozen.
/// Returns the gradients (one per policy tensor) and the objective value.
pub fn generator_gradient<P: PolicyModel, C: CriticModel>(
    policy: &P,
    critic: &C,
    expert: &[Tensor],
    episode: &EpisodeConfig,
    precision: Precision,
) -> Result<(Vec<Tensor>, f64)> {
    let tape = Tape::new(precision);
    let theta = policy.params().bind(&tape);
    let w = critic.params().bind_frozen(&tape);
    let prefix: Vec<Var> = expert[..episode.t]
        .iter()
        .map(|f| tape.constant(f.clone()))
        .collect();
    let objective = generator_objective(policy, &theta, critic, &w, &prefix, episode)?;
    let grads = gradient_values(&objective, &theta)?;
    Ok((grads, objective.value().item()?))
}

/// Optimizer and sampling state of the adversarial stage.
pub struct WgailTrainer {
    config: GailConfig,
    episode: EpisodeConfig,
    precision: Precision,
    critic_adam: Adam,
    generator_adam: Adam,
    critic_rng: ChaCha8Rng,
    alpha_rng: ChaCha8Rng,
    generator_rng: ChaCha8Rng,
    iteration: usize,
}

impl WgailTrainer {
    pub fn new<P: PolicyModel, C: CriticModel>(
        policy: &P,
        critic: &C,
        episode: EpisodeConfig,
        config: GailConfig,
        precision: Precision,
    ) -> Result<Self> {
        config.validate()?;
        episode.validate()?;
        Ok(WgailTrainer {
            critic_adam: Adam::new(config.critic_adam, critic.params().tensors()),
            generator_adam: Adam::new(config.generator_adam, policy.params().tensors()),
            critic_rng: stream(config.seed, Stream::CriticBatches),
            alpha_rng: stream(config.seed, Stream::Interpolation),
            generator_rng: stream(config.seed, Stream::GeneratorBatches),
            config,
            episode,
            precision,
            iteration: 0,
        })
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    fn sample(
        data: &MotionDataset,
        episode: &EpisodeConfig,
        n: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<WindowBatch> {
        let span = episode.span();
        let windows = data.sample_windows(span, n, rng)?;
        let trajectories = windows
            .iter()
            .map(|&w| data.window(w, span))
            .collect::<Result<Vec<Frames>>>()?;
        Ok((windows, super::rollout::frames_to_batch(&trajectories)?))
    }

    /// Samples expert windows, rolls the policy out from their prefixes and
    /// draws one interpolation weight per (trajectory, step).
    pub fn sample_critic_batch<P: PolicyModel>(
        &mut self,
        data: &MotionDataset,
        policy: &P,
    ) -> Result<CriticBatch> {
        let (windows, expert) = Self::sample(
            data,
            &self.episode,
            self.config.critic_batch,
            &mut self.critic_rng,
        )?;
        let agent = agent_trajectories(policy, &expert, &self.episode, self.precision)?;
        let alphas = (0..self.config.critic_batch * self.episode.k)
            .map(|_| self.alpha_rng.gen::<f64>())
            .collect();
        Ok(CriticBatch {
            windows,
            expert,
            agent,
            alphas,
        })
    }

    pub fn critic_value<C: CriticModel>(
        &self,
        critic: &C,
        batch: &CriticBatch,
    ) -> Result<CriticStats> {
        let tape = Tape::new(self.precision);
        let w = critic.params().bind(&tape);
        let terms = critic_objective(
            critic,
            &w,
            batch,
            &self.episode,
            self.config.penalty_k,
            self.config.penalty_p,
        )?;
        Ok(CriticStats {
            objective: terms.objective.value().item()?,
            penalty: terms.penalty.value().item()?,
            gap: terms.gap.value().item()?,
        })
    }

    /// One Adam ascent step on the critic. Returns the objective before the step.
    pub fn d_step<C: CriticModel>(
        &mut self,
        critic: &mut C,
        batch: &CriticBatch,
    ) -> Result<CriticStats> {
        let tape = Tape::new(self.precision);
        let w = critic.params().bind(&tape);
        let terms = critic_objective(
            critic,
            &w,
            batch,
            &self.episode,
            self.config.penalty_k,
            self.config.penalty_p,
        )?;
        let mut grads = gradient_values(&terms.objective.neg()?, &w)?;
        clip_global_norm(&mut grads, self.config.clip_norm);
        self.critic_adam
            .step(critic.params_mut().tensors_mut(), &grads)?;
        critic.params_mut().round_to(self.precision);
        Ok(CriticStats {
            objective: terms.objective.value().item()?,
            penalty: terms.penalty.value().item()?,
            gap: terms.gap.value().item()?,
        })
    }

    pub fn sample_generator_batch(&mut self, data: &MotionDataset) -> Result<WindowBatch> {
        Self::sample(
            data,
            &self.episode,
            self.config.generator_batch,
            &mut self.generator_rng,
        )
    }

    /// One Adam descent step on the policy with the critic frozen. Returns the
    /// objective before the step.
    pub fn g_step<P: PolicyModel, C: CriticModel>(
        &mut self,
        policy: &mut P,
        critic: &C,
        expert: &[Tensor],
    ) -> Result<GeneratorStats> {
        let (mut grads, objective) =
            generator_gradient(policy, critic, expert, &self.episode, self.precision)?;
        clip_global_norm(&mut grads, self.config.clip_norm);
        self.generator_adam
            .step(policy.params_mut().tensors_mut(), &grads)?;
        policy.params_mut().round_to(self.precision);
        let expert_mean = expert_score(critic, expert, &self.episode, self.precision)?;
        Ok(GeneratorStats {
            objective,
            gap: objective - expert_mean,
        })
    }

    /// One critic step followed by one generator step, both logged.
    pub fn iterate<P: PolicyModel, C: CriticModel>(
        &mut self,
        data: &MotionDataset,
        policy: &mut P,
        critic: &mut C,
        log: &mut TrainLog,
    ) -> Result<()> {
        check_dataset(data, policy.pose_dim(), &self.episode)?;
        let iteration = self.iteration + 1;
        let batch = self.sample_critic_batch(data, policy)?;
        let d = self
            .d_step(critic, &batch)
            .and_then(|s| finite(s.objective, "critic").map(|_| s))
            .map_err(|e| diverged(e, iteration, "critic", &batch.windows))?;
        let (windows, expert) = self.sample_generator_batch(data)?;
        let g = self
            .g_step(policy, critic, &expert)
            .and_then(|s| finite(s.objective, "generator").map(|_| s))
            .map_err(|e| diverged(e, iteration, "generator", &windows))?;
        self.iteration = iteration;
        log.push(
            iteration,
            "critic",
            d.objective,
            Some(d.penalty),
            Some(d.gap),
        )?;
        log.push(iteration, "generator", g.objective, None, Some(g.gap))?;
        Ok(())
    }
}

fn finite(v: f64, what: &'static str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Alternates critic and generator steps for `config.iterations` rounds.
pub fn wgail_train<P: PolicyModel, C: CriticModel>(
    data: &MotionDataset,
    policy: &mut P,
    critic: &mut C,
    episode: EpisodeConfig,
    config: GailConfig,
    precision: Precision,
    log: &mut TrainLog,
) -> Result<()> {
    let mut trainer = WgailTrainer::new(policy, critic, episode, config, precision)?;
    for _ in 0..config.iterations {
        trainer.iterate(data, policy, critic, log)?;
    }
    Ok(())
}
