use crate::autodiff::{Precision, Tape, Tensor, Var};
use crate::data::Forecaster;
use crate::error::{Error, Result};
use crate::mdp::{EpisodeConfig, Frames};
use crate::nn::{batch_frames, constant_frames, unbatch_frames, values, PolicyModel};

/// Runs the policy for K windows from a `t`-frame prefix, appending each
/// predicted window to the state before the next step. Returns the `l`
/// generated frames.
pub fn compounding_rollout<P: PolicyModel>(
    policy: &P,
    p: &[Var],
    prefix: &[Var],
    episode: &EpisodeConfig,
) -> Result<Vec<Var>> {
    episode.validate()?;
    if prefix.len() != episode.t {
        return Err(Error::invalid(format!(
            "rollout prefix has {} frames, expected {}",
            prefix.len(),
            episode.t
        )));
    }
    let batch = prefix[0].shape()[0];
    let mut memory = policy.begin(prefix[0].tape(), batch)?;
    for f in prefix {
        memory = policy.observe(p, &memory, f)?;
    }
    let mut out = Vec::with_capacity(episode.l);
    for step in 0..episode.k {
        let action = policy.act(p, &memory, episode.m, None)?;
        if step + 1 < episode.k {
            for f in &action {
                memory = policy.observe(p, &memory, f)?;
            }
        }
        out.extend(action);
    }
    Ok(out)
}

/// Batched, gradient-free rollout returning the `l` forecast frames per prefix.
pub fn forecast_batch<P: PolicyModel>(
    policy: &P,
    prefixes: &[&Frames],
    episode: &EpisodeConfig,
    precision: Precision,
) -> Result<Vec<Frames>> {
    let tape = Tape::new(precision);
    tape.no_grad(|| {
        let p = policy.params().bind_frozen(&tape);
        let prefix = constant_frames(&tape, prefixes)?;
        let generated = compounding_rollout(policy, &p, &prefix, episode)?;
        unbatch_frames(&values(&generated))
    })
}

/// The prefix followed by the policy's own continuation, as `[batch, pose_dim]`
/// frames. `expert` supplies the prefix and must hold at least `t` frames.
pub fn agent_trajectories<P: PolicyModel>(
    policy: &P,
    expert: &[Tensor],
    episode: &EpisodeConfig,
    precision: Precision,
) -> Result<Vec<Tensor>> {
    if expert.len() < episode.t {
        return Err(Error::invalid(
            "expert batch shorter than the observed prefix",
        ));
    }
    let tape = Tape::new(precision);
    tape.no_grad(|| {
        let p = policy.params().bind_frozen(&tape);
        let prefix: Vec<Var> = expert[..episode.t]
            .iter()
            .map(|f| tape.constant(f.clone()))
            .collect();
        let generated = compounding_rollout(policy, &p, &prefix, episode)?;
        let mut out = expert[..episode.t].to_vec();
        out.extend(values(&generated));
        Ok(out)
    })
}

/// A trained policy seen through the evaluation interface.
pub struct PolicyForecaster<'a, P> {
    pub policy: &'a P,
    pub precision: Precision,
}

impl<P: PolicyModel> Forecaster for PolicyForecaster<'_, P> {
    fn forecast(&self, prefixes: &[&Frames], episode: &EpisodeConfig) -> Result<Vec<Frames>> {
        forecast_batch(self.policy, prefixes, episode, self.precision)
    }
}

/// `[batch, pose_dim]` frames for trajectories of equal length.
pub fn frames_to_batch(trajectories: &[Frames]) -> Result<Vec<Tensor>> {
    let refs: Vec<&Frames> = trajectories.iter().collect();
    batch_frames(&refs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::rollout;
    use crate::nn::{policy_forward, PolicyConfig, Seq2SeqPolicy};
    use crate::rng::{stream, Stream};

    fn policy() -> Seq2SeqPolicy {
        Seq2SeqPolicy::new(PolicyConfig::new(3, 8), &mut stream(5, Stream::PolicyInit)).unwrap()
    }

    fn prefix(len: usize, offset: f64) -> Frames {
        Frames::new(
            3,
            (0..len * 3)
                .map(|v| ((v as f64) * 0.37 + offset).sin())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn matches_frame_by_frame_rollout() {
        let pol = policy();
        let ep = EpisodeConfig::new(6, 4, 2).unwrap();
        let pre = prefix(6, 0.0);
        let direct = rollout(
            |s| {
                let tape = Tape::new(Precision::Test);
                let p = pol.params().bind_frozen(&tape);
                let frames = constant_frames(&tape, &[s])?;
                let out = policy_forward(&pol, &p, &frames, ep.m)?;
                Ok(unbatch_frames(&values(&out))?.remove(0))
            },
            &pre,
            &ep,
        )
        .unwrap();
        let fast = forecast_batch(&pol, &[&pre], &ep, Precision::Test).unwrap();
        assert_eq!(fast[0], direct);
    }

    #[test]
    fn batch_rows_are_independent() {
        let pol = policy();
        let ep = EpisodeConfig::new(5, 6, 3).unwrap();
        let (a, b) = (prefix(5, 0.0), prefix(5, 1.0));
        let both = forecast_batch(&pol, &[&a, &b], &ep, Precision::Test).unwrap();
        let solo = forecast_batch(&pol, &[&b], &ep, Precision::Test).unwrap();
        assert_eq!(both[0].len(), 6);
        for (x, y) in both[1].data().iter().zip(solo[0].data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn agent_trajectory_keeps_prefix() {
        let pol = policy();
        let ep = EpisodeConfig::new(4, 4, 2).unwrap();
        let expert = frames_to_batch(&[prefix(8, 0.0), prefix(8, 2.0)]).unwrap();
        let agent = agent_trajectories(&pol, &expert, &ep, Precision::Test).unwrap();
        assert_eq!(agent.len(), 8);
        assert_eq!(&agent[..4], &expert[..4]);
        assert_ne!(agent[4], expert[4]);
    }

    #[test]
    fn wrong_prefix_length() {
        let pol = policy();
        let ep = EpisodeConfig::new(6, 4, 2).unwrap();
        assert!(forecast_batch(&pol, &[&prefix(5, 0.0)], &ep, Precision::Test).is_err());
    }
}
