//! Progressive prediction as a deterministic MDP.
//!
//! A trajectory of `t + l` frames is split into `K` steps of `m` frames each.
//! At step `i` (1-based) the state is the first `t + (i-1)m` frames and the
//! action is the next `m`. Taking an action appends it to the state.

use crate::error::{Error, Result};

/// A sequence of pose frames stored contiguously, `pose_dim` values per frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Frames {
    pose_dim: usize,
    data: Vec<f64>,
}

pub type Trajectory = Frames;
pub type State = Frames;
pub type Action = Frames;

impl Frames {
    pub fn new(pose_dim: usize, data: Vec<f64>) -> Result<Self> {
        if pose_dim == 0 {
            return Err(Error::invalid("pose_dim must be positive"));
        }
        if !data.len().is_multiple_of(pose_dim) {
            return Err(Error::shape(
                "Frames::new",
                format!(
                    "{} values is not a multiple of pose_dim {pose_dim}",
                    data.len()
                ),
            ));
        }
        Ok(Frames { pose_dim, data })
    }

    pub fn empty(pose_dim: usize) -> Result<Self> {
        Self::new(pose_dim, Vec::new())
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::invalid("no frames"))?;
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::shape(
                "Frames::from_rows",
                "frames differ in pose_dim",
            ));
        }
        Self::new(dim, rows.concat())
    }

    pub fn pose_dim(&self) -> usize {
        self.pose_dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.pose_dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        &self.data[i * self.pose_dim..(i + 1) * self.pose_dim]
    }

    pub fn iter(&self) -> std::slice::Chunks<'_, f64> {
        self.data.chunks(self.pose_dim)
    }

    pub fn last(&self) -> Option<&[f64]> {
        (!self.is_empty()).then(|| self.frame(self.len() - 1))
    }

    /// Frames `[start, start + len)`.
    pub fn window(&self, start: usize, len: usize) -> Result<Frames> {
        if start + len > self.len() {
            return Err(Error::shape(
                "Frames::window",
                format!("[{start}, {}) of {} frames", start + len, self.len()),
            ));
        }
        Ok(Frames {
            pose_dim: self.pose_dim,
            data: self.data[start * self.pose_dim..(start + len) * self.pose_dim].to_vec(),
        })
    }

    /// `self` followed by `other`, as a new value.
    pub fn concat(&self, other: &Frames) -> Result<Frames> {
        if self.pose_dim != other.pose_dim {
            return Err(Error::shape(
                "Frames::concat",
                format!("pose_dim {} vs {}", self.pose_dim, other.pose_dim),
            ));
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(Frames {
            pose_dim: self.pose_dim,
            data,
        })
    }

    /// The last frame repeated `n` times.
    pub fn repeat_last(&self, n: usize) -> Result<Frames> {
        let last = self
            .last()
            .ok_or_else(|| Error::invalid("empty frame sequence"))?;
        Ok(Frames {
            pose_dim: self.pose_dim,
            data: last.repeat(n),
        })
    }

    /// Elementwise `a * self + (1 - a) * other`.
    pub fn lerp(&self, other: &Frames, a: f64) -> Result<Frames> {
        if self.pose_dim != other.pose_dim || self.data.len() != other.data.len() {
            return Err(Error::shape(
                "Frames::lerp",
                format!(
                    "{}x{} vs {}x{}",
                    self.len(),
                    self.pose_dim,
                    other.len(),
                    other.pose_dim
                ),
            ));
        }
        Ok(Frames {
            pose_dim: self.pose_dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| a * x + (1.0 - a) * y)
                .collect(),
        })
    }
}

/// Episode geometry: observed prefix `t`, horizon `l = k * m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EpisodeConfig {
    pub t: usize,
    pub l: usize,
    pub m: usize,
    pub k: usize,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            t: 50,
            l: 25,
            m: 5,
            k: 5,
        }
    }
}

impl EpisodeConfig {
    /// Validated config with `m = l / k`.
    pub fn new(t: usize, l: usize, k: usize) -> Result<Self> {
        if k == 0 || l == 0 || !l.is_multiple_of(k) {
            return Err(Error::invalid(format!(
                "l = {l} is not divisible by K = {k}"
            )));
        }
        let cfg = EpisodeConfig { t, l, m: l / k, k };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t == 0 || self.m == 0 || self.k == 0 {
            return Err(Error::invalid(format!(
                "t, m, K must be positive: {self:?}"
            )));
        }
        if self.l != self.k * self.m {
            return Err(Error::invalid(format!(
                "l = {} must equal K * m = {} * {}",
                self.l, self.k, self.m
            )));
        }
        Ok(())
    }

    pub fn span(&self) -> usize {
        self.t + self.l
    }

    /// State length at step `i` (1-based).
    pub fn state_len(&self, i: usize) -> usize {
        self.t + (i - 1) * self.m
    }
}

/// Splits a `t + l` trajectory into the K (state, action) pairs.
pub fn decompose(traj: &Trajectory, cfg: &EpisodeConfig) -> Result<Vec<(State, Action)>> {
    cfg.validate()?;
    if traj.len() != cfg.span() {
        return Err(Error::shape(
            "decompose",
            format!(
                "trajectory has {} frames, expected t + l = {}",
                traj.len(),
                cfg.span()
            ),
        ));
    }
    (1..=cfg.k)
        .map(|i| {
            let s = cfg.state_len(i);
            Ok((traj.window(0, s)?, traj.window(s, cfg.m)?))
        })
        .collect()
}

/// Inverse of [`decompose`]: the first state followed by every action.
pub fn recompose(pairs: &[(State, Action)]) -> Result<Trajectory> {
    let (first, _) = pairs.first().ok_or_else(|| Error::invalid("no pairs"))?;
    pairs
        .iter()
        .try_fold(first.clone(), |acc, (_, a)| acc.concat(a))
}

/// The deterministic transition: append the action to the state.
pub fn transition(state: &State, action: &Action) -> Result<State> {
    if action.is_empty() {
        return Err(Error::invalid("action must contain at least one frame"));
    }
    state.concat(action)
}

/// Runs `policy` K times from `prefix`, feeding every predicted window back
/// into the state, and returns the `l` predicted frames.
pub fn rollout<F>(mut policy: F, prefix: &Frames, cfg: &EpisodeConfig) -> Result<Frames>
where
    F: FnMut(&State) -> Result<Action>,
{
    cfg.validate()?;
    if prefix.len() != cfg.t {
        return Err(Error::shape(
            "rollout",
            format!("prefix has {} frames, expected t = {}", prefix.len(), cfg.t),
        ));
    }
    let mut state = prefix.clone();
    let mut predicted = Frames::empty(prefix.pose_dim())?;
    for _ in 0..cfg.k {
        let action = policy(&state)?;
        if action.len() != cfg.m || action.pose_dim() != prefix.pose_dim() {
            return Err(Error::shape(
                "rollout",
                format!(
                    "policy returned {}x{} frames, expected {}x{}",
                    action.len(),
                    action.pose_dim(),
                    cfg.m,
                    prefix.pose_dim()
                ),
            ));
        }
        predicted = predicted.concat(&action)?;
        state = transition(&state, &action)?;
    }
    Ok(predicted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Frame `x_k` (1-based) is the single value `k`.
    fn numbered(n: usize) -> Frames {
        Frames::new(1, (1..=n).map(|k| k as f64).collect()).unwrap()
    }

    fn ids(f: &Frames) -> Vec<usize> {
        f.data().iter().map(|&v| v as usize).collect()
    }

    #[test]
    fn worked_example_t3_l8_m2() {
        let cfg = EpisodeConfig::new(3, 8, 4).unwrap();
        assert_eq!(cfg.m, 2);
        let pairs = decompose(&numbered(11), &cfg).unwrap();
        let got: Vec<(Vec<usize>, Vec<usize>)> =
            pairs.iter().map(|(s, a)| (ids(s), ids(a))).collect();
        assert_eq!(
            got,
            vec![
                (vec![1, 2, 3], vec![4, 5]),
                (vec![1, 2, 3, 4, 5], vec![6, 7]),
                (vec![1, 2, 3, 4, 5, 6, 7], vec![8, 9]),
                (vec![1, 2, 3, 4, 5, 6, 7, 8, 9], vec![10, 11]),
            ]
        );
    }

    #[test]
    fn single_step_split() {
        let cfg = EpisodeConfig::new(3, 4, 1).unwrap();
        let pairs = decompose(&numbered(7), &cfg).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(ids(&pairs[0].0), vec![1, 2, 3]);
        assert_eq!(ids(&pairs[0].1), vec![4, 5, 6, 7]);
    }

    #[test]
    fn bad_geometry_rejected() {
        assert!(EpisodeConfig::new(3, 7, 2).is_err());
        let cfg = EpisodeConfig::new(3, 8, 4).unwrap();
        assert!(decompose(&numbered(10), &cfg).is_err());
        let bad = EpisodeConfig {
            t: 3,
            l: 8,
            m: 3,
            k: 4,
        };
        assert!(decompose(&numbered(11), &bad).is_err());
    }

    #[test]
    fn transition_appends() {
        let s = numbered(3);
        let a = Frames::new(1, vec![4.0, 5.0]).unwrap();
        let next = transition(&s, &a).unwrap();
        assert_eq!(ids(&next), vec![1, 2, 3, 4, 5]);
        // inputs untouched
        assert_eq!(ids(&s), vec![1, 2, 3]);
        let a2 = Frames::new(1, vec![6.0]).unwrap();
        assert_eq!(
            transition(&next, &a2).unwrap(),
            s.concat(&a).unwrap().concat(&a2).unwrap()
        );
        assert!(transition(&s, &Frames::empty(1).unwrap()).is_err());
        assert!(transition(&s, &Frames::new(2, vec![0.0, 0.0]).unwrap()).is_err());
    }

    #[test]
    fn constant_policy_rollout_is_zero_velocity() {
        let cfg = EpisodeConfig::new(3, 6, 3).unwrap();
        let prefix = Frames::new(2, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let out = rollout(|s| s.repeat_last(cfg.m), &prefix, &cfg).unwrap();
        assert_eq!(out.len(), 6);
        assert!(out.iter().all(|f| f == [4.0, 5.0]));
    }

    #[test]
    fn single_step_rollout_is_one_call() {
        let cfg = EpisodeConfig::new(2, 3, 1).unwrap();
        let prefix = numbered(2);
        let mut calls = 0;
        let out = rollout(
            |s| {
                calls += 1;
                Frames::new(1, vec![s.len() as f64; 3])
            },
            &prefix,
            &cfg,
        )
        .unwrap();
        assert_eq!(calls, 1);
        assert_eq!(out.data(), &[2.0, 2.0, 2.0]);
    }

    #[test]
    fn rollout_rejects_wrong_window() {
        let cfg = EpisodeConfig::new(2, 4, 2).unwrap();
        let r = rollout(|s| s.repeat_last(3), &numbered(2), &cfg);
        assert!(r.is_err());
        assert!(rollout(|s| s.repeat_last(2), &numbered(3), &cfg).is_err());
    }

    proptest! {
        #[test]
        fn decompose_partitions(t in 1usize..6, k in 1usize..5, m in 1usize..4, dim in 1usize..4, seed in any::<u64>()) {
            let cfg = EpisodeConfig { t, l: k * m, m, k };
            let n = cfg.span() * dim;
            let data: Vec<f64> = (0..n).map(|i| ((seed.wrapping_add(i as u64)) % 1000) as f64 * 0.37).collect();
            let traj = Frames::new(dim, data).unwrap();
            let pairs = decompose(&traj, &cfg).unwrap();
            prop_assert_eq!(pairs.len(), k);
            for (i, (s, a)) in pairs.iter().enumerate() {
                prop_assert_eq!(s.len(), cfg.state_len(i + 1));
                prop_assert_eq!(a.len(), m);
            }
            prop_assert_eq!(recompose(&pairs).unwrap(), traj);
        }

        #[test]
        fn rollout_state_lengths(t in 1usize..6, k in 1usize..5, m in 1usize..4) {
            let cfg = EpisodeConfig { t, l: k * m, m, k };
            let mut seen = Vec::new();
            let out = rollout(|s| { seen.push(s.len()); s.repeat_last(m) }, &numbered(t), &cfg).unwrap();
            prop_assert_eq!(out.len(), cfg.l);
            let expected: Vec<usize> = (1..=k).map(|i| cfg.state_len(i)).collect();
            prop_assert_eq!(seen, expected);
        }
    }
}
