//! Tiny models with closed-form behavior, shared by the integration tests.
#![allow(dead_code)]

use posegail::nn::{CriticModel, ParamSet, PolicyModel};
use posegail::{Result, Tape, Tensor, Var};

fn single(name: &str, v: f64) -> ParamSet {
    let mut p = ParamSet::new();
    p.push(name, Tensor::new(&[1, 1], vec![v]).unwrap())
        .unwrap();
    p
}

/// `a = theta * (last frame)`, repeated autoregressively for windows longer
/// than one frame.
pub struct ScalingPolicy {
    pub params: ParamSet,
    pub pose_dim: usize,
}

impl ScalingPolicy {
    pub fn new(theta: f64, pose_dim: usize) -> Self {
        ScalingPolicy {
            params: single("theta", theta),
            pose_dim,
        }
    }

    pub fn theta(&self) -> f64 {
        self.params.tensors()[0].data()[0]
    }
}

impl PolicyModel for ScalingPolicy {
    type Memory = Option<Var>;

    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn pose_dim(&self) -> usize {
        self.pose_dim
    }

    fn begin(&self, _tape: &Tape, _batch: usize) -> Result<Option<Var>> {
        Ok(None)
    }

    fn observe(&self, _p: &[Var], _memory: &Option<Var>, frame: &Var) -> Result<Option<Var>> {
        Ok(Some(frame.clone()))
    }

    fn act(
        &self,
        p: &[Var],
        memory: &Option<Var>,
        m: usize,
        _teacher: Option<&[Var]>,
    ) -> Result<Vec<Var>> {
        let mut x = memory.clone().expect("nonempty state");
        let shape = x.shape();
        let mut out = Vec::with_capacity(m);
        for _ in 0..m {
            x = x.mul(&p[0].broadcast_to(&shape)?)?;
            out.push(x.clone());
        }
        Ok(out)
    }
}

fn row_sums(frames: &[Var]) -> Result<Var> {
    let rows = frames[0].shape()[0];
    let mut total = frames[0].sum_to(&[rows, 1])?;
    for f in &frames[1..] {
        total = total.add(&f.sum_to(&[rows, 1])?)?;
    }
    Ok(total)
}

/// `D(s, a) = c * sum(a)`, optionally plus `c * sum(s)`.
pub struct LinearCritic {
    pub params: ParamSet,
    pub include_state: bool,
}

impl LinearCritic {
    pub fn action_only(c: f64) -> Self {
        LinearCritic {
            params: single("c", c),
            include_state: false,
        }
    }

    pub fn all_inputs(c: f64) -> Self {
        LinearCritic {
            params: single("c", c),
            include_state: true,
        }
    }
}

impl CriticModel for LinearCritic {
    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn score(&self, p: &[Var], state: &[Var], action: &[Var]) -> Result<Var> {
        let mut total = row_sums(action)?;
        if self.include_state {
            total = total.add(&row_sums(state)?)?;
        }
        let shape = total.shape();
        total.mul(&p[0].broadcast_to(&shape)?)
    }
}

/// `D(s, a) = b` for every pair.
pub struct ConstantCritic {
    pub params: ParamSet,
}

impl ConstantCritic {
    pub fn new(b: f64) -> Self {
        ConstantCritic {
            params: single("b", b),
        }
    }
}

impl CriticModel for ConstantCritic {
    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn score(&self, p: &[Var], state: &[Var], _action: &[Var]) -> Result<Var> {
        p[0].broadcast_to(&[state[0].shape()[0], 1])
    }
}

/// Bit patterns of every parameter value.
pub fn bits(params: &ParamSet) -> Vec<u64> {
    params
        .tensors()
        .iter()
        .flat_map(|t| t.data().iter().map(|v| v.to_bits()))
        .collect()
}
