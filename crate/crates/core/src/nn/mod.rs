//! Recurrent cells and the two networks: the seq2seq policy generator and the
//! state-action critic.

mod cells;
pub mod checkpoint;
mod critic;
mod params;
mod policy;

pub use cells::{linear, linear_specs, GruCell, LstmCell};
pub use critic::{CriticConfig, LstmCritic, DEFAULT_CRITIC_WIDTHS};
pub use params::{ParamSet, ParamSpec};
pub use policy::{DecoderFeed, PolicyConfig, Seq2SeqPolicy};

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::mdp::Frames;

/// A deterministic policy that reads a state frame by frame and emits a window.
///
/// `observe` folds one frame batch into the memory; `act` produces the next
/// `m` frames from it. Reading a state left to right and then acting is the
/// full forward pass; extending a state only needs the new frames.
pub trait PolicyModel {
    type Memory: Clone;

    fn params(&self) -> &ParamSet;
    fn params_mut(&mut self) -> &mut ParamSet;
    fn pose_dim(&self) -> usize;

    /// Memory for an empty state of `batch` sequences.
    fn begin(&self, tape: &Tape, batch: usize) -> Result<Self::Memory>;

    fn observe(&self, p: &[Var], memory: &Self::Memory, frame: &Var) -> Result<Self::Memory>;

    /// `teacher`, when given, holds the true window; a policy may feed it to
    /// its decoder instead of its own outputs.
    fn act(
        &self,
        p: &[Var],
        memory: &Self::Memory,
        m: usize,
        teacher: Option<&[Var]>,
    ) -> Result<Vec<Var>>;
}

/// Scores a batch of (state, action) pairs: `[batch, pose_dim]` frames in,
/// `[batch, 1]` out.
pub trait CriticModel {
    fn params(&self) -> &ParamSet;
    fn params_mut(&mut self) -> &mut ParamSet;
    fn score(&self, p: &[Var], state: &[Var], action: &[Var]) -> Result<Var>;

    /// Scores several pair batches at once, stacked along rows in order.
    fn score_many(&self, p: &[Var], pairs: &[(&[Var], &[Var])]) -> Result<Var> {
        let scores = pairs
            .iter()
            .map(|(s, a)| self.score(p, s, a))
            .collect::<Result<Vec<_>>>()?;
        Var::concat(&scores, 0)
    }
}

/// Full policy pass: encode every state frame, then act.
pub fn policy_forward<P: PolicyModel>(
    policy: &P,
    p: &[Var],
    state: &[Var],
    m: usize,
) -> Result<Vec<Var>> {
    let first = state.first().ok_or_else(|| Error::invalid("empty state"))?;
    if m == 0 {
        return Err(Error::invalid("window length m must be positive"));
    }
    let batch = first.shape()[0];
    let mut mem = policy.begin(first.tape(), batch)?;
    for f in state {
        mem = policy.observe(p, &mem, f)?;
    }
    policy.act(p, &mem, m, None)
}

/// One `[batch, pose_dim]` tensor per time step. All sequences must have the
/// same length and pose_dim.
pub fn batch_frames(seqs: &[&Frames]) -> Result<Vec<Tensor>> {
    let first = seqs.first().ok_or_else(|| Error::invalid("empty batch"))?;
    let (len, dim) = (first.len(), first.pose_dim());
    if seqs.iter().any(|s| s.len() != len || s.pose_dim() != dim) {
        return Err(Error::shape(
            "batch_frames",
            "sequences differ in length or pose_dim",
        ));
    }
    (0..len)
        .map(|i| {
            let mut data = Vec::with_capacity(seqs.len() * dim);
            for s in seqs {
                data.extend_from_slice(s.frame(i));
            }
            Tensor::new(&[seqs.len(), dim], data)
        })
        .collect()
}

pub fn constant_frames(tape: &Tape, seqs: &[&Frames]) -> Result<Vec<Var>> {
    Ok(batch_frames(seqs)?
        .into_iter()
        .map(|t| tape.constant(t))
        .collect())
}

/// Inverse of [`batch_frames`].
pub fn unbatch_frames(steps: &[Tensor]) -> Result<Vec<Frames>> {
    let first = steps.first().ok_or_else(|| Error::invalid("no frames"))?;
    let (batch, dim) = match first.shape() {
        [b, d] => (*b, *d),
        s => return Err(Error::shape("unbatch_frames", format!("{s:?}"))),
    };
    (0..batch)
        .map(|b| {
            let mut data = Vec::with_capacity(steps.len() * dim);
            for s in steps {
                if s.shape() != [batch, dim] {
                    return Err(Error::shape("unbatch_frames", "inconsistent frame shapes"));
                }
                data.extend_from_slice(&s.data()[b * dim..(b + 1) * dim]);
            }
            Frames::new(dim, data)
        })
        .collect()
}

pub fn values(vars: &[Var]) -> Vec<Tensor> {
    vars.iter().map(|v| (*v.value()).clone()).collect()
}
