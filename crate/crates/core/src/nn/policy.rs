use std::str::FromStr;

use rand::Rng;

use super::cells::{linear, linear_specs, GruCell};
use super::params::{ParamSet, ParamSpec};
use super::PolicyModel;
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// What the decoder reads after its first step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DecoderFeed {
    /// Its own previous output frame.
    #[default]
    Autoregressive,
    /// The true previous frame whenever one is supplied (behavioral cloning);
    /// its own output otherwise.
    GroundTruthDuringBc,
}

impl FromStr for DecoderFeed {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "autoregressive" => Ok(DecoderFeed::Autoregressive),
            "ground_truth_during_bc" => Ok(DecoderFeed::GroundTruthDuringBc),
            other => Err(Error::invalid(format!("unknown decoder_feed {other:?}"))),
        }
    }
}

impl DecoderFeed {
    pub fn name(self) -> &'static str {
        match self {
            DecoderFeed::Autoregressive => "autoregressive",
            DecoderFeed::GroundTruthDuringBc => "ground_truth_during_bc",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PolicyConfig {
    pub pose_dim: usize,
    pub hidden: usize,
    pub decoder_feed: DecoderFeed,
    /// Add the decoder input frame to the spatial decoder output.
    pub residual_output: bool,
}

impl PolicyConfig {
    pub fn new(pose_dim: usize, hidden: usize) -> Self {
        PolicyConfig {
            pose_dim,
            hidden,
            decoder_feed: DecoderFeed::Autoregressive,
            residual_output: false,
        }
    }
}

/// GRU encoder, separate GRU decoder and a linear spatial decoder `H -> pose_dim`.
///
/// The encoder reads the state from a zero hidden state. The decoder starts
/// from the encoder's last hidden state with the last state frame as input.
#[derive(Clone, Debug)]
pub struct Seq2SeqPolicy {
    config: PolicyConfig,
    params: ParamSet,
}

#[derive(Clone, Debug)]
pub struct GruMemory {
    pub hidden: Var,
    pub last: Option<Var>,
}

const ENC: std::ops::Range<usize> = 0..GruCell::TENSORS;
const DEC: std::ops::Range<usize> = GruCell::TENSORS..2 * GruCell::TENSORS;
const OUT_W: usize = 2 * GruCell::TENSORS;
const OUT_B: usize = OUT_W + 1;

impl Seq2SeqPolicy {
    pub fn specs(config: &PolicyConfig) -> Vec<ParamSpec> {
        let cell = GruCell {
            input_dim: config.pose_dim,
            hidden: config.hidden,
        };
        let mut specs = cell.specs("policy.encoder");
        specs.extend(cell.specs("policy.decoder"));
        specs.extend(linear_specs("policy.out", config.hidden, config.pose_dim));
        specs
    }

    fn check(config: &PolicyConfig) -> Result<()> {
        if config.pose_dim == 0 || config.hidden == 0 {
            return Err(Error::invalid(
                "policy pose_dim and hidden must be positive",
            ));
        }
        Ok(())
    }

    pub fn new<R: Rng + ?Sized>(config: PolicyConfig, rng: &mut R) -> Result<Self> {
        Self::check(&config)?;
        let params = ParamSet::init(&Self::specs(&config), rng)?;
        Ok(Seq2SeqPolicy { config, params })
    }

    pub fn zeros(config: PolicyConfig) -> Result<Self> {
        Self::check(&config)?;
        let params = ParamSet::zeros(&Self::specs(&config))?;
        Ok(Seq2SeqPolicy { config, params })
    }

    pub fn from_params(config: PolicyConfig, params: ParamSet) -> Result<Self> {
        Self::check(&config)?;
        params.conforms(&Self::specs(&config))?;
        Ok(Seq2SeqPolicy { config, params })
    }

    /// Rebuilds a policy from checkpointed tensors, reading sizes from their shapes.
    pub fn from_checkpoint(
        params: &ParamSet,
        decoder_feed: DecoderFeed,
        residual_output: bool,
    ) -> Result<Self> {
        let params = params.with_prefix("policy.");
        let w = params
            .get("policy.encoder.w_z")
            .ok_or_else(|| Error::Checkpoint("no policy tensors".into()))?;
        let config = PolicyConfig {
            pose_dim: w.shape()[0],
            hidden: w.shape()[1],
            decoder_feed,
            residual_output,
        };
        Self::from_params(config, params)
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    fn cell(&self) -> GruCell {
        GruCell {
            input_dim: self.config.pose_dim,
            hidden: self.config.hidden,
        }
    }
}

impl PolicyModel for Seq2SeqPolicy {
    type Memory = GruMemory;

    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn pose_dim(&self) -> usize {
        self.config.pose_dim
    }

    fn begin(&self, tape: &Tape, batch: usize) -> Result<GruMemory> {
        Ok(GruMemory {
            hidden: tape.constant(Tensor::zeros(&[batch, self.config.hidden])?),
            last: None,
        })
    }

    fn observe(&self, p: &[Var], memory: &GruMemory, frame: &Var) -> Result<GruMemory> {
        Ok(GruMemory {
            hidden: self.cell().step(&p[ENC], frame, &memory.hidden)?,
            last: Some(frame.clone()),
        })
    }

    fn act(
        &self,
        p: &[Var],
        memory: &GruMemory,
        m: usize,
        teacher: Option<&[Var]>,
    ) -> Result<Vec<Var>> {
        let mut input = memory
            .last
            .clone()
            .ok_or_else(|| Error::invalid("policy needs a nonempty state"))?;
        if m == 0 {
            return Err(Error::invalid("window length m must be positive"));
        }
        let teacher = match (self.config.decoder_feed, teacher) {
            (DecoderFeed::GroundTruthDuringBc, Some(t)) => {
                if t.len() != m {
                    return Err(Error::shape(
                        "policy act",
                        "teacher window length differs from m",
                    ));
                }
                Some(t)
            }
            _ => None,
        };
        let cell = self.cell();
        let mut h = memory.hidden.clone();
        let mut out = Vec::with_capacity(m);
        for k in 0..m {
            h = cell.step(&p[DEC], &input, &h)?;
            let mut y = linear(&h, &p[OUT_W], &p[OUT_B])?;
            if self.config.residual_output {
                y = y.add(&input)?;
            }
            input = match teacher {
                Some(t) => t[k].clone(),
                None => y.clone(),
            };
            out.push(y);
        }
        Ok(out)
    }
}
