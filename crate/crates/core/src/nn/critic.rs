use rand::Rng;

use super::cells::{linear, linear_specs, LstmCell};
use super::params::{ParamSet, ParamSpec};
use super::CriticModel;
use crate::autodiff::{Tensor, Var};
use crate::error::{Error, Result};

/// Output widths of the scoring MLP; the last layer is the scalar score.
pub const DEFAULT_CRITIC_WIDTHS: [usize; 7] = [512, 256, 128, 64, 32, 16, 1];

#[derive(Clone, Debug, PartialEq)]
pub struct CriticConfig {
    pub pose_dim: usize,
    pub hidden: usize,
    pub widths: Vec<usize>,
    pub leaky_slope: f64,
}

impl CriticConfig {
    pub fn new(pose_dim: usize, hidden: usize) -> Self {
        CriticConfig {
            pose_dim,
            hidden,
            widths: DEFAULT_CRITIC_WIDTHS.to_vec(),
            leaky_slope: 0.2,
        }
    }

    fn check(&self) -> Result<()> {
        if self.pose_dim == 0 || self.hidden == 0 {
            return Err(Error::invalid(
                "critic pose_dim and hidden must be positive",
            ));
        }
        if self.widths.is_empty() || self.widths.contains(&0) {
            return Err(Error::invalid(
                "critic widths must be nonempty and positive",
            ));
        }
        if *self.widths.last().unwrap() != 1 {
            return Err(Error::invalid("critic MLP must end in a width-1 layer"));
        }
        Ok(())
    }
}

/// Scores a (state, action) pair: an LSTM embeds the state, a second LSTM
/// embeds the action, and an MLP with leaky-ReLU between layers maps the
/// concatenated `2H` embedding to one real number.
#[derive(Clone, Debug)]
pub struct LstmCritic {
    config: CriticConfig,
    params: ParamSet,
}

impl LstmCritic {
    pub fn specs(config: &CriticConfig) -> Vec<ParamSpec> {
        let cell = LstmCell {
            input_dim: config.pose_dim,
            hidden: config.hidden,
        };
        let mut specs = cell.specs("critic.state");
        specs.extend(cell.specs("critic.action"));
        let mut width = 2 * config.hidden;
        for (k, &w) in config.widths.iter().enumerate() {
            specs.extend(linear_specs(&format!("critic.mlp{k}"), width, w));
            width = w;
        }
        specs
    }

    pub fn new<R: Rng + ?Sized>(config: CriticConfig, rng: &mut R) -> Result<Self> {
        config.check()?;
        let params = ParamSet::init(&Self::specs(&config), rng)?;
        Ok(LstmCritic { config, params })
    }

    pub fn zeros(config: CriticConfig) -> Result<Self> {
        config.check()?;
        let params = ParamSet::zeros(&Self::specs(&config))?;
        Ok(LstmCritic { config, params })
    }

    pub fn from_params(config: CriticConfig, params: ParamSet) -> Result<Self> {
        config.check()?;
        params.conforms(&Self::specs(&config))?;
        Ok(LstmCritic { config, params })
    }

    pub fn config(&self) -> &CriticConfig {
        &self.config
    }

    /// Final LSTM hidden state, from zero, of each sequence, stacked along rows
    /// in input order. Sequences that are prefixes of a longer input (the same
    /// graph nodes) are read off that sequence's run instead of being encoded
    /// again; every row equals a separate run.
    fn encode(&self, p: &[Var], seqs: &[&[Var]]) -> Result<Var> {
        if seqs.is_empty() || seqs.iter().any(|s| s.is_empty()) {
            return Err(Error::invalid("critic input must be nonempty"));
        }
        let rows: Vec<usize> = seqs.iter().map(|s| s[0].shape()[0]).collect();
        let mut by_len: Vec<usize> = (0..seqs.len()).collect();
        by_len.sort_by(|&a, &b| seqs[b].len().cmp(&seqs[a].len()));
        // hosts in decreasing length; owner[q] = host that has seq q as a prefix
        let mut hosts: Vec<usize> = Vec::new();
        let mut owner = vec![0; seqs.len()];
        for &q in &by_len {
            let found = hosts.iter().position(|&h| {
                rows[h] == rows[q]
                    && seqs[q]
                        .iter()
                        .zip(seqs[h].iter())
                        .all(|(a, b)| a.id() == b.id())
            });
            owner[q] = match found {
                Some(i) => i,
                None => {
                    hosts.push(q);
                    hosts.len() - 1
                }
            };
        }
        let offsets: Vec<usize> = hosts
            .iter()
            .scan(0, |acc, &h| {
                let o = *acc;
                *acc += rows[h];
                Some(o)
            })
            .collect();

        let cell = LstmCell {
            input_dim: self.config.pose_dim,
            hidden: self.config.hidden,
        };
        let tape = seqs[0][0].tape();
        let total: usize = hosts.iter().map(|&h| rows[h]).sum();
        let zero = Tensor::zeros(&[total, self.config.hidden])?;
        let mut h = tape.constant(zero.clone());
        let mut c = tape.constant(zero);
        let mut snapshots: Vec<Option<Var>> = vec![None; seqs.len()];
        let mut active_rows = total;
        let longest = seqs[hosts[0]].len();
        for tau in 0..longest {
            let active = hosts.iter().take_while(|&&h| seqs[h].len() > tau).count();
            let live_rows = offsets[active - 1] + rows[hosts[active - 1]];
            if live_rows < active_rows {
                h = h.slice(0, 0, live_rows)?;
                c = c.slice(0, 0, live_rows)?;
                active_rows = live_rows;
            }
            let x = if active == 1 {
                seqs[hosts[0]][tau].clone()
            } else {
                let parts: Vec<Var> = hosts[..active]
                    .iter()
                    .map(|&h| seqs[h][tau].clone())
                    .collect();
                Var::concat(&parts, 0)?
            };
            (h, c) = cell.step(p, &x, &h, &c)?;
            for q in 0..seqs.len() {
                if seqs[q].len() == tau + 1 {
                    let o = owner[q];
                    snapshots[q] = Some(if rows[q] == active_rows {
                        h.clone()
                    } else {
                        h.slice(0, offsets[o], rows[q])?
                    });
                }
            }
        }
        let mut out: Vec<Var> = snapshots
            .into_iter()
            .map(|s| s.expect("every sequence ends"))
            .collect();
        if out.len() == 1 {
            Ok(out.pop().expect("one sequence"))
        } else {
            Var::concat(&out, 0)
        }
    }
}

impl CriticModel for LstmCritic {
    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn score(&self, p: &[Var], state: &[Var], action: &[Var]) -> Result<Var> {
        self.score_many(p, &[(state, action)])
    }

    fn score_many(&self, p: &[Var], pairs: &[(&[Var], &[Var])]) -> Result<Var> {
        let n = LstmCell::TENSORS;
        let states: Vec<&[Var]> = pairs.iter().map(|(s, _)| *s).collect();
        let actions: Vec<&[Var]> = pairs.iter().map(|(_, a)| *a).collect();
        let hs = self.encode(&p[..n], &states)?;
        let ua = self.encode(&p[n..2 * n], &actions)?;
        let mut x = Var::concat(&[hs, ua], 1)?;
        let layers = self.config.widths.len();
        for k in 0..layers {
            let w = &p[2 * n + 2 * k];
            let b = &p[2 * n + 2 * k + 1];
            x = linear(&x, w, b)?;
            if k + 1 < layers {
                x = x.leaky_relu(self.config.leaky_slope)?;
            }
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{Precision, Tape};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn frames(tape: &Tape, len: usize, batch: usize, dim: usize, seed: u64) -> Vec<Var> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len)
            .map(|_| {
                let d = (0..batch * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                tape.var(Tensor::new(&[batch, dim], d).unwrap())
            })
            .collect()
    }

    #[test]
    fn zero_critic_scores_zero() {
        let tape = Tape::new(Precision::Test);
        let critic = LstmCritic::zeros(CriticConfig::new(3, 4)).unwrap();
        let p = critic.params().bind(&tape);
        let d = critic
            .score(&p, &frames(&tape, 5, 2, 3, 1), &frames(&tape, 2, 2, 3, 2))
            .unwrap();
        assert_eq!(d.value().data(), &[0.0, 0.0]);
    }

    #[test]
    fn full_size_output_is_scalar() {
        let tape = Tape::new(Precision::Test);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let critic = LstmCritic::new(CriticConfig::new(54, 1024), &mut rng).unwrap();
        let p = critic.params().bind_frozen(&tape);
        // first MLP layer reads the 2048-wide concatenated embedding
        assert_eq!(
            critic.params().get("critic.mlp0.w").unwrap().shape(),
            &[2048, 512]
        );
        let d = critic
            .score(
                &p,
                &frames(&tape, 50, 1, 54, 1),
                &frames(&tape, 5, 1, 54, 2),
            )
            .unwrap();
        assert_eq!(d.shape(), vec![1, 1]);
        let again = critic
            .score(
                &p,
                &frames(&tape, 50, 1, 54, 1),
                &frames(&tape, 5, 1, 54, 2),
            )
            .unwrap();
        assert_eq!(d.value(), again.value());
    }

    #[test]
    fn stacked_scoring_matches_separate_runs() {
        let tape = Tape::new(Precision::Test);
        let cfg = CriticConfig {
            widths: vec![8, 1],
            ..CriticConfig::new(3, 5)
        };
        let critic = LstmCritic::new(cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let p = critic.params().bind(&tape);
        let long = frames(&tape, 7, 2, 3, 1);
        let short = frames(&tape, 3, 2, 3, 2);
        let act = frames(&tape, 2, 2, 3, 3);
        let pairs: [(&[Var], &[Var]); 4] = [
            (&long[..4], &act[..1]),
            (&short, &act),
            (&long, &act[1..]),
            (&long[..2], &act),
        ];
        let stacked = critic.score_many(&p, &pairs).unwrap();
        let mut expected = Vec::new();
        for (s, a) in pairs {
            expected.extend_from_slice(critic.score(&p, s, a).unwrap().value().data());
        }
        assert_eq!(stacked.value().data(), &expected[..]);
    }

    #[test]
    fn layout_and_validation() {
        let cfg = CriticConfig::new(2, 3);
        let specs = LstmCritic::specs(&cfg);
        assert_eq!(specs.len(), 2 * LstmCell::TENSORS + 2 * 7);
        let bf = specs.iter().find(|s| s.name == "critic.state.b_f").unwrap();
        assert_eq!(bf.fill, Some(1.0));
        let mut bad = cfg.clone();
        bad.widths = vec![4, 2];
        assert!(LstmCritic::zeros(bad).is_err());
        let tape = Tape::new(Precision::Test);
        let critic = LstmCritic::zeros(cfg).unwrap();
        let p = critic.params().bind(&tape);
        assert!(critic.score(&p, &[], &frames(&tape, 1, 1, 2, 0)).is_err());
        assert!(critic
            .score(&p, &frames(&tape, 2, 1, 3, 0), &frames(&tape, 1, 1, 2, 0))
            .is_err());
    }
}
