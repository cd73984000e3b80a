//! GRU and LSTM cells and a dense layer, as functions over bound parameters.

use super::params::ParamSpec;
use crate::autodiff::Var;
use crate::error::{Error, Result};

fn check_cols(op: &'static str, v: &Var, cols: usize) -> Result<()> {
    let s = v.shape();
    if s.len() != 2 || s[1] != cols {
        return Err(Error::shape(
            op,
            format!("expected [batch, {cols}], got {s:?}"),
        ));
    }
    Ok(())
}

/// Gated recurrent unit:
///
/// ```text
/// z  = sigmoid(x Wz + h Uz + bz)
/// r  = sigmoid(x Wr + h Ur + br)
/// h~ = tanh(x Wh + (r * h) Uh + bh)
/// h' = (1 - z) * h + z * h~
/// ```
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GruCell {
    pub input_dim: usize,
    pub hidden: usize,
}

impl GruCell {
    pub const TENSORS: usize = 9;

    pub fn specs(&self, prefix: &str) -> Vec<ParamSpec> {
        let (i, h) = (self.input_dim, self.hidden);
        let mut specs = Vec::with_capacity(Self::TENSORS);
        for g in ["z", "r", "h"] {
            specs.push(ParamSpec::new(format!("{prefix}.w_{g}"), &[i, h], i));
        }
        for g in ["z", "r", "h"] {
            specs.push(ParamSpec::new(format!("{prefix}.u_{g}"), &[h, h], h));
        }
        for g in ["z", "r", "h"] {
            specs.push(ParamSpec::new(format!("{prefix}.b_{g}"), &[1, h], h));
        }
        specs
    }

    pub fn step(&self, p: &[Var], x: &Var, h: &Var) -> Result<Var> {
        if p.len() != Self::TENSORS {
            return Err(Error::shape(
                "gru_step",
                format!("{} parameter tensors", p.len()),
            ));
        }
        check_cols("gru_step", x, self.input_dim)?;
        check_cols("gru_step", h, self.hidden)?;
        let (w, u, b) = (&p[0..3], &p[3..6], &p[6..9]);
        let z = x
            .matmul(&w[0])?
            .add(&h.matmul(&u[0])?)?
            .add_bias(&b[0])?
            .sigmoid()?;
        let r = x
            .matmul(&w[1])?
            .add(&h.matmul(&u[1])?)?
            .add_bias(&b[1])?
            .sigmoid()?;
        let cand = x
            .matmul(&w[2])?
            .add(&r.mul(h)?.matmul(&u[2])?)?
            .add_bias(&b[2])?
            .tanh()?;
        z.one_minus()?.mul(h)?.add(&z.mul(&cand)?)
    }
}

/// Long short-term memory:
///
/// ```text
/// i = sigmoid(x Wi + h Ui + bi)    f = sigmoid(x Wf + h Uf + bf)
/// o = sigmoid(x Wo + h Uo + bo)    g = tanh(x Wg + h Ug + bg)
/// c' = f * c + i * g               h' = o * tanh(c')
/// ```
///
/// The forget bias starts at 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LstmCell {
    pub input_dim: usize,
    pub hidden: usize,
}

impl LstmCell {
    pub const TENSORS: usize = 12;
    const GATES: [&'static str; 4] = ["i", "f", "o", "g"];

    pub fn specs(&self, prefix: &str) -> Vec<ParamSpec> {
        let (i, h) = (self.input_dim, self.hidden);
        let mut specs = Vec::with_capacity(Self::TENSORS);
        for g in Self::GATES {
            specs.push(ParamSpec::new(format!("{prefix}.w_{g}"), &[i, h], i));
        }
        for g in Self::GATES {
            specs.push(ParamSpec::new(format!("{prefix}.u_{g}"), &[h, h], h));
        }
        for g in Self::GATES {
            let s = ParamSpec::new(format!("{prefix}.b_{g}"), &[1, h], h);
            specs.push(if g == "f" { s.filled(1.0) } else { s });
        }
        specs
    }

    pub fn step(&self, p: &[Var], x: &Var, h: &Var, c: &Var) -> Result<(Var, Var)> {
        if p.len() != Self::TENSORS {
            return Err(Error::shape(
                "lstm_step",
                format!("{} parameter tensors", p.len()),
            ));
        }
        check_cols("lstm_step", x, self.input_dim)?;
        check_cols("lstm_step", h, self.hidden)?;
        check_cols("lstm_step", c, self.hidden)?;
        let pre = |k: usize| -> Result<Var> {
            x.matmul(&p[k])?
                .add(&h.matmul(&p[4 + k])?)?
                .add_bias(&p[8 + k])
        };
        let i = pre(0)?.sigmoid()?;
        let f = pre(1)?.sigmoid()?;
        let o = pre(2)?.sigmoid()?;
        let g = pre(3)?.tanh()?;
        let c_next = f.mul(c)?.add(&i.mul(&g)?)?;
        let h_next = o.mul(&c_next.tanh()?)?;
        Ok((h_next, c_next))
    }
}

/// `x W + b` with `W: [in, out]`, `b: [1, out]`.
pub fn linear(x: &Var, w: &Var, b: &Var) -> Result<Var> {
    x.matmul(w)?.add_bias(b)
}

pub fn linear_specs(prefix: &str, input: usize, output: usize) -> Vec<ParamSpec> {
    vec![
        ParamSpec::new(format!("{prefix}.w"), &[input, output], input),
        ParamSpec::new(format!("{prefix}.b"), &[1, output], input),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{Precision, Tape, Tensor};
    use crate::nn::params::ParamSet;

    fn bound_zero(tape: &Tape, specs: &[ParamSpec]) -> Vec<Var> {
        ParamSet::zeros(specs).unwrap().bind(tape)
    }

    #[test]
    fn gru_zero_params_zero_state() {
        let tape = Tape::new(Precision::Test);
        let cell = GruCell {
            input_dim: 3,
            hidden: 4,
        };
        let p = bound_zero(&tape, &cell.specs("g"));
        let x = tape.constant(Tensor::row(&[0.3, -1.0, 2.0]).unwrap());
        let h = tape.constant(Tensor::zeros(&[1, 4]).unwrap());
        let h1 = cell.step(&p, &x, &h).unwrap();
        assert_eq!(h1.value().data(), &[0.0; 4]);
    }

    #[test]
    fn gru_zero_params_unit_state_halves() {
        // z = sigmoid(0) = 0.5, h~ = tanh(0) = 0, h' = 0.5 * 1 + 0.5 * 0
        let tape = Tape::new(Precision::Test);
        let cell = GruCell {
            input_dim: 2,
            hidden: 3,
        };
        let p = bound_zero(&tape, &cell.specs("g"));
        let x = tape.constant(Tensor::row(&[1.0, 1.0]).unwrap());
        let h = tape.constant(Tensor::ones(&[1, 3]).unwrap());
        let h1 = cell.step(&p, &x, &h).unwrap();
        assert_eq!(h1.value().data(), &[0.5; 3]);
        let again = cell.step(&p, &x, &h).unwrap();
        assert_eq!(h1.value(), again.value());
    }

    #[test]
    fn gru_rejects_wrong_dims() {
        let tape = Tape::new(Precision::Test);
        let cell = GruCell {
            input_dim: 2,
            hidden: 3,
        };
        let p = bound_zero(&tape, &cell.specs("g"));
        let x = tape.constant(Tensor::row(&[1.0, 1.0, 1.0]).unwrap());
        let h = tape.constant(Tensor::ones(&[1, 3]).unwrap());
        assert!(cell.step(&p, &x, &h).is_err());
        assert!(cell.step(&p[..8], &x, &h).is_err());
    }

    #[test]
    fn lstm_zero_everything() {
        let tape = Tape::new(Precision::Test);
        let cell = LstmCell {
            input_dim: 2,
            hidden: 3,
        };
        let p = bound_zero(&tape, &cell.specs("l"));
        let x = tape.constant(Tensor::row(&[0.7, -0.2]).unwrap());
        let z = tape.constant(Tensor::zeros(&[1, 3]).unwrap());
        let (h, c) = cell.step(&p, &x, &z, &z).unwrap();
        assert_eq!(h.value().data(), &[0.0; 3]);
        assert_eq!(c.value().data(), &[0.0; 3]);
    }

    #[test]
    fn lstm_forget_bias_only() {
        // c' = sigmoid(1) * 1 + sigmoid(0) * tanh(0) = sigmoid(1)
        // h' = sigmoid(0) * tanh(c')
        let tape = Tape::new(Precision::Test);
        let cell = LstmCell {
            input_dim: 2,
            hidden: 2,
        };
        let specs: Vec<ParamSpec> = cell
            .specs("l")
            .into_iter()
            .map(|s| if s.fill.is_some() { s } else { s.filled(0.0) })
            .collect();
        let mut rng = rand::thread_rng();
        let p = ParamSet::init(&specs, &mut rng).unwrap().bind(&tape);
        let x = tape.constant(Tensor::row(&[0.4, 0.9]).unwrap());
        let h = tape.constant(Tensor::zeros(&[1, 2]).unwrap());
        let c = tape.constant(Tensor::ones(&[1, 2]).unwrap());
        let (h1, c1) = cell.step(&p, &x, &h, &c).unwrap();
        let sig1 = 1.0 / (1.0 + (-1.0f64).exp());
        for &v in c1.value().data() {
            assert!((v - sig1).abs() < 1e-15);
        }
        for &v in h1.value().data() {
            assert!((v - 0.5 * sig1.tanh()).abs() < 1e-15);
        }
        let (h2, c2) = cell.step(&p, &x, &h, &c).unwrap();
        assert_eq!(h1.value(), h2.value());
        assert_eq!(c1.value(), c2.value());
    }
}
