//! Central finite differences against the tape's analytic gradients.

use super::tape::{gradient_values, Tape, Var};
use super::tensor::{Precision, Tensor};
use crate::error::Result;

/// Central-difference gradient of `f` with respect to every entry of every input.
pub fn numeric_gradient<F>(f: F, inputs: &[Tensor], step: f64) -> Result<Vec<Tensor>>
where
    F: Fn(&[Tensor]) -> Result<f64>,
{
    let mut work = inputs.to_vec();
    let mut grads = Vec::with_capacity(inputs.len());
    for i in 0..inputs.len() {
        let mut g = vec![0.0; inputs[i].numel()];
        for (j, gj) in g.iter_mut().enumerate() {
            let orig = work[i].data()[j];
            work[i].data_mut()[j] = orig + step;
            let up = f(&work)?;
            work[i].data_mut()[j] = orig - step;
            let down = f(&work)?;
            work[i].data_mut()[j] = orig;
            *gj = (up - down) / (2.0 * step);
        }
        grads.push(Tensor::new(inputs[i].shape(), g)?);
    }
    Ok(grads)
}

/// `|a - b| / max(|a|, |b|)` with every tensor flattened into one vector;
/// zero when both are zero.
pub fn relative_error(a: &[Tensor], b: &[Tensor]) -> f64 {
    let (mut diff, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        for (&u, &v) in x.data().iter().zip(y.data()) {
            diff += (u - v) * (u - v);
            na += u * u;
            nb += v * v;
        }
    }
    let scale = na.max(nb).sqrt();
    if scale == 0.0 {
        0.0
    } else {
        diff.sqrt() / scale
    }
}

/// Compares the tape gradient of the scalar built by `f` with central
/// differences at `inputs`, in 64-bit arithmetic. Returns the relative error.
pub fn check_gradient<F>(f: F, inputs: &[Tensor], step: f64) -> Result<f64>
where
    F: Fn(&[Var]) -> Result<Var>,
{
    let tape = Tape::new(Precision::Test);
    let vars: Vec<Var> = inputs.iter().map(|t| tape.var(t.clone())).collect();
    let analytic = gradient_values(&f(&vars)?, &vars)?;
    let numeric = numeric_gradient(
        |xs| {
            let tape = Tape::new(Precision::Test);
            tape.no_grad(|| {
                let vars: Vec<Var> = xs.iter().map(|t| tape.constant(t.clone())).collect();
                f(&vars)?.value().item()
            })
        },
        inputs,
        step,
    )?;
    Ok(relative_error(&analytic, &numeric))
}
