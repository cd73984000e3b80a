//! Reverse-mode automatic differentiation with second-order support, plus Adam.

mod adam;
pub mod check;
mod tape;
mod tensor;

use rand::Rng;

pub use adam::{clip_global_norm, Adam, AdamConfig};
pub use tape::{apply_primitive, gradient, gradient_values, Primitive, Tape, Var};
pub use tensor::{Precision, Tensor};

use crate::error::Result;

/// Uniform draw in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
pub fn uniform_init<R: Rng + ?Sized>(
    shape: &[usize],
    fan_in: usize,
    rng: &mut R,
) -> Result<Tensor> {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-bound..=bound)).collect();
    Tensor::new(shape, data)
}
