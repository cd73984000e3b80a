use rand::Rng;

use crate::autodiff::{uniform_init, Precision, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Ordered, named parameter tensors. The order is the binding order used by
/// every network's forward pass.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

/// Name, shape and fan-in of one parameter tensor.
#[derive(Clone, Debug)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub fan_in: usize,
    /// Fill value overriding random init (e.g. an LSTM forget bias).
    pub fill: Option<f64>,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, shape: &[usize], fan_in: usize) -> Self {
        ParamSpec {
            name: name.into(),
            shape: shape.to_vec(),
            fan_in,
            fill: None,
        }
    }

    pub fn filled(mut self, v: f64) -> Self {
        self.fill = Some(v);
        self
    }
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn init<R: Rng + ?Sized>(specs: &[ParamSpec], rng: &mut R) -> Result<Self> {
        let mut set = ParamSet::new();
        for s in specs {
            let t = match s.fill {
                Some(v) => Tensor::full(&s.shape, v)?,
                None => uniform_init(&s.shape, s.fan_in, rng)?,
            };
            set.push(&s.name, t)?;
        }
        Ok(set)
    }

    pub fn zeros(specs: &[ParamSpec]) -> Result<Self> {
        let mut set = ParamSet::new();
        for s in specs {
            set.push(&s.name, Tensor::zeros(&s.shape)?)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, name: &str, t: Tensor) -> Result<()> {
        if self.names.iter().any(|n| n == name) {
            return Err(Error::invalid(format!("duplicate parameter {name}")));
        }
        self.names.push(name.to_string());
        self.tensors.push(t);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(move |i| &mut self.tensors[i])
    }

    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }

    /// Differentiable leaves, in order.
    pub fn bind(&self, tape: &Tape) -> Vec<Var> {
        self.tensors.iter().map(|t| tape.var(t.clone())).collect()
    }

    /// Constants, in order; nothing flows back into them.
    pub fn bind_frozen(&self, tape: &Tape) -> Vec<Var> {
        self.tensors
            .iter()
            .map(|t| tape.constant(t.clone()))
            .collect()
    }

    pub fn round_to(&mut self, precision: Precision) {
        for t in &mut self.tensors {
            t.round_to(precision);
        }
    }

    /// Checks names and shapes against a layout.
    pub fn conforms(&self, specs: &[ParamSpec]) -> Result<()> {
        if specs.len() != self.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                specs.len(),
                self.len()
            )));
        }
        for (s, (name, t)) in specs.iter().zip(self.iter()) {
            if s.name != name || s.shape != t.shape() {
                return Err(Error::Checkpoint(format!(
                    "expected {} {:?}, found {name} {:?}",
                    s.name,
                    s.shape,
                    t.shape()
                )));
            }
        }
        Ok(())
    }

    /// Entries whose name starts with `prefix`.
    pub fn with_prefix(&self, prefix: &str) -> ParamSet {
        let mut out = ParamSet::new();
        for (n, t) in self.iter() {
            if n.starts_with(prefix) {
                out.names.push(n.to_string());
                out.tensors.push(t.clone());
            }
        }
        out
    }

    pub fn merged(sets: &[&ParamSet]) -> Result<ParamSet> {
        let mut out = ParamSet::new();
        for s in sets {
            for (n, t) in s.iter() {
                out.push(n, t.clone())?;
            }
        }
        Ok(out)
    }
}
