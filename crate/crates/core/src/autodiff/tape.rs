//! Dynamic reverse-mode tape.
//!
//! Every backward rule is written in terms of the same primitives the forward
//! pass uses, so the adjoints returned by [`gradient`] are ordinary graph
//! nodes and can be differentiated again.

use std::cell::RefCell;
use std::rc::Rc;

use super::tensor::{Precision, Tensor};
use crate::error::{Error, Result};

/// Differentiable primitive operations.
#[derive(Clone, Debug, PartialEq)]
pub enum Primitive {
    Add,
    Sub,
    Mul,
    /// Multiply by a constant.
    Scale(f64),
    /// Add a constant to every entry.
    AddScalar(f64),
    MatMul,
    Transpose,
    Sigmoid,
    Tanh,
    LeakyRelu(f64),
    Concat {
        axis: usize,
    },
    Slice {
        axis: usize,
        start: usize,
        len: usize,
    },
    /// Sum of all entries; keeps the rank with every extent 1.
    Sum,
    SumTo(Vec<usize>),
    BroadcastTo(Vec<usize>),
    /// `|x|^p` elementwise.
    PowAbs(f64),
    /// `1/x`, with `1/0` defined as 0.
    Recip,
    /// Euclidean norm over one axis (kept with extent 1) or over everything.
    L2Norm(Option<usize>),
}

impl Primitive {
    fn name(&self) -> &'static str {
        match self {
            Primitive::Add => "add",
            Primitive::Sub => "sub",
            Primitive::Mul => "mul",
            Primitive::Scale(_) => "scale",
            Primitive::AddScalar(_) => "add_scalar",
            Primitive::MatMul => "matmul",
            Primitive::Transpose => "transpose",
            Primitive::Sigmoid => "sigmoid",
            Primitive::Tanh => "tanh",
            Primitive::LeakyRelu(_) => "leaky_relu",
            Primitive::Concat { .. } => "concat",
            Primitive::Slice { .. } => "slice",
            Primitive::Sum => "sum",
            Primitive::SumTo(_) => "sum_to",
            Primitive::BroadcastTo(_) => "broadcast_to",
            Primitive::PowAbs(_) => "pow_abs",
            Primitive::Recip => "recip",
            Primitive::L2Norm(_) => "l2_norm",
        }
    }

    fn arity(&self) -> Option<usize> {
        match self {
            Primitive::Add | Primitive::Sub | Primitive::Mul | Primitive::MatMul => Some(2),
            Primitive::Concat { .. } => None,
            _ => Some(1),
        }
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Const,
    Prim(Primitive),
}

struct Node {
    op: Op,
    parents: Vec<usize>,
    value: Rc<Tensor>,
    requires_grad: bool,
}

struct TapeInner {
    nodes: Vec<Node>,
    precision: Precision,
    recording: bool,
}

/// An append-only computation graph. Cloning yields another handle to the
/// same tape.
#[derive(Clone)]
pub struct Tape(Rc<RefCell<TapeInner>>);

/// Handle to one node of a [`Tape`].
#[derive(Clone)]
pub struct Var {
    tape: Tape,
    id: usize,
}

impl Tape {
    pub fn new(precision: Precision) -> Self {
        Tape(Rc::new(RefCell::new(TapeInner {
            nodes: Vec::new(),
            precision,
            recording: true,
        })))
    }

    pub fn precision(&self) -> Precision {
        self.0.borrow().precision
    }

    pub fn len(&self) -> usize {
        self.0.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn same(&self, other: &Tape) -> bool {
        Rc::ptr_eq(&self.0, &other.0)
    }

    fn push_node(
        &self,
        op: Op,
        parents: Vec<usize>,
        mut value: Tensor,
        requires_grad: bool,
    ) -> Var {
        let mut inner = self.0.borrow_mut();
        value.round_to(inner.precision);
        let (op, parents) = if requires_grad && inner.recording {
            (op, parents)
        } else {
            (Op::Const, Vec::new())
        };
        let requires_grad = matches!(op, Op::Leaf | Op::Prim(_));
        inner.nodes.push(Node {
            op,
            parents,
            value: Rc::new(value),
            requires_grad,
        });
        Var {
            tape: self.clone(),
            id: inner.nodes.len() - 1,
        }
    }

    /// A differentiable input.
    pub fn var(&self, value: Tensor) -> Var {
        self.push_node(Op::Leaf, Vec::new(), value, true)
    }

    /// A constant: gradients never flow into it.
    pub fn constant(&self, value: Tensor) -> Var {
        self.push_node(Op::Const, Vec::new(), value, false)
    }

    /// Runs `f` with recording switched off; every node it creates is a constant.
    pub fn no_grad<T>(&self, f: impl FnOnce() -> T) -> T {
        let prev = std::mem::replace(&mut self.0.borrow_mut().recording, false);
        let out = f();
        self.0.borrow_mut().recording = prev;
        out
    }

    fn value(&self, id: usize) -> Rc<Tensor> {
        self.0.borrow().nodes[id].value.clone()
    }
}

impl Var {
    pub fn tape(&self) -> &Tape {
        &self.tape
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn value(&self) -> Rc<Tensor> {
        self.tape.value(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value().shape().to_vec()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.0.borrow().nodes[self.id].requires_grad
    }

    /// Same value, cut from the graph.
    pub fn detach(&self) -> Var {
        self.tape.constant((*self.value()).clone())
    }

    pub fn add(&self, other: &Var) -> Result<Var> {
        apply_primitive(Primitive::Add, &[self, other])
    }

    pub fn sub(&self, other: &Var) -> Result<Var> {
        apply_primitive(Primitive::Sub, &[self, other])
    }

    pub fn mul(&self, other: &Var) -> Result<Var> {
        apply_primitive(Primitive::Mul, &[self, other])
    }

    pub fn scale(&self, c: f64) -> Result<Var> {
        apply_primitive(Primitive::Scale(c), &[self])
    }

    pub fn neg(&self) -> Result<Var> {
        self.scale(-1.0)
    }

    pub fn add_scalar(&self, c: f64) -> Result<Var> {
        apply_primitive(Primitive::AddScalar(c), &[self])
    }

    /// `1 - x`.
    pub fn one_minus(&self) -> Result<Var> {
        self.scale(-1.0)?.add_scalar(1.0)
    }

    pub fn matmul(&self, other: &Var) -> Result<Var> {
        apply_primitive(Primitive::MatMul, &[self, other])
    }

    pub fn t(&self) -> Result<Var> {
        apply_primitive(Primitive::Transpose, &[self])
    }

    pub fn sigmoid(&self) -> Result<Var> {
        apply_primitive(Primitive::Sigmoid, &[self])
    }

    pub fn tanh(&self) -> Result<Var> {
        apply_primitive(Primitive::Tanh, &[self])
    }

    pub fn leaky_relu(&self, slope: f64) -> Result<Var> {
        apply_primitive(Primitive::LeakyRelu(slope), &[self])
    }

    pub fn slice(&self, axis: usize, start: usize, len: usize) -> Result<Var> {
        apply_primitive(Primitive::Slice { axis, start, len }, &[self])
    }

    pub fn sum(&self) -> Result<Var> {
        apply_primitive(Primitive::Sum, &[self])
    }

    pub fn sum_to(&self, shape: &[usize]) -> Result<Var> {
        apply_primitive(Primitive::SumTo(shape.to_vec()), &[self])
    }

    pub fn broadcast_to(&self, shape: &[usize]) -> Result<Var> {
        apply_primitive(Primitive::BroadcastTo(shape.to_vec()), &[self])
    }

    pub fn pow_abs(&self, p: f64) -> Result<Var> {
        apply_primitive(Primitive::PowAbs(p), &[self])
    }

    pub fn recip(&self) -> Result<Var> {
        apply_primitive(Primitive::Recip, &[self])
    }

    pub fn l2_norm(&self, axis: Option<usize>) -> Result<Var> {
        apply_primitive(Primitive::L2Norm(axis), &[self])
    }

    /// Mean of all entries, as a one-element tensor.
    pub fn mean(&self) -> Result<Var> {
        let n = self.value().numel() as f64;
        self.sum()?.scale(1.0 / n)
    }

    /// `self + bias`, broadcasting a `[1, n]` bias over rows.
    pub fn add_bias(&self, bias: &Var) -> Result<Var> {
        let b = bias.broadcast_to(&self.shape())?;
        self.add(&b)
    }

    pub fn concat(parts: &[Var], axis: usize) -> Result<Var> {
        let refs: Vec<&Var> = parts.iter().collect();
        apply_primitive(Primitive::Concat { axis }, &refs)
    }
}

impl std::fmt::Debug for Var {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{} {:?}", self.id, self.value())
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn forward(kind: &Primitive, xs: &[Rc<Tensor>]) -> Result<Tensor> {
    let name = kind.name();
    let x = &xs[0];
    Ok(match kind {
        Primitive::Add => x.zip_map(&xs[1], name, |a, b| a + b)?,
        Primitive::Sub => x.zip_map(&xs[1], name, |a, b| a - b)?,
        Primitive::Mul => x.zip_map(&xs[1], name, |a, b| a * b)?,
        Primitive::Scale(c) => x.map(|v| v * c),
        Primitive::AddScalar(c) => x.map(|v| v + c),
        Primitive::MatMul => x.matmul(&xs[1])?,
        Primitive::Transpose => x.transpose()?,
        Primitive::Sigmoid => x.map(sigmoid),
        Primitive::Tanh => x.map(f64::tanh),
        Primitive::LeakyRelu(s) => x.map(|v| if v >= 0.0 { v } else { s * v }),
        Primitive::Concat { axis } => {
            let refs: Vec<&Tensor> = xs.iter().map(|t| t.as_ref()).collect();
            Tensor::concat(&refs, *axis)?
        }
        Primitive::Slice { axis, start, len } => x.slice(*axis, *start, *len)?,
        Primitive::Sum => Tensor::from_parts(vec![1; x.rank()], vec![x.sum()]),
        Primitive::SumTo(shape) => x.sum_to(shape)?,
        Primitive::BroadcastTo(shape) => x.broadcast_to(shape)?,
        Primitive::PowAbs(p) => {
            if !p.is_finite() {
                return Err(Error::Domain {
                    op: name,
                    detail: format!("exponent {p}"),
                });
            }
            x.map(|v| v.abs().powf(*p))
        }
        Primitive::Recip => x.map(|v| if v == 0.0 { 0.0 } else { 1.0 / v }),
        Primitive::L2Norm(axis) => x.l2_norm(*axis)?,
    })
}

/// Applies one primitive and records it on the inputs' tape.
pub fn apply_primitive(kind: Primitive, inputs: &[&Var]) -> Result<Var> {
    let first = inputs
        .first()
        .ok_or_else(|| Error::shape(kind.name(), "no inputs"))?;
    if let Some(n) = kind.arity() {
        if inputs.len() != n {
            return Err(Error::shape(
                kind.name(),
                format!("expected {n} inputs, got {}", inputs.len()),
            ));
        }
    }
    let tape = first.tape.clone();
    if inputs.iter().any(|v| !v.tape.same(&tape)) {
        return Err(Error::NotInGraph);
    }
    let (values, requires_grad) = {
        let inner = tape.0.borrow();
        let values: Vec<Rc<Tensor>> = inputs
            .iter()
            .map(|v| inner.nodes[v.id].value.clone())
            .collect();
        let rg = inputs.iter().any(|v| inner.nodes[v.id].requires_grad);
        (values, rg)
    };
    let out = forward(&kind, &values)?;
    if !out.is_finite() {
        return Err(Error::NonFinite(kind.name()));
    }
    let parents = inputs.iter().map(|v| v.id).collect();
    Ok(tape.push_node(Op::Prim(kind), parents, out, requires_grad))
}

/// Adjoints of each parent given the adjoint `g` of the output.
fn backward(kind: &Primitive, parents: &[Var], out: &Var, g: &Var) -> Result<Vec<Option<Var>>> {
    let tape = out.tape();
    let one = |v: Var| Ok(vec![Some(v)]);
    match kind {
        Primitive::Add => Ok(vec![Some(g.clone()), Some(g.clone())]),
        Primitive::Sub => Ok(vec![Some(g.clone()), Some(g.neg()?)]),
        Primitive::Mul => Ok(vec![Some(g.mul(&parents[1])?), Some(g.mul(&parents[0])?)]),
        Primitive::Scale(c) => one(g.scale(*c)?),
        Primitive::AddScalar(_) => one(g.clone()),
        Primitive::MatMul => {
            let ga = g.matmul(&parents[1].t()?)?;
            let gb = parents[0].t()?.matmul(g)?;
            Ok(vec![Some(ga), Some(gb)])
        }
        Primitive::Transpose => one(g.t()?),
        Primitive::Sigmoid => {
            // y(1 - y)
            let d = out.sub(&out.mul(out)?)?;
            one(g.mul(&d)?)
        }
        Primitive::Tanh => {
            let d = out.mul(out)?.one_minus()?;
            one(g.mul(&d)?)
        }
        Primitive::LeakyRelu(s) => {
            let mask = parents[0].value().map(|v| if v >= 0.0 { 1.0 } else { *s });
            one(g.mul(&tape.constant(mask))?)
        }
        Primitive::Concat { axis } => {
            let mut start = 0;
            let mut grads = Vec::with_capacity(parents.len());
            for p in parents {
                let len = p.value().shape()[*axis];
                grads.push(Some(g.slice(*axis, start, len)?));
                start += len;
            }
            Ok(grads)
        }
        Primitive::Slice { axis, start, len } => {
            let full = parents[0].shape();
            let mut pieces = Vec::with_capacity(3);
            if *start > 0 {
                let mut s = full.clone();
                s[*axis] = *start;
                pieces.push(tape.constant(Tensor::zeros(&s)?));
            }
            pieces.push(g.clone());
            let after = full[*axis] - start - len;
            if after > 0 {
                let mut s = full.clone();
                s[*axis] = after;
                pieces.push(tape.constant(Tensor::zeros(&s)?));
            }
            if pieces.len() == 1 {
                one(g.clone())
            } else {
                one(Var::concat(&pieces, *axis)?)
            }
        }
        Primitive::Sum | Primitive::SumTo(_) => one(g.broadcast_to(&parents[0].shape())?),
        Primitive::BroadcastTo(_) => one(g.sum_to(&parents[0].shape())?),
        Primitive::PowAbs(p) => {
            let x = &parents[0];
            let sign = tape.constant(x.value().map(|v| {
                if v > 0.0 {
                    1.0
                } else if v < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }));
            let q = p - 1.0;
            let d = if q == 0.0 {
                sign
            } else {
                x.pow_abs(q)?.mul(&sign)?
            };
            one(g.mul(&d)?.scale(*p)?)
        }
        Primitive::Recip => {
            // d(1/x) = -1/x^2; zero where the forward value was defined as zero
            let d = out.mul(out)?.neg()?;
            one(g.mul(&d)?)
        }
        Primitive::L2Norm(_) => {
            let x = &parents[0];
            let scaled = g.mul(&out.recip()?)?;
            one(x.mul(&scaled.broadcast_to(&x.shape())?)?)
        }
    }
}

/// Derivative of a scalar `output` with respect to each of `wrt`.
///
/// The returned adjoints live on the same tape and stay differentiable.
/// A `wrt` tensor the output does not depend on gets a zero adjoint.
pub fn gradient(output: &Var, wrt: &[Var]) -> Result<Vec<Var>> {
    let tape = output.tape().clone();
    if wrt.iter().any(|w| !w.tape.same(&tape)) {
        return Err(Error::NotInGraph);
    }
    let out_value = output.value();
    if out_value.numel() != 1 {
        return Err(Error::NonScalarOutput(out_value.shape().to_vec()));
    }
    let n = output.id + 1;

    // Nodes on some path from a wrt tensor to the output.
    let live = {
        let inner = tape.0.borrow();
        let mut reach = vec![false; n];
        for w in wrt {
            if w.id < n {
                reach[w.id] = true;
            }
        }
        let lowest = wrt.iter().map(|w| w.id).min().unwrap_or(n);
        for id in lowest..n {
            if !reach[id] {
                reach[id] = inner.nodes[id].parents.iter().any(|&p| reach[p]);
            }
        }
        let mut live = vec![false; n];
        live[output.id] = reach[output.id];
        for id in (0..n).rev() {
            if live[id] {
                for &p in &inner.nodes[id].parents {
                    if reach[p] {
                        live[p] = true;
                    }
                }
            }
        }
        live
    };

    let mut adjoint: Vec<Option<Var>> = vec![None; n];
    let mut found: Vec<Option<Var>> = vec![None; wrt.len()];
    adjoint[output.id] = Some(tape.constant(Tensor::ones(out_value.shape())?));

    for id in (0..n).rev() {
        if !live[id] {
            continue;
        }
        let Some(g) = adjoint[id].take() else {
            continue;
        };
        for (slot, w) in found.iter_mut().zip(wrt) {
            if w.id == id {
                *slot = Some(g.clone());
            }
        }
        let (op, parent_ids) = {
            let inner = tape.0.borrow();
            (inner.nodes[id].op.clone(), inner.nodes[id].parents.clone())
        };
        let Op::Prim(kind) = op else { continue };
        let parents: Vec<Var> = parent_ids
            .iter()
            .map(|&p| Var {
                tape: tape.clone(),
                id: p,
            })
            .collect();
        let node = Var {
            tape: tape.clone(),
            id,
        };
        let grads = backward(&kind, &parents, &node, &g)?;
        for (p, gp) in parent_ids.into_iter().zip(grads) {
            let Some(gp) = gp else { continue };
            if !live[p] {
                continue;
            }
            adjoint[p] = Some(match adjoint[p].take() {
                None => gp,
                Some(acc) => acc.add(&gp)?,
            });
        }
    }

    found
        .into_iter()
        .zip(wrt)
        .map(|(g, w)| match g {
            Some(g) => Ok(g),
            None => Ok(tape.constant(Tensor::zeros(&w.shape())?)),
        })
        .collect()
}

/// First-order gradient values only; nothing from the backward pass is recorded.
pub fn gradient_values(output: &Var, wrt: &[Var]) -> Result<Vec<Tensor>> {
    let tape = output.tape().clone();
    let grads = tape.no_grad(|| gradient(output, wrt))?;
    Ok(grads.iter().map(|g| (*g.value()).clone()).collect())
}
