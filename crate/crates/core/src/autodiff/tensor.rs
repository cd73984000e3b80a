//! Dense row-major tensors and the raw numeric kernels behind the tape ops.

use std::fmt;

use crate::error::{Error, Result};

/// Dense row-major array of `f64`.
///
/// Values are stored in 64-bit regardless of [`Precision`]; in 32-bit mode the
/// tape rounds every produced value to the nearest `f32`.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

/// Arithmetic precision of a graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Precision {
    /// Full 64-bit arithmetic. Used by every gradient check.
    #[default]
    Test,
    /// Values rounded to 32-bit after every operation.
    Train,
}

impl Precision {
    pub fn round(self, v: f64) -> f64 {
        match self {
            Precision::Test => v,
            Precision::Train => v as f32 as f64,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Precision::Test => "test",
            Precision::Train => "train",
        }
    }
}

impl std::str::FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "test" | "f64" | "64" => Ok(Precision::Test),
            "train" | "f32" | "32" => Ok(Precision::Train),
            other => Err(Error::invalid(format!("unknown precision {other:?}"))),
        }
    }
}

fn check_shape(shape: &[usize]) -> Result<()> {
    if shape.is_empty() || shape.contains(&0) {
        return Err(Error::InvalidShape(shape.to_vec()));
    }
    Ok(())
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        check_shape(shape)?;
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::shape(
                "Tensor::new",
                format!("shape {shape:?} holds {n} values, got {}", data.len()),
            ));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Panics on an invalid shape; for internal use where shapes are known good.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor { shape, data }
    }

    pub fn full(shape: &[usize], value: f64) -> Result<Self> {
        check_shape(shape)?;
        let n = shape.iter().product();
        Ok(Tensor {
            shape: shape.to_vec(),
            data: vec![value; n],
        })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::full(shape, 0.0)
    }

    pub fn ones(shape: &[usize]) -> Result<Self> {
        Self::full(shape, 1.0)
    }

    pub fn scalar(v: f64) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![v],
        }
    }

    /// A `[1, n]` row vector.
    pub fn row(values: &[f64]) -> Result<Self> {
        Self::new(&[1, values.len()], values.to_vec())
    }

    /// Builds a `[rows, cols]` matrix from equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::shape("Tensor::from_rows", "ragged rows"));
        }
        Self::new(&[rows.len(), cols], rows.concat())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> Result<f64> {
        if self.data.len() != 1 {
            return Err(Error::shape(
                "Tensor::item",
                format!("expected one element, shape {:?}", self.shape),
            ));
        }
        Ok(self.data[0])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().fold(true, |ok, v| ok & v.is_finite())
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        Self::new(shape, self.data.clone())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(
        &self,
        other: &Tensor,
        op: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::shape(
                op,
                format!("{:?} vs {:?}", self.shape, other.shape),
            ));
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn round_to(&mut self, precision: Precision) {
        if precision == Precision::Train {
            for v in &mut self.data {
                *v = *v as f32 as f64;
            }
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn dims2(&self, op: &'static str) -> Result<(usize, usize)> {
        match self.shape[..] {
            [r, c] => Ok((r, c)),
            _ => Err(Error::shape(
                op,
                format!("expected rank 2, got {:?}", self.shape),
            )),
        }
    }

    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (n, k) = self.dims2("matmul")?;
        let (k2, m) = other.dims2("matmul")?;
        if k != k2 {
            return Err(Error::shape(
                "matmul",
                format!("{:?} x {:?}", self.shape, other.shape),
            ));
        }
        let mut out = vec![0.0; n * m];
        let (a, b) = (&self.data[..], &other.data[..]);
        // four output rows per pass share each row of `other`
        let mut blocks = out.chunks_exact_mut(4 * m);
        let mut i = 0;
        for block in &mut blocks {
            let (r0, rest) = block.split_at_mut(m);
            let (r1, rest) = rest.split_at_mut(m);
            let (r2, r3) = rest.split_at_mut(m);
            for p in 0..k {
                let (a0, a1, a2, a3) = (
                    a[i * k + p],
                    a[(i + 1) * k + p],
                    a[(i + 2) * k + p],
                    a[(i + 3) * k + p],
                );
                let br = &b[p * m..(p + 1) * m];
                for j in 0..m {
                    let bv = br[j];
                    r0[j] += a0 * bv;
                    r1[j] += a1 * bv;
                    r2[j] += a2 * bv;
                    r3[j] += a3 * bv;
                }
            }
            i += 4;
        }
        for row in blocks.into_remainder().chunks_exact_mut(m) {
            for p in 0..k {
                let av = a[i * k + p];
                for (o, &bv) in row.iter_mut().zip(&b[p * m..(p + 1) * m]) {
                    *o += av * bv;
                }
            }
            i += 1;
        }
        Ok(Tensor::from_parts(vec![n, m], out))
    }

    pub fn transpose(&self) -> Result<Tensor> {
        let (r, c) = self.dims2("transpose")?;
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = self.data[i * c + j];
            }
        }
        Ok(Tensor::from_parts(vec![c, r], out))
    }

    /// Splits the shape around `axis` into (outer, extent, inner) element counts.
    fn around(&self, axis: usize) -> (usize, usize, usize) {
        let outer = self.shape[..axis].iter().product();
        let inner = self.shape[axis + 1..].iter().product();
        (outer, self.shape[axis], inner)
    }

    pub fn concat(parts: &[&Tensor], axis: usize) -> Result<Tensor> {
        let first = parts
            .first()
            .ok_or_else(|| Error::shape("concat", "no inputs"))?;
        if axis >= first.rank() {
            return Err(Error::shape("concat", format!("axis {axis} out of range")));
        }
        for p in parts {
            let same = p.rank() == first.rank()
                && p.shape
                    .iter()
                    .zip(&first.shape)
                    .enumerate()
                    .all(|(d, (a, b))| d == axis || a == b);
            if !same {
                return Err(Error::shape(
                    "concat",
                    format!("{:?} vs {:?} along axis {axis}", p.shape, first.shape),
                ));
            }
        }
        let total: usize = parts.iter().map(|p| p.shape[axis]).sum();
        let mut shape = first.shape.clone();
        shape[axis] = total;
        let (outer, _, inner) = first.around(axis);
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for p in parts {
                let chunk = p.shape[axis] * inner;
                out.extend_from_slice(&p.data[o * chunk..(o + 1) * chunk]);
            }
        }
        Ok(Tensor::from_parts(shape, out))
    }

    pub fn slice(&self, axis: usize, start: usize, len: usize) -> Result<Tensor> {
        if axis >= self.rank() || len == 0 || start + len > self.shape[axis] {
            return Err(Error::shape(
                "slice",
                format!(
                    "[{start}, {}) on axis {axis} of {:?}",
                    start + len,
                    self.shape
                ),
            ));
        }
        let (outer, extent, inner) = self.around(axis);
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = o * extent * inner + start * inner;
            out.extend_from_slice(&self.data[base..base + len * inner]);
        }
        let mut shape = self.shape.clone();
        shape[axis] = len;
        Ok(Tensor::from_parts(shape, out))
    }

    fn broadcast_compatible(small: &[usize], big: &[usize]) -> bool {
        small.len() == big.len() && small.iter().zip(big).all(|(&s, &b)| s == b || s == 1)
    }

    /// Offsets into a tensor of shape `small` for each element of `big`, row-major.
    fn broadcast_offsets(small: &[usize], big: &[usize]) -> Vec<usize> {
        let rank = big.len();
        let mut strides = vec![0usize; rank];
        let mut acc = 1;
        for d in (0..rank).rev() {
            strides[d] = if small[d] == 1 { 0 } else { acc };
            acc *= small[d];
        }
        let n: usize = big.iter().product();
        let mut offsets = Vec::with_capacity(n);
        let mut idx = vec![0usize; rank];
        let mut off = 0usize;
        for _ in 0..n {
            offsets.push(off);
            for d in (0..rank).rev() {
                idx[d] += 1;
                off += strides[d];
                if idx[d] < big[d] {
                    break;
                }
                off -= strides[d] * idx[d];
                idx[d] = 0;
            }
        }
        offsets
    }

    /// Repeats size-1 axes to reach `shape` (same rank required).
    pub fn broadcast_to(&self, shape: &[usize]) -> Result<Tensor> {
        if !Self::broadcast_compatible(&self.shape, shape) {
            return Err(Error::shape(
                "broadcast_to",
                format!("{:?} -> {shape:?}", self.shape),
            ));
        }
        if self.shape == shape {
            return Ok(self.clone());
        }
        // fast path: [1, n] -> [b, n]
        if shape.len() == 2 && self.shape[0] == 1 && self.shape[1] == shape[1] {
            let mut out = Vec::with_capacity(shape[0] * shape[1]);
            for _ in 0..shape[0] {
                out.extend_from_slice(&self.data);
            }
            return Ok(Tensor::from_parts(shape.to_vec(), out));
        }
        let data = Self::broadcast_offsets(&self.shape, shape)
            .into_iter()
            .map(|o| self.data[o])
            .collect();
        Ok(Tensor::from_parts(shape.to_vec(), data))
    }

    /// Sums over axes to reduce to `shape`; the inverse shape rule of `broadcast_to`.
    pub fn sum_to(&self, shape: &[usize]) -> Result<Tensor> {
        check_shape(shape)?;
        if !Self::broadcast_compatible(shape, &self.shape) {
            return Err(Error::shape(
                "sum_to",
                format!("{:?} -> {shape:?}", self.shape),
            ));
        }
        if self.shape == shape {
            return Ok(self.clone());
        }
        let n: usize = shape.iter().product();
        let mut out = vec![0.0; n];
        if shape.len() == 2 && shape[0] == 1 && shape[1] == self.shape[1] {
            let cols = shape[1];
            for row in self.data.chunks(cols) {
                for (o, v) in out.iter_mut().zip(row) {
                    *o += v;
                }
            }
        } else {
            for (v, o) in self
                .data
                .iter()
                .zip(Self::broadcast_offsets(shape, &self.shape))
            {
                out[o] += v;
            }
        }
        Ok(Tensor::from_parts(shape.to_vec(), out))
    }

    /// Euclidean norm over `axis` (keeping it as extent 1), or over everything.
    pub fn l2_norm(&self, axis: Option<usize>) -> Result<Tensor> {
        match axis {
            None => Ok(Tensor::from_parts(vec![1; self.rank()], vec![self.norm()])),
            Some(ax) => {
                if ax >= self.rank() {
                    return Err(Error::shape("l2_norm", format!("axis {ax} out of range")));
                }
                let mut shape = self.shape.clone();
                shape[ax] = 1;
                let sq = self.map(|v| v * v).sum_to(&shape)?;
                Ok(sq.map(f64::sqrt))
            }
        }
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{:?}", self.shape)?;
        if self.data.len() <= 16 {
            write!(f, " {:?}", self.data)
        } else {
            write!(f, " [{} values]", self.data.len())
        }
    }
}
