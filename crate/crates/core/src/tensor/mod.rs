//! Dense row-major tensors, the forward/backward kernels used by the blocks,
//! and a tape that records a forward pass for reverse-mode differentiation.
//!
//! Image tensors use `N, H, W, C` layout throughout.

pub mod kernels;
mod param;
mod tape;

pub use kernels::{BatchNormConfig, Mode, Padding, PoolKind, RunningStats};
pub use param::{ParamId, ParamStore, Parameter};
pub use tape::{BatchNormArgs, Gradients, Tape, Var};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{shape_err, Error, Result};

/// Scalar type used by every kernel.
pub type Scalar = f64;

/// Dense n-dimensional array with an optional gradient slot of the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<Scalar>,
    grad: Option<Vec<Scalar>>,
}

impl Tensor {
    pub fn new(shape: impl Into<Vec<usize>>, data: Vec<Scalar>) -> Result<Self> {
        let shape = shape.into();
        if shape.is_empty() || shape.contains(&0) {
            return shape_err("tensor", format!("extents must be positive, got {shape:?}"));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return shape_err(
                "tensor",
                format!("shape {shape:?} needs {len} scalars, got {}", data.len()),
            );
        }
        Ok(Self {
            shape,
            data,
            grad: None,
        })
    }

    /// Builds a tensor that the caller guarantees is well-formed.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<Scalar>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self {
            shape,
            data,
            grad: None,
        }
    }

    pub fn full(shape: impl Into<Vec<usize>>, value: Scalar) -> Result<Self> {
        let shape = shape.into();
        let len = shape.iter().product();
        Self::new(shape, vec![value; len])
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Result<Self> {
        Self::full(shape, 0.0)
    }

    pub fn ones(shape: impl Into<Vec<usize>>) -> Result<Self> {
        Self::full(shape, 1.0)
    }

    pub fn scalar(value: Scalar) -> Self {
        Self::from_parts(vec![1], vec![value])
    }

    /// Standard normal entries scaled by `std`.
    pub fn randn<R: Rng + ?Sized>(shape: impl Into<Vec<usize>>, std: Scalar, rng: &mut R) -> Result<Self> {
        let shape = shape.into();
        let len = shape.iter().product();
        let data = (0..len)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                z * std
            })
            .collect();
        Self::new(shape, data)
    }

    /// Uniform entries in `[lo, hi)`.
    pub fn uniform<R: Rng + ?Sized>(shape: impl Into<Vec<usize>>, lo: Scalar, hi: Scalar, rng: &mut R) -> Result<Self> {
        let shape = shape.into();
        let len = shape.iter().product();
        let data = (0..len).map(|_| rng.random_range(lo..hi)).collect();
        Self::new(shape, data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[Scalar] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Scalar] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Scalar> {
        self.data
    }

    pub fn grad(&self) -> Option<&[Scalar]> {
        self.grad.as_deref()
    }

    pub fn zero_grad(&mut self) {
        self.grad = None;
    }

    /// Adds `delta` into the gradient slot, creating it on first use.
    pub fn accumulate_grad(&mut self, delta: &[Scalar]) -> Result<()> {
        if delta.len() != self.data.len() {
            return shape_err(
                "accumulate_grad",
                format!("gradient of length {} for tensor of length {}", delta.len(), self.len()),
            );
        }
        match &mut self.grad {
            Some(g) => g.iter_mut().zip(delta).for_each(|(a, b)| *a += b),
            None => self.grad = Some(delta.to_vec()),
        }
        Ok(())
    }

    pub fn reshape(mut self, shape: impl Into<Vec<usize>>) -> Result<Self> {
        let shape = shape.into();
        if shape.iter().product::<usize>() != self.data.len() || shape.contains(&0) {
            return shape_err("reshape", format!("cannot reshape {:?} into {shape:?}", self.shape));
        }
        self.shape = shape;
        self.grad = None;
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(Scalar) -> Scalar) -> Self {
        Self::from_parts(self.shape.clone(), self.data.iter().map(|&x| f(x)).collect())
    }

    pub fn get(&self, index: &[usize]) -> Option<Scalar> {
        if index.len() != self.shape.len() {
            return None;
        }
        let mut flat = 0;
        for (&i, &d) in index.iter().zip(&self.shape) {
            if i >= d {
                return None;
            }
            flat = flat * d + i;
        }
        Some(self.data[flat])
    }

    pub fn sum(&self) -> Scalar {
        self.data.iter().sum()
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> Option<Scalar> {
        if self.shape != other.shape {
            return None;
        }
        Some(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        )
    }

    /// Fails with [`Error::NonFinite`] if any scalar is NaN or infinite.
    pub fn ensure_finite(&self, op: &'static str) -> Result<()> {
        if self.data.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite { op })
        }
    }

    /// Copies rows `[start, start + count)` of the leading axis.
    pub fn slice_rows(&self, start: usize, count: usize) -> Result<Tensor> {
        let n = self.shape[0];
        if count == 0 || start + count > n {
            return shape_err("slice_rows", format!("rows {start}..{} of {n}", start + count));
        }
        let row = self.len() / n;
        let mut shape = self.shape.clone();
        shape[0] = count;
        Ok(Self::from_parts(
            shape,
            self.data[start * row..(start + count) * row].to_vec(),
        ))
    }

    /// Gathers rows of the leading axis in the given order.
    pub fn gather_rows(&self, rows: &[usize]) -> Result<Tensor> {
        let n = self.shape[0];
        if rows.is_empty() || rows.iter().any(|&r| r >= n) {
            return shape_err("gather_rows", format!("row index out of range for {n} rows"));
        }
        let row = self.len() / n;
        let mut data = Vec::with_capacity(rows.len() * row);
        for &r in rows {
            data.extend_from_slice(&self.data[r * row..(r + 1) * row]);
        }
        let mut shape = self.shape.clone();
        shape[0] = rows.len();
        Ok(Self::from_parts(shape, data))
    }

    /// Copies channels `[start, start + count)` of the trailing axis.
    pub fn slice_channels(&self, start: usize, count: usize) -> Result<Tensor> {
        let c = *self.shape.last().expect("rank >= 1");
        if count == 0 || start + count > c {
            return shape_err("slice_channels", format!("channels {start}..{} of {c}", start + count));
        }
        let data = self
            .data
            .chunks_exact(c)
            .flat_map(|px| px[start..start + count].iter().copied())
            .collect();
        let mut shape = self.shape.clone();
        *shape.last_mut().unwrap() = count;
        Ok(Self::from_parts(shape, data))
    }
}
