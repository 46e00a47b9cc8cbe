//! Batched dense tensors.
//!
//! Every tensor is a stack of `rows × cols` row-major matrices; vectors and
//! scalars are the `cols == 1` and `rows == cols == 1` cases. The all-zeros
//! tensor has a dedicated representation that owns no buffer, which lets
//! arithmetic skip work on zero inputs. Storage is reference counted and
//! copied on write.

pub mod dense;
pub mod fft;
mod linalg;
pub mod svd;

use alloc::borrow::Cow;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

pub use fft::{dft_batch, Direction};
pub use linalg::{batched_det, batched_inverse, batched_matmul, batched_transpose};
pub use svd::{batched_svd_w, SvdWTriple};

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub batch: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Shape {
    pub const fn new(batch: usize, rows: usize, cols: usize) -> Self {
        Shape { batch, rows, cols }
    }

    /// One scalar per batch item.
    pub const fn scalar(batch: usize) -> Self {
        Shape::new(batch, 1, 1)
    }

    /// A flat vector of length `n`, stored as `n` scalar items.
    pub const fn vector(n: usize) -> Self {
        Shape::new(n, 1, 1)
    }

    pub const fn item_len(&self) -> usize {
        self.rows * self.cols
    }

    pub const fn len(&self) -> usize {
        self.batch * self.rows * self.cols
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub const fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub const fn is_item_scalar(&self) -> bool {
        self.rows == 1 && self.cols == 1
    }

    /// Result shape of an elementwise binary op. Equal shapes, or a
    /// per-item scalar against a matrix batch of the same batch size.
    pub fn broadcast(self, other: Shape) -> Result<Shape> {
        if self == other {
            Ok(self)
        } else if self.batch == other.batch && self.is_item_scalar() {
            Ok(other)
        } else if self.batch == other.batch && other.is_item_scalar() {
            Ok(self)
        } else {
            Err(Error::Shape(format!("cannot broadcast {self:?} with {other:?}")))
        }
    }
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.batch, self.rows, self.cols)
    }
}

#[derive(Clone)]
enum Storage {
    Zero,
    Dense(Arc<Vec<f64>>),
}

#[derive(Clone)]
pub struct BatchedTensor {
    shape: Shape,
    storage: Storage,
}

impl fmt::Debug for BatchedTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.storage {
            Storage::Zero => write!(f, "BatchedTensor({:?}, zero)", self.shape),
            Storage::Dense(d) => write!(f, "BatchedTensor({:?}, {:?})", self.shape, d),
        }
    }
}

impl PartialEq for BatchedTensor {
    fn eq(&self, other: &Self) -> bool {
        self.shape == other.shape && self.values() == other.values()
    }
}

impl BatchedTensor {
    /// The shared all-zeros tensor of the given shape.
    pub fn zeros(shape: Shape) -> Self {
        BatchedTensor {
            shape,
            storage: Storage::Zero,
        }
    }

    pub fn from_vec(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::Shape(format!(
                "{} values for shape {shape:?}",
                data.len()
            )));
        }
        Ok(BatchedTensor {
            shape,
            storage: Storage::Dense(Arc::new(data)),
        })
    }

    pub fn filled(shape: Shape, value: f64) -> Self {
        if value == 0.0 {
            return Self::zeros(shape);
        }
        BatchedTensor {
            shape,
            storage: Storage::Dense(Arc::new(vec![value; shape.len()])),
        }
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(shape.len());
        for b in 0..shape.batch {
            for i in 0..shape.rows {
                for j in 0..shape.cols {
                    data.push(f(b, i, j));
                }
            }
        }
        BatchedTensor {
            shape,
            storage: Storage::Dense(Arc::new(data)),
        }
    }

    /// A flat vector stored as `n` scalar items.
    pub fn from_slice(v: &[f64]) -> Self {
        BatchedTensor {
            shape: Shape::vector(v.len()),
            storage: Storage::Dense(Arc::new(v.to_vec())),
        }
    }

    /// `batch` copies of the `m × m` identity.
    pub fn identity(batch: usize, m: usize) -> Self {
        Self::from_fn(Shape::new(batch, m, m), |_, i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.shape.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shape.is_empty()
    }

    /// True for the shared zero representation. A dense buffer that happens
    /// to hold zeros is not reported.
    pub fn is_zero(&self) -> bool {
        matches!(self.storage, Storage::Zero)
    }

    /// Dense buffer, if any.
    pub fn data(&self) -> Option<&[f64]> {
        match &self.storage {
            Storage::Zero => None,
            Storage::Dense(d) => Some(d.as_slice()),
        }
    }

    pub fn values(&self) -> Cow<'_, [f64]> {
        match &self.storage {
            Storage::Zero => Cow::Owned(vec![0.0; self.shape.len()]),
            Storage::Dense(d) => Cow::Borrowed(d.as_slice()),
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.values().into_owned()
    }

    pub fn get(&self, b: usize, i: usize, j: usize) -> f64 {
        match &self.storage {
            Storage::Zero => 0.0,
            Storage::Dense(d) => d[(b * self.shape.rows + i) * self.shape.cols + j],
        }
    }

    /// One batch item, or `None` for the zero tensor.
    pub fn item(&self, b: usize) -> Option<&[f64]> {
        let n = self.shape.item_len();
        self.data().map(|d| &d[b * n..(b + 1) * n])
    }

    /// Mutable access; clones the buffer if it is shared and materializes
    /// the zero tensor.
    pub fn make_mut(&mut self) -> &mut [f64] {
        if let Storage::Zero = self.storage {
            self.storage = Storage::Dense(Arc::new(vec![0.0; self.shape.len()]));
        }
        match &mut self.storage {
            Storage::Dense(d) => Arc::make_mut(d).as_mut_slice(),
            Storage::Zero => unreachable!(),
        }
    }

    /// Same values reinterpreted with another shape of equal length.
    pub fn reshape(&self, shape: Shape) -> Result<Self> {
        if shape.len() != self.shape.len() {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} to {shape:?}",
                self.shape
            )));
        }
        Ok(BatchedTensor {
            shape,
            storage: self.storage.clone(),
        })
    }

    /// True when both handles refer to the same buffer.
    pub fn shares_storage(&self, other: &Self) -> bool {
        match (&self.storage, &other.storage) {
            (Storage::Dense(a), Storage::Dense(b)) => Arc::ptr_eq(a, b),
            (Storage::Zero, Storage::Zero) => true,
            _ => false,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data().is_none_or(|d| d.iter().all(|v| v.is_finite()))
    }

    pub fn max_abs(&self) -> f64 {
        self.data()
            .map_or(0.0, |d| d.iter().fold(0.0f64, |m, v| m.max(v.abs())))
    }

    pub fn norm(&self) -> f64 {
        self.data().map_or(0.0, crate::norm)
    }

    /// Builds a tensor by filling each item with `f(item, out)`.
    pub fn par_from_items(
        shape: Shape,
        f: impl Fn(usize, &mut [f64]) + Sync + Send,
    ) -> Self {
        let mut data = vec![0.0; shape.len()];
        crate::par::for_each_item(&mut data, shape.item_len(), f);
        BatchedTensor {
            shape,
            storage: Storage::Dense(Arc::new(data)),
        }
    }

    pub fn try_par_from_items(
        shape: Shape,
        f: impl Fn(usize, &mut [f64]) -> Result<()> + Sync + Send,
    ) -> Result<Self> {
        let mut data = vec![0.0; shape.len()];
        crate::par::try_for_each_item(&mut data, shape.item_len(), f)?;
        Ok(BatchedTensor {
            shape,
            storage: Storage::Dense(Arc::new(data)),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        ew_binary(BinaryOp::Add, self, other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        ew_binary(BinaryOp::Sub, self, other)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        ew_binary(BinaryOp::Mul, self, other)
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        ew_binary(BinaryOp::Div, self, other)
    }

    pub fn scale(&self, c: f64) -> Self {
        ew_unary_infallible(self, |v| c * v, c == 0.0)
    }

    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    /// `self + c·other` with equal shapes.
    pub fn axpy(&self, c: f64, other: &Self) -> Result<Self> {
        if other.is_zero() || c == 0.0 {
            return Ok(self.clone());
        }
        self.add(&other.scale(c))
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        batched_matmul(self, other)
    }

    pub fn transpose(&self) -> Self {
        batched_transpose(self)
    }
}

/// Elementwise binary operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Elementwise unary operators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum UnaryOp {
    Log,
    /// `x^r`
    Pow(f64),
    /// `a·x + b`
    Affine(f64, f64),
}

/// Elementwise map over one tensor.
pub fn ew_unary(op: UnaryOp, x: &BatchedTensor) -> Result<BatchedTensor> {
    match op {
        UnaryOp::Affine(a, b) => {
            if b == 0.0 {
                return Ok(x.scale(a));
            }
            Ok(ew_unary_infallible(x, |v| a * v + b, false))
        }
        UnaryOp::Log => {
            let shape = x.shape;
            let vals = x.values();
            let n = shape.item_len();
            BatchedTensor::try_par_from_items(shape, |b, out| {
                for (o, &v) in out.iter_mut().zip(&vals[b * n..(b + 1) * n]) {
                    if !(v > 0.0) {
                        return Err(Error::domain("log", b, format!("argument {v}")));
                    }
                    *o = libm::log(v);
                }
                Ok(())
            })
        }
        UnaryOp::Pow(r) => {
            let shape = x.shape;
            if x.is_zero() && r > 0.0 {
                return Ok(x.clone());
            }
            let vals = x.values();
            let n = shape.item_len();
            let integer = libm::round(r) == r;
            BatchedTensor::try_par_from_items(shape, |b, out| {
                for (o, &v) in out.iter_mut().zip(&vals[b * n..(b + 1) * n]) {
                    if !integer && v < 0.0 || r < 0.0 && v == 0.0 {
                        return Err(Error::domain("pow", b, format!("{v}^{r}")));
                    }
                    *o = libm::pow(v, r);
                }
                Ok(())
            })
        }
    }
}

fn ew_unary_infallible(
    x: &BatchedTensor,
    f: impl Fn(f64) -> f64,
    result_is_zero: bool,
) -> BatchedTensor {
    if result_is_zero {
        return BatchedTensor::zeros(x.shape);
    }
    match x.data() {
        None if f(0.0) == 0.0 => x.clone(),
        _ => {
            let data = x.values().iter().map(|&v| f(v)).collect();
            BatchedTensor {
                shape: x.shape,
                storage: Storage::Dense(Arc::new(data)),
            }
        }
    }
}

/// Expands `x` to `shape` when `x` holds one scalar per item.
fn broadcast_to(x: &BatchedTensor, shape: Shape) -> BatchedTensor {
    if x.shape == shape {
        return x.clone();
    }
    if x.is_zero() {
        return BatchedTensor::zeros(shape);
    }
    BatchedTensor::from_fn(shape, |b, _, _| x.get(b, 0, 0))
}

/// Elementwise binary map with per-item scalar broadcasting.
pub fn ew_binary(op: BinaryOp, a: &BatchedTensor, b: &BatchedTensor) -> Result<BatchedTensor> {
    let shape = a.shape.broadcast(b.shape)?;
    match op {
        BinaryOp::Add => {
            if b.is_zero() {
                return Ok(broadcast_to(a, shape));
            }
            if a.is_zero() {
                return Ok(broadcast_to(b, shape));
            }
        }
        BinaryOp::Sub => {
            if b.is_zero() {
                return Ok(broadcast_to(a, shape));
            }
            if a.is_zero() {
                return Ok(broadcast_to(&b.neg(), shape));
            }
        }
        BinaryOp::Mul => {
            if a.is_zero() || b.is_zero() {
                return Ok(BatchedTensor::zeros(shape));
            }
        }
        BinaryOp::Div => {
            if b.is_zero() {
                return Err(Error::domain("div", 0, "division by the zero tensor"));
            }
        }
    }
    let av = a.values();
    let bv = b.values();
    let (a_step, b_step) = (
        if a.shape.is_item_scalar() && shape.item_len() > 1 { 0 } else { 1 },
        if b.shape.is_item_scalar() && shape.item_len() > 1 { 0 } else { 1 },
    );
    let (an, bn) = (a.shape.item_len(), b.shape.item_len());
    let n = shape.item_len();
    BatchedTensor::try_par_from_items(shape, |item, out| {
        let ai = &av[item * an..(item + 1) * an];
        let bi = &bv[item * bn..(item + 1) * bn];
        for (e, o) in out.iter_mut().enumerate().take(n) {
            let x = ai[e * a_step];
            let y = bi[e * b_step];
            *o = match op {
                BinaryOp::Add => x + y,
                BinaryOp::Sub => x - y,
                BinaryOp::Mul => x * y,
                BinaryOp::Div => {
                    if y == 0.0 {
                        return Err(Error::domain("div", item, "division by zero"));
                    }
                    x / y
                }
            };
        }
        Ok(())
    })
}
