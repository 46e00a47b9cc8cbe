//! Taylor coefficient propagation through individual operators.
//!
//! Every rule computes the order-`k` coefficient of an operator's output
//! from the coefficients of its inputs (and, for recursive rules, the
//! lower-order coefficients of the output). Input series are slices indexed
//! by order. A series that stops before index `k` is read as having a zero
//! `k`-th coefficient, which makes the same function return the bias: the
//! part of the order-`k` output that does not depend on the order-`k`
//! inputs. The remaining part is linear in the order-`k` inputs and equals
//! the operator's Jacobian at order zero.

mod decomp;
mod det;
mod elementwise;
mod matrix;

pub use decomp::{polar, polar_item, svdw, svdw_item, PolarOutput, SvdWOutput};
pub use det::{cofactor, det_bias, det_bias_fft, det_bias_leibniz, det_coeff};
pub use elementwise::{add, div, log, mul, pow, sub, INTEGER_POW_THRESHOLD};
pub use matrix::{matinv, matmul, transpose};

use crate::tensor::{BatchedTensor, Shape};

/// Lorentzian broadening used for every Sylvester division.
pub const BROADENING: f64 = 1e-12;

/// `x / y` replaced by `x·y / (y² + ε)` with `ε = BROADENING·min(scale², 1)`,
/// so that well separated values of a small matrix are not smeared.
#[inline]
pub fn broadened_div(x: f64, y: f64, scale: f64) -> f64 {
    let eps = BROADENING * (scale * scale).clamp(f64::MIN_POSITIVE, 1.0);
    x * y / (y * y + eps)
}

/// Largest magnitude in `s`, the scale for [`broadened_div`].
pub fn spectral_scale(s: &[f64]) -> f64 {
    s.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Coefficient `i` of a series, or `None` when it is absent or zero.
pub(crate) fn term(s: &[BatchedTensor], i: usize) -> Option<&BatchedTensor> {
    s.get(i).filter(|t| !t.is_zero())
}

/// Item `b` of coefficient `i`, or `None` when it is absent or zero.
pub(crate) fn item_of(s: &[BatchedTensor], i: usize, b: usize) -> Option<&[f64]> {
    term(s, i).and_then(|t| t.item(b))
}

/// The shape of a series, taken from its leading coefficient.
pub(crate) fn series_shape(s: &[BatchedTensor]) -> Shape {
    s[0].shape()
}

/// Solves `diag(s)·M + M·diag(s) = A` for an `m × m` matrix with broadened
/// division.
pub fn sylvester_sym(a: &[f64], s: &[f64]) -> alloc::vec::Vec<f64> {
    let m = s.len();
    let scale = spectral_scale(s);
    let mut out = alloc::vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            out[i * m + j] = broadened_div(a[i * m + j], s[i] + s[j], scale);
        }
    }
    out
}
