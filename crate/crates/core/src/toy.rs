//! Circle–ellipse intersection, a two-unknown test problem.
//!
//! `f_e = 2x² − 5x + y² − 4y − 2xy − 5` and `f_c = (x+1)² + y² − 8`. The
//! ellipse passes through `(0, −1)`; the homotopy grows a circle about
//! `(−1, 0)` from radius √2 to √8.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Result;
use crate::graph::{ComputeGraph, GraphBuilder};
use crate::sparse::{CsrMatrix, SparseAffineMap};
use crate::Shape;

pub const START: [f64; 2] = [0.0, -1.0];

pub fn f_e(x: f64, y: f64) -> f64 {
    2.0 * x * x - 5.0 * x + y * y - 4.0 * y - 2.0 * x * y - 5.0
}

pub fn f_c(x: f64, y: f64) -> f64 {
    (x + 1.0) * (x + 1.0) + y * y - 8.0
}

/// `√((f_e² + f_c²)/2)`
pub fn residual(p: &[f64]) -> f64 {
    let (e, c) = (f_e(p[0], p[1]), f_c(p[0], p[1]));
    libm::sqrt(0.5 * (e * e + c * c))
}

fn build(with_lambda: bool) -> Result<ComputeGraph> {
    let mut g = GraphBuilder::new();
    let x = g.input_x(2)?;
    let pick = |i: usize| SparseAffineMap::linear(CsrMatrix::from_triplets(1, 2, vec![(0, i, 1.0)]));
    let px = g.sparse_affine(pick(0), &[x], Shape::scalar(1))?;
    let py = g.sparse_affine(pick(1), &[x], Shape::scalar(1))?;
    let xx = g.mul(px, px)?;
    let yy = g.mul(py, py)?;
    let xy = g.mul(px, py)?;
    // columns: xx, yy, xy, x, y [, λ]
    let mut t = vec![
        (0, 0, 2.0),
        (0, 1, 1.0),
        (0, 2, -2.0),
        (0, 3, -5.0),
        (0, 4, -4.0),
        (1, 0, 1.0),
        (1, 1, 1.0),
        (1, 3, 2.0),
    ];
    let mut inputs = vec![xx, yy, xy, x];
    let mut offset = vec![-5.0, -7.0];
    if with_lambda {
        let l = g.input_lambda()?;
        inputs.push(l);
        t.push((1, 5, -6.0));
        offset[1] += 6.0;
    }
    let cols = if with_lambda { 6 } else { 5 };
    let map = SparseAffineMap::new(CsrMatrix::from_triplets(2, cols, t), offset)?;
    let out = g.sparse_affine(map, &inputs, Shape::vector(2))?;
    g.finish(out)
}

/// `H(x, λ) = (f_e, f_c + 6 − 6λ)`, zero at `(0, −1)` with `λ = 0`.
pub fn homotopy_graph() -> Result<ComputeGraph> {
    build(true)
}

/// `f = (f_e, f_c)`, to be solved as `f(x) + 0 = 0`.
pub fn system_graph() -> Result<ComputeGraph> {
    build(false)
}

/// `(f_e, f_c)` at a point.
pub fn eval(p: &[f64]) -> Vec<f64> {
    vec![f_e(p[0], p[1]), f_c(p[0], p[1])]
}
