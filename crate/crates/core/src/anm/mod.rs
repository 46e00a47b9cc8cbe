//! Asymptotic numerical method: power-series expansion of a solution curve
//! and continuation along it.

mod bordered;
mod continuation;
mod pade;

use alloc::vec;
use alloc::vec::Vec;

pub use bordered::{solve_coefficients, start_tolerance, BorderedSystem, Expansion};
pub use continuation::{
    continuation, equational_continuation, Approximant, ContinuationTrace, Curve, Solution,
    StepRecord,
};
pub use pade::{rov_pade, rov_taylor, PadeApproximant};

use crate::error::Result;
use crate::graph::ComputeGraph;

/// `H(x, λ) = G(x, λ) + λ·direction + offset` for a graph `G`.
#[derive(Clone, Debug)]
pub struct Homotopy<'g> {
    pub graph: &'g ComputeGraph,
    pub direction: Vec<f64>,
    pub offset: Vec<f64>,
}

impl<'g> Homotopy<'g> {
    /// `H = G`.
    pub fn new(graph: &'g ComputeGraph) -> Self {
        let m = graph.num_outputs();
        Homotopy {
            graph,
            direction: vec![0.0; m],
            offset: vec![0.0; m],
        }
    }

    /// `H_k(x, λ) = f(x) + λ r − f(x_k)` with `r = f(x_k) + v`: zero at
    /// `(x_k, 0)`, and `f(x) + v` at `λ = 1`.
    pub fn residual_form(graph: &'g ComputeGraph, fxk: &[f64], v: &[f64]) -> Self {
        Homotopy {
            graph,
            direction: fxk.iter().zip(v).map(|(a, b)| a + b).collect(),
            offset: fxk.iter().map(|a| -a).collect(),
        }
    }

    pub(crate) fn finish(&self, mut g: Vec<f64>, lambda: f64) -> Vec<f64> {
        for ((o, d), c) in g.iter_mut().zip(&self.direction).zip(&self.offset) {
            *o += lambda * d + c;
        }
        g
    }

    pub(crate) fn direction_total(&self, mut gv: Vec<f64>) -> Vec<f64> {
        gv.iter_mut().zip(&self.direction).for_each(|(a, d)| *a += d);
        gv
    }

    pub fn eval(&self, x: &[f64], lambda: f64) -> Result<Vec<f64>> {
        Ok(self.finish(self.graph.output(x, lambda)?, lambda))
    }
}

/// Continuation settings.
#[derive(Clone, Copy, Debug)]
pub struct Options {
    /// Truncation order `N`.
    pub order: usize,
    /// Range-of-validity tolerance.
    pub eps_rov: f64,
    /// Residual target of equational continuation.
    pub eps_res: f64,
    pub max_iter: usize,
    pub pade: bool,
    /// Keep each step's approximant in the trace for later state queries.
    pub keep_approximants: bool,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            order: 20,
            eps_rov: 1e-4,
            eps_res: 1e-10,
            max_iter: 200,
            pade: true,
            keep_approximants: false,
        }
    }
}
