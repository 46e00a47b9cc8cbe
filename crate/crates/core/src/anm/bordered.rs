//! Order-by-order coefficient solving against one factorization.

use alloc::vec;
use alloc::vec::Vec;

use super::Homotopy;
use crate::error::{Error, Result};
use crate::graph::SeriesState;
use crate::sparse::{CsrMatrix, SparseLu};
use crate::{dot, norm, rms};

/// The bordered system `P x_k + λ_k v = −q_k`, closed by the
/// pseudo-arclength row `x₁ᵀx_k + λ₁λ_k = [k = 1]`.
#[derive(Debug)]
pub struct BorderedSystem {
    lu: SparseLu,
    v: Vec<f64>,
    /// `P⁻¹(−v)`
    y: Vec<f64>,
    x1: Vec<f64>,
    lambda1: f64,
}

impl BorderedSystem {
    /// Factors `P` and solves the tangent.
    pub fn new(p: &CsrMatrix, v: Vec<f64>) -> Result<Self> {
        if p.nrows() != p.ncols() || v.len() != p.nrows() {
            return Err(Error::Shape(alloc::format!(
                "bordered system with {}x{} slope and direction of length {}",
                p.nrows(),
                p.ncols(),
                v.len()
            )));
        }
        let lu = SparseLu::factor(p)?;
        let neg_v: Vec<f64> = v.iter().map(|a| -a).collect();
        let y = lu.solve(&neg_v);
        let lambda1 = 1.0 / libm::sqrt(dot(&y, &y) + 1.0);
        let x1 = y.iter().map(|a| a * lambda1).collect();
        Ok(BorderedSystem {
            lu,
            v,
            y,
            x1,
            lambda1,
        })
    }

    pub fn tangent(&self) -> (&[f64], f64) {
        (&self.x1, self.lambda1)
    }

    pub fn direction(&self) -> &[f64] {
        &self.v
    }

    /// `(x_k, λ_k)` for the bias `q_k`. Order 1 ignores `q`.
    pub fn solve(&self, k: usize, q: &[f64]) -> (Vec<f64>, f64) {
        if k == 1 {
            return (self.x1.clone(), self.lambda1);
        }
        let neg_q: Vec<f64> = q.iter().map(|a| -a).collect();
        let z = self.lu.solve(&neg_q);
        let lk = -dot(&self.x1, &z) / (dot(&self.x1, &self.y) + self.lambda1);
        let xk = z.iter().zip(&self.y).map(|(a, b)| a + lk * b).collect();
        (xk, lk)
    }
}

/// Taylor coefficients of the solution curve through one starting point.
#[derive(Clone, Debug)]
pub struct Expansion {
    /// `x_0..x_N`
    pub x: Vec<Vec<f64>>,
    /// `λ_0..λ_N`
    pub lambda: Vec<f64>,
    /// RMS of the order-`k` coefficient of `H` along the solved series,
    /// for `k = 1..N`. Ideally zero.
    pub order_residuals: Vec<f64>,
    /// RMS of `H(x_0, λ_0)`.
    pub start_residual: f64,
}

impl Expansion {
    pub fn order(&self) -> usize {
        self.x.len() - 1
    }

    /// Coefficient `k` of `[x; λ]`.
    pub fn joint(&self, k: usize) -> Vec<f64> {
        let mut u = self.x[k].clone();
        u.push(self.lambda[k]);
        u
    }

    /// Taylor polynomial `[x(a); λ(a)]` truncated at order `n`.
    pub fn eval_joint(&self, a: f64, n: usize) -> Vec<f64> {
        let mut u = vec![0.0; self.x[0].len() + 1];
        let mut p = 1.0;
        for k in 0..=n {
            for (o, c) in u.iter_mut().zip(&self.x[k]) {
                *o += p * c;
            }
            *u.last_mut().unwrap() += p * self.lambda[k];
            p *= a;
        }
        u
    }

    pub fn eval_lambda(&self, a: f64) -> f64 {
        self.lambda.iter().rev().fold(0.0, |acc, c| acc * a + c)
    }
}

/// Starting tolerance on the RMS of `H(x_0, λ_0)`.
pub fn start_tolerance(x0: &[f64]) -> f64 {
    1e-6 * (1.0 + norm(x0) / libm::sqrt(x0.len().max(1) as f64))
}

/// Solves coefficients `1..=order` of the curve through `(x0, λ0)`.
/// With `check_start`, a starting residual above [`start_tolerance`] is an
/// error.
pub fn solve_coefficients(
    h: &Homotopy,
    x0: &[f64],
    lambda0: f64,
    order: usize,
    check_start: bool,
) -> Result<Expansion> {
    let g = h.graph;
    if g.num_inputs() != g.num_outputs() {
        return Err(Error::Shape(alloc::format!(
            "system has {} unknowns and {} equations",
            g.num_inputs(),
            g.num_outputs()
        )));
    }
    let eval = g.evaluate(x0, lambda0)?;
    let h0 = h.finish(eval.value(g.output_var()).to_vec(), lambda0);
    let start_residual = rms(&h0);
    if check_start && !(start_residual <= start_tolerance(x0)) {
        return Err(Error::InvalidStart {
            residual_rms: start_residual,
            tolerance: start_tolerance(x0),
        });
    }
    let lin = g.linearize(eval)?;
    let (p, gv) = g.jacobian(&lin);
    let v = h.direction_total(gv);
    let sys = BorderedSystem::new(&p, v)?;
    let mut st = SeriesState::new(g, &lin);
    let mut lambda = vec![lambda0];
    let mut order_residuals = Vec::with_capacity(order);
    for k in 1..=order {
        let q = st.bias()?;
        let (xk, lk) = sys.solve(k, &q);
        st.commit(&xk, lk)?;
        lambda.push(lk);
        let out = st.coefficients(g.output_var())[k].to_vec();
        let hk: Vec<f64> = out
            .iter()
            .zip(&h.direction)
            .map(|(o, d)| o + lk * d)
            .collect();
        order_residuals.push(rms(&hk));
    }
    let x = st.x_series();
    if x.iter().flatten().chain(&lambda).any(|v| !v.is_finite()) {
        return Err(Error::domain("series", 0, "non-finite coefficient"));
    }
    Ok(Expansion {
        x,
        lambda,
        order_residuals,
        start_residual,
    })
}
