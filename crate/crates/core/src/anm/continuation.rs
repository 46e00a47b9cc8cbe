//! Step selection and the continuation loops.

use alloc::vec::Vec;

use super::bordered::{solve_coefficients, Expansion};
use super::pade::{rov_pade, rov_taylor, PadeApproximant};
use super::{Homotopy, Options};
use crate::error::{Error, Result};
use crate::graph::ComputeGraph;
use crate::{norm, rms};

/// Approximant chosen for a step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Approximant {
    Taylor,
    Pade,
    /// The series terminated; the truncated polynomial is exact.
    Polynomial,
}

impl Approximant {
    pub fn as_str(self) -> &'static str {
        match self {
            Approximant::Taylor => "taylor",
            Approximant::Pade => "pade",
            Approximant::Polynomial => "polynomial",
        }
    }
}

/// The local solution curve of one step, as a function of `a`.
#[derive(Clone, Debug)]
pub struct Curve {
    pub expansion: Expansion,
    pub kind: Approximant,
    pade: Option<PadeApproximant>,
    /// Parameter of the accepted state.
    pub a_end: f64,
}

impl Curve {
    /// `[x(a); λ(a)]`
    pub fn point(&self, a: f64) -> Vec<f64> {
        match &self.pade {
            Some(p) if self.kind == Approximant::Pade => p.eval(a),
            _ => self.expansion.eval_joint(a, self.expansion.order()),
        }
    }

    pub fn lambda(&self, a: f64) -> f64 {
        *self.point(a).last().unwrap()
    }

    /// State `x` on this step where `λ` first reaches `target`, if it does
    /// within the accepted range.
    pub fn state_at_lambda(&self, target: f64) -> Option<Vec<f64>> {
        let a = first_crossing(|a| self.lambda(a), target, self.a_end)?;
        let mut u = self.point(a);
        u.pop();
        Some(u)
    }
}

/// Smallest `a ∈ (0, a_max]` with `λ(a) ≥ target`, to a relative 1e-12
/// in `a`.
fn first_crossing(lam: impl Fn(f64) -> f64, target: f64, a_max: f64) -> Option<f64> {
    if lam(0.0) >= target {
        return Some(0.0);
    }
    let samples = 64;
    let mut lo = 0.0;
    for s in 1..=samples {
        let a = a_max * s as f64 / samples as f64;
        if lam(a) >= target {
            let mut hi = a;
            while hi - lo > 1e-12 * hi {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if lam(mid) >= target {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Some(hi);
        }
        lo = a;
    }
    None
}

/// One accepted continuation step.
#[derive(Clone, Debug)]
pub struct StepRecord {
    /// `λ` at the start and end of the step.
    pub lambda_start: f64,
    pub lambda: f64,
    pub a_r: f64,
    pub a_p: Option<f64>,
    /// `max(a_r, a_p)`
    pub a_m: f64,
    /// Parameter of the accepted state, at most `a_m`.
    pub a: f64,
    pub kind: Approximant,
    /// Padé was requested but could not be built.
    pub pade_fallback: bool,
    /// RMS residual of the target system at the accepted state.
    pub residual_rms: f64,
    pub x: Vec<f64>,
    pub curve: Option<Curve>,
}

#[derive(Clone, Debug, Default)]
pub struct ContinuationTrace {
    pub steps: Vec<StepRecord>,
}

impl ContinuationTrace {
    pub fn iterations(&self) -> usize {
        self.steps.len()
    }

    /// Intermediate state at `λ` from the kept approximants.
    pub fn state_at(&self, lambda: f64) -> Option<Vec<f64>> {
        let s = self
            .steps
            .iter()
            .find(|s| s.lambda_start <= lambda && lambda <= s.lambda)?;
        s.curve.as_ref()?.state_at_lambda(lambda)
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub x: Vec<f64>,
    pub lambda: f64,
    pub residual_rms: f64,
    pub trace: ContinuationTrace,
}

/// Expansion plus the step-size decision for it.
fn plan_step(
    h: &Homotopy,
    x: &[f64],
    lambda: f64,
    target: f64,
    opts: &Options,
    check_start: bool,
) -> Result<(Curve, f64, Option<f64>, f64, bool)> {
    let n = opts.order.max(1);
    let e = solve_coefficients(h, x, lambda, n, check_start)?;
    let (u1, un) = (e.joint(1), e.joint(n));
    let mut fallback = false;
    let mut a_p = None;
    // A numerically straight curve is exact as a polynomial.
    let straight = (2..=n).all(|k| norm(&e.joint(k)) <= 1e-14 * norm(&u1));
    let (a_r, mut kind) = match rov_taylor(&u1, &un, n, opts.eps_rov).filter(|_| !straight) {
        Some(a) => (a, Approximant::Taylor),
        None => {
            // Exact polynomial: reach past the target.
            let mut a = 1.0;
            while e.eval_lambda(a) < target && a < 1e12 {
                a *= 2.0;
            }
            (a, Approximant::Polynomial)
        }
    };
    let mut a_m = a_r;
    let mut pade = None;
    if opts.pade && kind == Approximant::Taylor && n >= 3 {
        let u: Vec<Vec<f64>> = (0..=n).map(|k| e.joint(k)).collect();
        match (PadeApproximant::new(&u), PadeApproximant::new(&u[..n])) {
            (Some(pn), Some(pn1)) => {
                let ap = rov_pade(&pn, &pn1, a_r, opts.eps_rov);
                a_p = Some(ap);
                if ap > a_r {
                    a_m = ap;
                    kind = Approximant::Pade;
                    pade = Some(pn);
                }
            }
            _ => fallback = true,
        }
    }
    Ok((
        Curve {
            expansion: e,
            kind,
            pade,
            a_end: a_m,
        },
        a_r,
        a_p,
        a_m,
        fallback,
    ))
}

/// Accepts the largest `a ≤ a_m` (halving from the λ-target point) whose
/// state advances `λ` and passes `accept`.
fn choose_a(
    curve: &Curve,
    lambda: f64,
    target: f64,
    a_m: f64,
    iteration: usize,
    accept: &mut dyn FnMut(&[f64], f64) -> Result<bool>,
    blocked: &mut Option<Error>,
) -> Result<(f64, Vec<f64>, f64)> {
    let hit = first_crossing(|a| curve.lambda(a), target, a_m);
    let mut a = hit.unwrap_or(a_m);
    let mut on_target = hit.is_some();
    let mut last_err = None;
    while a >= 1e-12 {
        let mut u = curve.point(a);
        let l = if on_target { target } else { *u.last().unwrap() };
        u.pop();
        if l > lambda && u.iter().all(|v| v.is_finite()) {
            match accept(&u, l) {
                Ok(true) => return Ok((a, u, l)),
                Ok(false) => {}
                Err(e) => {
                    *blocked = Some(e.clone());
                    last_err = Some(e);
                }
            }
        }
        a *= 0.5;
        on_target = false;
    }
    Err(last_err.unwrap_or(Error::NoProgress { iteration, step: a }))
}

/// Follows `H(x, λ) = 0` from `(x0, λ0)` until `λ = λ_t`. `validate` may
/// reject a state (for example an inverted element); the step then shrinks.
pub fn continuation(
    h: &Homotopy,
    x0: &[f64],
    lambda0: f64,
    lambda_t: f64,
    opts: &Options,
    validate: &mut dyn FnMut(&[f64], f64) -> Result<()>,
) -> Result<Solution> {
    let mut x = x0.to_vec();
    let mut lambda = lambda0;
    let mut trace = ContinuationTrace::default();
    // Last state rejected by `validate`: when the run later stalls, that
    // rejection is the likely cause and is reported instead.
    let mut blocked = None;
    let mut residual = rms(&h.eval(&x, lambda)?);
    while lambda < lambda_t {
        let it = trace.steps.len();
        if it >= opts.max_iter {
            return Err(Error::MaxIterations {
                limit: opts.max_iter,
            });
        }
        let (mut curve, a_r, a_p, a_m, fallback) =
            plan_step(h, &x, lambda, lambda_t, opts, it == 0).map_err(|e| blocked.take().unwrap_or(e))?;
        if !(a_m >= 1e-12) {
            return Err(blocked.take().unwrap_or(Error::NoProgress {
                iteration: it,
                step: a_m,
            }));
        }
        let (a, xn, ln) = choose_a(
            &curve,
            lambda,
            lambda_t,
            a_m,
            it,
            &mut |u, l| validate(u, l).map(|_| true),
            &mut blocked,
        )
        .map_err(|e| blocked.take().unwrap_or(e))?;
        residual = rms(&h.eval(&xn, ln)?);
        curve.a_end = a;
        trace.steps.push(StepRecord {
            lambda_start: lambda,
            lambda: ln,
            a_r,
            a_p,
            a_m,
            a,
            kind: curve.kind,
            pade_fallback: fallback,
            residual_rms: residual,
            x: xn.clone(),
            curve: opts.keep_approximants.then_some(curve),
        });
        x = xn;
        lambda = ln;
    }
    Ok(Solution {
        x,
        lambda,
        residual_rms: residual,
        trace,
    })
}

/// Solves `f(x) + v = 0` from `x0`, redefining the homotopy at every step
/// so that it passes through the current state and absorbs its residual.
/// Stops once the residual RMS is below `opts.eps_res`. Steps never
/// increase the residual.
pub fn equational_continuation(
    f: &ComputeGraph,
    v: &[f64],
    x0: &[f64],
    opts: &Options,
    validate: &mut dyn FnMut(&[f64], f64) -> Result<()>,
) -> Result<Solution> {
    let mut x = x0.to_vec();
    let mut fx = f.output(&x, 0.0)?;
    let resid = |fx: &[f64]| -> Vec<f64> { fx.iter().zip(v).map(|(a, b)| a + b).collect() };
    let mut res = rms(&resid(&fx));
    let mut trace = ContinuationTrace::default();
    let mut blocked = None;
    while !(res < opts.eps_res) {
        let it = trace.steps.len();
        if it >= opts.max_iter {
            return Err(Error::MaxIterations {
                limit: opts.max_iter,
            });
        }
        let h = Homotopy::residual_form(f, &fx, v);
        let (mut curve, a_r, a_p, a_m, fallback) =
            plan_step(&h, &x, 0.0, 1.0, opts, false).map_err(|e| blocked.take().unwrap_or(e))?;
        if !(a_m >= 1e-12) {
            return Err(blocked.take().unwrap_or(Error::NoProgress {
                iteration: it,
                step: a_m,
            }));
        }
        let mut next = None;
        let mut accept = |u: &[f64], l: f64| {
            validate(u, l)?;
            let fu = f.output(u, 0.0)?;
            let r = rms(&resid(&fu));
            if r <= res * (1.0 + 1e-6) {
                next = Some((fu, r));
                Ok(true)
            } else {
                Ok(false)
            }
        };
        let (a, xn, ln) = choose_a(&curve, 0.0, 1.0, a_m, it, &mut accept, &mut blocked)
            .map_err(|e| blocked.take().unwrap_or(e))?;
        let (fu, r) = next.unwrap();
        curve.a_end = a;
        trace.steps.push(StepRecord {
            lambda_start: 0.0,
            lambda: ln,
            a_r,
            a_p,
            a_m,
            a,
            kind: curve.kind,
            pade_fallback: fallback,
            residual_rms: r,
            x: xn.clone(),
            curve: opts.keep_approximants.then_some(curve),
        });
        x = xn;
        fx = fu;
        res = r;
    }
    Ok(Solution {
        x,
        lambda: 1.0,
        residual_rms: res,
        trace,
    })
}
