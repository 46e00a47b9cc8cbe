//! Range-of-validity estimates and vector Padé approximants.

use alloc::vec;
use alloc::vec::Vec;

use crate::{dot, norm};

/// `(ε · ‖u₁‖ / ‖u_N‖)^{1/(N−1)}`, or `None` when `u_N` vanishes relative
/// to `u₁` and the series is a polynomial.
pub fn rov_taylor(u1: &[f64], un: &[f64], order: usize, eps: f64) -> Option<f64> {
    let (n1, nn) = (norm(u1), norm(un));
    if !(nn > 0.0) || order < 2 {
        return None;
    }
    Some(libm::pow(eps * n1 / nn, 1.0 / (order as f64 - 1.0)))
}

/// Rational approximant `P(a) = u₀ + Σ_{i=1}^{M−1} D_{M−1−i}(a)/D_{M−1}(a) · u_i aⁱ`
/// built from coefficients `u₀..u_M`, where `D_r` is the degree-`r`
/// truncation of the denominator. The denominator removes the components of
/// the order-`M` coefficient along `u₁..u_{M−1}`, which are orthonormalized
/// first. Any denominator with `d_0 = 1` keeps the expansion exact through
/// order `M−1`.
#[derive(Clone, Debug)]
pub struct PadeApproximant {
    coeffs: Vec<Vec<f64>>,
    /// `d_0 = 1, d_1, …, d_{M−1}`
    denom: Vec<f64>,
}

impl PadeApproximant {
    /// `None` when fewer than three coefficients are given or the
    /// denominator is not finite.
    pub fn new(u: &[Vec<f64>]) -> Option<Self> {
        if u.len() < 3 {
            return None;
        }
        let m = u.len() - 1;
        // alpha[i][j] = <u_i, e_j> for j ≤ i, i = 1..=m; e_j is the basis
        // vector introduced by u_j, if any.
        let mut basis: Vec<(usize, Vec<f64>)> = Vec::with_capacity(m - 1);
        let mut alpha = vec![vec![0.0; m + 1]; m + 1];
        for i in 1..=m {
            let mut w = u[i].clone();
            for _ in 0..2 {
                for (j, e) in &basis {
                    let c = dot(&w, e);
                    alpha[i][*j] += c;
                    w.iter_mut().zip(e).for_each(|(a, b)| *a -= c * b);
                }
            }
            if i < m {
                let r = norm(&w);
                // A dependent direction adds no basis vector; its
                // denominator coefficient is left at zero below.
                if r > 1e-10 * norm(&u[i]) {
                    alpha[i][i] = r;
                    basis.push((i, w.iter().map(|a| a / r).collect()));
                }
            }
        }
        let mut d = vec![0.0; m];
        d[0] = 1.0;
        for j in (1..m).rev() {
            if alpha[j][j] != 0.0 {
                let s: f64 = (j + 1..=m).map(|i| d[m - i] * alpha[i][j]).sum();
                d[m - j] = -s / alpha[j][j];
            }
        }
        if d.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(PadeApproximant {
            coeffs: u[..m].to_vec(),
            denom: d,
        })
    }

    pub fn denominator(&self) -> &[f64] {
        &self.denom
    }

    fn denom_trunc(&self, r: usize, a: f64) -> f64 {
        self.denom[..=r].iter().rev().fold(0.0, |acc, c| acc * a + c)
    }

    pub fn eval(&self, a: f64) -> Vec<f64> {
        let m = self.denom.len();
        let dm = self.denom_trunc(m - 1, a);
        let mut out = self.coeffs[0].clone();
        let mut ai = 1.0;
        for i in 1..m {
            ai *= a;
            let w = self.denom_trunc(m - 1 - i, a) / dm * ai;
            out.iter_mut().zip(&self.coeffs[i]).for_each(|(o, c)| *o += w * c);
        }
        out
    }

    /// Smallest root of the full denominator in `(0, cap]`.
    pub fn smallest_pole(&self, cap: f64) -> Option<f64> {
        let m = self.denom.len();
        let f = |a: f64| self.denom_trunc(m - 1, a);
        let samples = 4096;
        let mut prev = (0.0, f(0.0));
        for s in 1..=samples {
            let a = cap * s as f64 / samples as f64;
            let fa = f(a);
            if fa == 0.0 {
                return Some(a);
            }
            if fa.signum() != prev.1.signum() {
                return Some(bisect(&f, prev.0, a, 1e-15 * cap));
            }
            prev = (a, fa);
        }
        None
    }
}

/// Root of `f` in `[lo, hi]` given a sign change.
fn bisect(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid).signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Padé step estimate: the largest `a` in `(a_r, r)` by bisection at which
/// `‖P_N(a) − P_{N−1}(a)‖ / ‖P_N(a) − P_N(0)‖ ≤ ε`, where `r` is the
/// smallest pole of `P_N` (or `100·a_r` without one). Returns `a_r` when
/// the criterion already fails there.
pub fn rov_pade(pn: &PadeApproximant, pn1: &PadeApproximant, a_r: f64, eps: f64) -> f64 {
    let cap = 100.0 * a_r;
    let r = pn.smallest_pole(cap).unwrap_or(cap);
    if r <= a_r {
        return a_r;
    }
    let p0 = pn.eval(0.0);
    let ok = |a: f64| {
        let x = pn.eval(a);
        let y = pn1.eval(a);
        let num: f64 = x.iter().zip(&y).map(|(p, q)| (p - q) * (p - q)).sum();
        let den: f64 = x.iter().zip(&p0).map(|(p, q)| (p - q) * (p - q)).sum();
        let c = libm::sqrt(num) / libm::sqrt(den);
        c <= eps
    };
    if !ok(a_r) {
        return a_r;
    }
    let (mut lo, mut hi) = (a_r, r);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_series() {
        // 1/(1−a) as a 2-vector series (1, 2)·aⁱ
        let u: Vec<Vec<f64>> = (0..=8).map(|_| vec![1.0, 2.0]).collect();
        let p = PadeApproximant::new(&u).unwrap();
        let v = p.eval(0.9);
        assert!((v[0] - 10.0).abs() < 1e-3 && (v[1] - 20.0).abs() < 2e-3, "{v:?}");
        let pole = p.smallest_pole(10.0).unwrap();
        assert!((pole - 1.0).abs() < 1e-10, "{pole}");
    }

    #[test]
    fn polynomial_has_no_taylor_range() {
        assert!(rov_taylor(&[1.0], &[0.0], 5, 1e-4).is_none());
        let a = rov_taylor(&[1.0], &[1e6], 20, 1e-6).unwrap();
        assert!((a - libm::pow(1e-12, 1.0 / 19.0)).abs() < 1e-12);
    }
}
