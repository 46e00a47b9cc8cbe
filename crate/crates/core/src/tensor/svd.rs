//! Square SVD by one-sided Jacobi rotations, and the batched SVD-W form
//! `U Σ Uᵀ W = X` with `W = U Vᵀ`.

use alloc::vec;
use alloc::vec::Vec;

use super::{dense, BatchedTensor, Shape};
use crate::error::{Error, Result};

/// Relative tolerance under which singular values count as equal when
/// choosing which group to negate for a proper rotation.
pub const GROUP_TOL: f64 = 1e-8;

/// Thin SVD of a square matrix, `a = u · diag(s) · vᵀ`, singular values in
/// non-increasing order. All matrices row-major.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: Vec<f64>,
    pub s: Vec<f64>,
    pub v: Vec<f64>,
}

pub fn svd(a: &[f64], m: usize) -> Svd {
    // columns of `w` converge to u_j σ_j, `v` accumulates the rotations
    let mut w = a.to_vec();
    let mut v = dense::identity(m);
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..m {
            for q in p + 1..m {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for r in 0..m {
                    let (wp, wq) = (w[r * m + p], w[r * m + q]);
                    alpha += wp * wp;
                    beta += wq * wq;
                    gamma += wp * wq;
                }
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * libm::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                for r in 0..m {
                    let (wp, wq) = (w[r * m + p], w[r * m + q]);
                    w[r * m + p] = c * wp - s * wq;
                    w[r * m + q] = s * wp + c * wq;
                    let (vp, vq) = (v[r * m + p], v[r * m + q]);
                    v[r * m + p] = c * vp - s * vq;
                    v[r * m + q] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..m)
        .map(|j| libm::sqrt((0..m).map(|r| w[r * m + j] * w[r * m + j]).sum()))
        .collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let smax = norms.iter().fold(0.0f64, |a, &b| a.max(b));
    let mut u = vec![0.0; m * m];
    let mut vs = vec![0.0; m * m];
    let mut s = vec![0.0; m];
    for (k, &j) in order.iter().enumerate() {
        s[k] = norms[j];
        for r in 0..m {
            vs[r * m + k] = v[r * m + j];
            if norms[j] > 0.0 {
                u[r * m + k] = w[r * m + j] / norms[j];
            }
        }
    }
    // tiny or vanishing singular values: re-orthogonalize or complete the basis
    for k in 0..m {
        if s[k] > smax * 1e-10 && s[k] > 0.0 {
            continue;
        }
        let mut candidates: Vec<Vec<f64>> = Vec::new();
        if s[k] > 0.0 {
            candidates.push((0..m).map(|r| u[r * m + k]).collect());
        }
        for e in 0..m {
            let mut c = vec![0.0; m];
            c[e] = 1.0;
            candidates.push(c);
        }
        for mut c in candidates {
            for _ in 0..2 {
                for j in 0..k {
                    let d: f64 = (0..m).map(|r| u[r * m + j] * c[r]).sum();
                    for r in 0..m {
                        c[r] -= d * u[r * m + j];
                    }
                }
            }
            let n = crate::norm(&c);
            if n > 0.5 || (s[k] > 0.0 && n > 1e-3) {
                for r in 0..m {
                    u[r * m + k] = c[r] / n;
                }
                break;
            }
        }
    }
    Svd { u, s, v: vs }
}

/// Per-item SVD-W factors of a batch of square matrices.
#[derive(Clone, Debug)]
pub struct SvdWTriple {
    /// `batch × m × m`, orthonormal.
    pub u: BatchedTensor,
    /// `batch × m × 1`, non-increasing in magnitude. In rotation-variant
    /// mode one group of equal values may be negated.
    pub sigma: BatchedTensor,
    /// `batch × m × m`, orthonormal; `W = U Vᵀ`.
    pub w: BatchedTensor,
}

/// Index range of the group to negate so that `det(U Vᵀ)` flips sign:
/// the odd-sized group of (relatively) equal singular values with the
/// smallest values.
pub fn negation_group(s: &[f64]) -> (usize, usize) {
    let m = s.len();
    let tol = GROUP_TOL * s.first().copied().unwrap_or(0.0).abs().max(f64::MIN_POSITIVE);
    let mut groups = Vec::new();
    let mut start = 0;
    for i in 1..=m {
        if i == m || (s[i - 1] - s[i]).abs() > tol {
            groups.push((start, i));
            start = i;
        }
    }
    groups
        .iter()
        .rev()
        .find(|(a, b)| (b - a) % 2 == 1)
        .copied()
        .unwrap_or((m.saturating_sub(1), m))
}

/// SVD-W of one `m × m` item, written into `u`, `sigma`, `w`.
pub fn svd_w_item(x: &[f64], m: usize, rotation_variant: bool) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let Svd { u, mut s, mut v } = svd(x, m);
    let mut w = vec![0.0; m * m];
    let vt = dense::transpose(&v, m, m);
    dense::matmul(&u, &vt, m, m, m, &mut w);
    if rotation_variant && dense::det(&w, m) < 0.0 {
        let (a, b) = negation_group(&s);
        for k in a..b {
            s[k] = -s[k];
            for r in 0..m {
                v[r * m + k] = -v[r * m + k];
            }
        }
        let vt = dense::transpose(&v, m, m);
        dense::matmul(&u, &vt, m, m, m, &mut w);
    }
    (u, s, w)
}

/// Batched SVD-W. Non-finite input is a domain error.
pub fn batched_svd_w(x: &BatchedTensor, rotation_variant: bool) -> Result<SvdWTriple> {
    let sh = x.shape();
    if !sh.is_square() {
        return Err(Error::Shape(alloc::format!("svd_w of non-square {sh:?}")));
    }
    let m = sh.rows;
    let vals = x.values();
    let n = sh.item_len();
    for b in 0..sh.batch {
        if vals[b * n..(b + 1) * n].iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("svd_w", b, "non-finite input"));
        }
    }
    let item_out = 2 * n + m;
    let packed = BatchedTensor::par_from_items(Shape::new(sh.batch, 1, item_out), |b, out| {
        let (u, s, w) = svd_w_item(&vals[b * n..(b + 1) * n], m, rotation_variant);
        out[..n].copy_from_slice(&u);
        out[n..n + m].copy_from_slice(&s);
        out[n + m..].copy_from_slice(&w);
    });
    let p = packed.data().unwrap_or(&[]);
    let pick = |off: usize, len: usize, shape: Shape| {
        let mut d = Vec::with_capacity(sh.batch * len);
        for b in 0..sh.batch {
            d.extend_from_slice(&p[b * item_out + off..b * item_out + off + len]);
        }
        BatchedTensor::from_vec(shape, d)
    };
    Ok(SvdWTriple {
        u: pick(0, n, sh)?,
        sigma: pick(n, m, Shape::new(sh.batch, m, 1))?,
        w: pick(n + m, n, sh)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_item(x: &[f64], m: usize, rv: bool) {
        let (u, s, w) = svd_w_item(x, m, rv);
        let ut = dense::transpose(&u, m, m);
        let wt = dense::transpose(&w, m, m);
        let mut t = vec![0.0; m * m];
        dense::matmul(&ut, &u, m, m, m, &mut t);
        assert_close(&t, &dense::identity(m), 1e-12);
        dense::matmul(&wt, &w, m, m, m, &mut t);
        assert_close(&t, &dense::identity(m), 1e-12);
        // U diag(s) Uᵀ W
        let mut us = u.clone();
        for r in 0..m {
            for c in 0..m {
                us[r * m + c] *= s[c];
            }
        }
        let mut p = vec![0.0; m * m];
        dense::matmul(&us, &ut, m, m, m, &mut p);
        dense::matmul(&p, &w, m, m, m, &mut t);
        assert_close(&t, x, 1e-12);
        if rv {
            assert!(dense::det(&w, m) > 0.0);
        }
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn identity_and_rotation() {
        check_item(&dense::identity(3), 3, false);
        let (c, s) = (libm::cos(0.7), libm::sin(0.7));
        let r = [c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0];
        let (_, sig, w) = svd_w_item(&r, 3, true);
        assert_close(&sig, &[1.0, 1.0, 1.0], 1e-14);
        assert_close(&w, &r, 1e-14);
    }

    #[test]
    fn reflection_is_made_proper() {
        let x = [2.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0];
        check_item(&x, 3, true);
        let (_, s, _) = svd_w_item(&x, 3, true);
        // {1, 1} is an even group, so the odd group {2} gets negated
        assert_close(&s, &[-2.0, 1.0, 1.0], 1e-14);
    }

    #[test]
    fn rank_deficient_completes_basis() {
        check_item(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0], 3, false);
        check_item(&[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 1.0, 1.0, 1.0], 3, false);
        check_item(&[0.0; 9], 3, true);
    }

    #[test]
    fn groups() {
        assert_eq!(negation_group(&[3.0, 2.0, 1.0]), (2, 3));
        assert_eq!(negation_group(&[2.0, 1.0, 1.0]), (0, 1));
        assert_eq!(negation_group(&[1.0, 1.0, 1.0]), (0, 3));
    }
}
