//! Small dense row-major matrix kernels used per batch item.

use alloc::vec;
use alloc::vec::Vec;

/// `c = a · b` with `a: m×k`, `b: k×n`.
pub fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, c: &mut [f64]) {
    for i in 0..m {
        for j in 0..n {
            let mut s = 0.0;
            for p in 0..k {
                s += a[i * k + p] * b[p * n + j];
            }
            c[i * n + j] = s;
        }
    }
}

/// `c += a · b`
pub fn matmul_acc(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, c: &mut [f64]) {
    for i in 0..m {
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i * n + j] += aip * b[p * n + j];
            }
        }
    }
}

pub fn transpose(a: &[f64], m: usize, n: usize) -> Vec<f64> {
    let mut t = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            t[j * m + i] = a[i * n + j];
        }
    }
    t
}

/// Determinant of an `m × m` matrix. Closed form up to 3×3, partial-pivot
/// elimination beyond.
pub fn det(a: &[f64], m: usize) -> f64 {
    match m {
        0 => 1.0,
        1 => a[0],
        2 => a[0] * a[3] - a[1] * a[2],
        3 => {
            a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6])
                + a[2] * (a[3] * a[7] - a[4] * a[6])
        }
        _ => {
            let mut w = a.to_vec();
            let mut d = 1.0;
            for c in 0..m {
                let p = (c..m)
                    .max_by(|&i, &j| w[i * m + c].abs().total_cmp(&w[j * m + c].abs()))
                    .unwrap_or(c);
                if w[p * m + c] == 0.0 {
                    return 0.0;
                }
                if p != c {
                    for j in 0..m {
                        w.swap(p * m + j, c * m + j);
                    }
                    d = -d;
                }
                let piv = w[c * m + c];
                d *= piv;
                for r in c + 1..m {
                    let f = w[r * m + c] / piv;
                    if f != 0.0 {
                        for j in c..m {
                            w[r * m + j] -= f * w[c * m + j];
                        }
                    }
                }
            }
            d
        }
    }
}

/// Inverse by Gauss–Jordan elimination with partial pivoting. Returns
/// `None` when a pivot falls below `m·ε·‖a‖∞`.
pub fn inverse(a: &[f64], m: usize) -> Option<Vec<f64>> {
    let scale = (0..m)
        .map(|i| a[i * m..(i + 1) * m].iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    if !(scale > 0.0) || !scale.is_finite() {
        return None;
    }
    let tol = scale * f64::EPSILON * m as f64;
    let mut w = a.to_vec();
    let mut inv = vec![0.0; m * m];
    for i in 0..m {
        inv[i * m + i] = 1.0;
    }
    for c in 0..m {
        let p = (c..m).max_by(|&i, &j| w[i * m + c].abs().total_cmp(&w[j * m + c].abs()))?;
        if w[p * m + c].abs() <= tol {
            return None;
        }
        if p != c {
            for j in 0..m {
                w.swap(p * m + j, c * m + j);
                inv.swap(p * m + j, c * m + j);
            }
        }
        let piv = 1.0 / w[c * m + c];
        for j in 0..m {
            w[c * m + j] *= piv;
            inv[c * m + j] *= piv;
        }
        for r in 0..m {
            if r == c {
                continue;
            }
            let f = w[r * m + c];
            if f != 0.0 {
                for j in 0..m {
                    w[r * m + j] -= f * w[c * m + j];
                    inv[r * m + j] -= f * inv[c * m + j];
                }
            }
        }
    }
    Some(inv)
}

/// Solves `a x = b` for a small dense square system; `None` if singular.
pub fn solve(a: &[f64], b: &[f64], m: usize) -> Option<Vec<f64>> {
    let inv = inverse(a, m)?;
    let mut x = vec![0.0; m];
    matmul(&inv, b, m, m, 1, &mut x);
    Some(x)
}

pub fn identity(m: usize) -> Vec<f64> {
    let mut i = vec![0.0; m * m];
    for k in 0..m {
        i[k * m + k] = 1.0;
    }
    i
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn det_paths_agree() {
        let a = [2.0, -1.0, 0.5, 0.3, 4.0, 1.0, -2.0, 0.7, 3.0];
        let d3 = det(&a, 3);
        // embed in 4x4 with a unit diagonal entry to exercise elimination
        let mut b = vec![0.0; 16];
        for i in 0..3 {
            for j in 0..3 {
                b[i * 4 + j] = a[i * 3 + j];
            }
        }
        b[15] = 1.0;
        assert!((det(&b, 4) - d3).abs() < 1e-12);
    }

    #[test]
    fn inverse_roundtrip() {
        let a = [4.0, 1.0, 2.0, 0.5, 3.0, -1.0, 1.0, 0.0, 5.0];
        let inv = inverse(&a, 3).unwrap();
        let mut p = [0.0; 9];
        matmul(&a, &inv, 3, 3, 3, &mut p);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((p[i * 3 + j] - e).abs() < 1e-14);
            }
        }
        assert!(inverse(&[1.0, 2.0, 2.0, 4.0], 2).is_none());
    }
}
