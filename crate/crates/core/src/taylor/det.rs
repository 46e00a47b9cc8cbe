//! Determinant rule. The slope is the cofactor matrix of `X₀`; the bias is
//! the `k`-th coefficient of `det(Σ_{i<k} X_i aⁱ)`, a polynomial matrix
//! determinant computed either by the Leibniz expansion or by evaluation at
//! roots of unity.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

use super::{item_of, series_shape, term};
use crate::error::{Error, Result};
use crate::tensor::fft::{dft_batch, Direction};
use crate::tensor::{dense, svd, BatchedTensor, Shape};

/// Cofactor matrix `C = det(U)·det(V)·U·D·Vᵀ` with `D_ii = Π_{j≠i} σ_j`,
/// which needs no division by singular values.
pub fn cofactor(x0: &BatchedTensor) -> Result<BatchedTensor> {
    let s = x0.shape();
    if !s.is_square() {
        return Err(Error::Shape(alloc::format!("det of non-square {s:?}")));
    }
    let m = s.rows;
    let vals = x0.values();
    let n = s.item_len();
    Ok(BatchedTensor::par_from_items(s, |b, c| {
        let svd::Svd { u, s: sig, v } = svd::svd(&vals[b * n..(b + 1) * n], m);
        let sign = dense::det(&u, m) * dense::det(&v, m);
        let mut ud = u;
        for i in 0..m {
            let d: f64 = (0..m).filter(|&j| j != i).map(|j| sig[j]).product();
            for r in 0..m {
                ud[r * m + i] *= d * sign;
            }
        }
        let vt = dense::transpose(&v, m, m);
        dense::matmul(&ud, &vt, m, m, m, c);
    }))
}

/// Order-`k` coefficient `Σ C ⊙ X_k + q_k`, shaped `batch × 1 × 1`.
pub fn det_coeff(k: usize, x: &[BatchedTensor], cof: &BatchedTensor) -> Result<BatchedTensor> {
    let bias = det_bias(k, x)?;
    let Some(xk) = term(x, k) else {
        return Ok(bias);
    };
    let s = xk.shape();
    let (xv, cv) = (xk.data().unwrap(), cof.values());
    let n = s.item_len();
    let slope = BatchedTensor::par_from_items(Shape::scalar(s.batch), |b, out| {
        out[0] = (0..n).map(|e| xv[b * n + e] * cv[b * n + e]).sum();
    });
    slope.add(&bias)
}

/// Bias by Leibniz expansion for `m ≤ 3`, by FFT otherwise.
pub fn det_bias(k: usize, x: &[BatchedTensor]) -> Result<BatchedTensor> {
    if series_shape(x).rows <= 3 {
        det_bias_leibniz(k, x)
    } else {
        det_bias_fft(k, x)
    }
}

fn permutations(m: usize) -> Vec<(Vec<usize>, f64)> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                prefix.push(j);
                rec(prefix, used, out);
                prefix.pop();
                used[j] = false;
            }
        }
    }
    let mut all = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; m], &mut all);
    all.into_iter()
        .map(|p| {
            let inversions = (0..m)
                .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
                .filter(|&(i, j)| p[i] > p[j])
                .count();
            (p, if inversions % 2 == 0 { 1.0 } else { -1.0 })
        })
        .collect()
}

fn lower_terms(x: &[BatchedTensor], k: usize) -> Vec<usize> {
    (0..k.min(x.len())).filter(|&i| term(x, i).is_some()).collect()
}

/// `q_k` through `Σ_σ sgn(σ) Π_i X_{i,σ(i)}(a)`.
pub fn det_bias_leibniz(k: usize, x: &[BatchedTensor]) -> Result<BatchedTensor> {
    let s = series_shape(x);
    if !s.is_square() {
        return Err(Error::Shape(alloc::format!("det of non-square {s:?}")));
    }
    let m = s.rows;
    let out = Shape::scalar(s.batch);
    let live = lower_terms(x, k);
    if live.is_empty() || k == 0 {
        return Ok(BatchedTensor::zeros(out));
    }
    let perms = permutations(m);
    Ok(BatchedTensor::par_from_items(out, |b, o| {
        let items: Vec<(usize, &[f64])> = live
            .iter()
            .filter_map(|&i| item_of(x, i, b).map(|d| (i, d)))
            .collect();
        let mut total = 0.0;
        let mut acc = vec![0.0; k + 1];
        let mut next = vec![0.0; k + 1];
        for (p, sign) in &perms {
            acc.fill(0.0);
            acc[0] = 1.0;
            for (r, &c) in p.iter().enumerate() {
                next.fill(0.0);
                for (d, &a) in acc.iter().enumerate() {
                    if a == 0.0 {
                        continue;
                    }
                    for &(i, xi) in &items {
                        if d + i <= k {
                            next[d + i] += a * xi[r * m + c];
                        }
                    }
                }
                core::mem::swap(&mut acc, &mut next);
            }
            total += sign * acc[k];
        }
        o[0] = total;
    }))
}

fn complex_det(a: &mut [Complex64], m: usize) -> Complex64 {
    let mut d = Complex64::new(1.0, 0.0);
    for c in 0..m {
        let p = (c..m)
            .max_by(|&i, &j| a[i * m + c].norm().total_cmp(&a[j * m + c].norm()))
            .unwrap();
        if a[p * m + c].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if p != c {
            for j in 0..m {
                a.swap(p * m + j, c * m + j);
            }
            d = -d;
        }
        let piv = a[c * m + c];
        d *= piv;
        for r in c + 1..m {
            let f = a[r * m + c] / piv;
            for j in c..m {
                let t = a[c * m + j];
                a[r * m + j] -= f * t;
            }
        }
    }
    d
}

/// `q_k` by evaluating `det(Σ_{l<k} X_l ω^{il})` at `K` roots of unity and
/// reading coefficient `k` of the inverse transform. `K` is the smallest
/// power of two above the degree `m(k−1)`, so no coefficient aliases onto
/// index `k`.
pub fn det_bias_fft(k: usize, x: &[BatchedTensor]) -> Result<BatchedTensor> {
    let s = series_shape(x);
    if !s.is_square() {
        return Err(Error::Shape(alloc::format!("det of non-square {s:?}")));
    }
    let m = s.rows;
    let out = Shape::scalar(s.batch);
    let live = lower_terms(x, k);
    if live.is_empty() || k == 0 {
        return Ok(BatchedTensor::zeros(out));
    }
    let kk = (m * (k - 1) + 1).max(k + 1).next_power_of_two();
    let n = m * m;
    BatchedTensor::try_par_from_items(out, |b, o| {
        let mut y = vec![Complex64::new(0.0, 0.0); kk * n];
        for &l in &live {
            if let Some(xl) = item_of(x, l, b) {
                for e in 0..n {
                    y[l * n + e] = Complex64::new(xl[e], 0.0);
                }
            }
        }
        dft_batch(&mut y, n, Direction::Forward)?;
        let mut d: Vec<Complex64> = y.chunks_mut(n).map(|blk| complex_det(blk, m)).collect();
        dft_batch(&mut d, 1, Direction::Inverse)?;
        o[0] = d[k].re;
        Ok(())
    })
}
