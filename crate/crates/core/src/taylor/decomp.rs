//! SVD-W and polar decomposition rules.
//!
//! SVD-W factors `X = U Σ Uᵀ W` with `W = U Vᵀ`. At order `k` the
//! unknowns `U_k`, `Σ_k`, `W_k` enter the expansion through
//! `E = X_k − R` (`R` collects every product of lower-order factors).
//! Rotating `E` into the frame of `U₀` and using the expanded orthogonality
//! constraints separates the diagonal (giving `Σ_k`), the antisymmetric
//! part (a Sylvester equation for `W_k`), and the rest (a Sylvester
//! equation for `U₀ᵀU_k`). The polar form `X = P W` with symmetric `P`
//! avoids `U_k` entirely and stays well defined under repeated singular
//! values.

use alloc::vec;
use alloc::vec::Vec;

use super::{broadened_div, item_of, series_shape, spectral_scale, sylvester_sym};
use crate::error::{Error, Result};
use crate::tensor::{dense, BatchedTensor, Shape};

fn mm(a: &[f64], b: &[f64], m: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * m];
    dense::matmul(a, b, m, m, m, &mut c);
    c
}

fn mm_acc(c: &mut [f64], a: &[f64], b: &[f64], m: usize) {
    dense::matmul_acc(a, b, m, m, m, c);
}

fn tr(a: &[f64], m: usize) -> Vec<f64> {
    dense::transpose(a, m, m)
}

/// `a · diag(s)`
fn scale_cols(a: &[f64], s: &[f64], m: usize) -> Vec<f64> {
    let mut c = a.to_vec();
    for r in 0..m {
        for j in 0..m {
            c[r * m + j] *= s[j];
        }
    }
    c
}

/// `diag(s) · a`
fn scale_rows(a: &[f64], s: &[f64], m: usize) -> Vec<f64> {
    let mut c = a.to_vec();
    for i in 0..m {
        for j in 0..m {
            c[i * m + j] *= s[i];
        }
    }
    c
}

/// Dense copies of the per-item coefficients `0..len`, zero where absent.
fn gather(s: &[BatchedTensor], len: usize, b: usize, item: usize) -> Vec<Vec<f64>> {
    (0..len)
        .map(|i| item_of(s, i, b).map_or_else(|| vec![0.0; item], <[f64]>::to_vec))
        .collect()
}

/// Order-`k` SVD-W coefficients of one `m × m` item. `x` holds `X_0..X_k`
/// (a missing `X_k` reads as zero), the factor series hold orders `0..k−1`.
pub fn svdw_item(
    k: usize,
    m: usize,
    x: &[Vec<f64>],
    u: &[Vec<f64>],
    s: &[Vec<f64>],
    w: &[Vec<f64>],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = m * m;
    let zero = vec![0.0; n];
    let xk = x.get(k).unwrap_or(&zero);
    let (u0, s0, w0) = (&u[0], &s[0], &w[0]);

    // G = UΣ and H = G Uᵀ at orders below k
    let mut g: Vec<Vec<f64>> = Vec::with_capacity(k);
    for j in 0..k {
        let mut gj = vec![0.0; n];
        for a in 0..=j {
            let t = scale_cols(&u[a], &s[j - a], m);
            gj.iter_mut().zip(&t).for_each(|(o, v)| *o += v);
        }
        g.push(gj);
    }
    let mut h: Vec<Vec<f64>> = Vec::with_capacity(k);
    for j in 0..k {
        let mut hj = vec![0.0; n];
        for a in 0..=j {
            mm_acc(&mut hj, &g[a], &tr(&u[j - a], m), m);
        }
        h.push(hj);
    }
    // order-k parts of G and H built only from lower-order factors
    let mut gk = vec![0.0; n];
    for a in 1..k {
        let t = scale_cols(&u[a], &s[k - a], m);
        gk.iter_mut().zip(&t).for_each(|(o, v)| *o += v);
    }
    let mut hk = mm(&gk, &tr(u0, m), m);
    for j in 1..k {
        mm_acc(&mut hk, &g[j], &tr(&u[k - j], m), m);
    }
    let mut r = mm(&hk, w0, m);
    for j in 1..k {
        mm_acc(&mut r, &h[j], &w[k - j], m);
    }
    let e: Vec<f64> = xk.iter().zip(&r).map(|(a, b)| a - b).collect();

    let u0t = tr(u0, m);
    let w0t = tr(w0, m);
    let f = mm(&mm(&u0t, &e, m), &mm(&w0t, u0, m), m);

    let mut bu = vec![0.0; n];
    let mut bw = vec![0.0; n];
    for i in 1..k {
        mm_acc(&mut bu, &tr(&u[i], m), &u[k - i], m);
        mm_acc(&mut bw, &tr(&w[i], m), &w[k - i], m);
    }
    let u0t_w0 = mm(&u0t, w0, m);
    let cw = mm(&mm(&u0t_w0, &bw, m), &tr(&u0t_w0, m), m);

    let ft = tr(&f, m);
    let cws = scale_cols(&cw, s0, m);
    let a: Vec<f64> = (0..n).map(|i| f[i] - ft[i] - cws[i]).collect();
    let mmat = sylvester_sym(&a, s0);
    let wk = mm(&mm(u0, &mmat, m), &u0t_w0, m);

    let sk: Vec<f64> = (0..m)
        .map(|i| f[i * m + i] + s0[i] * bu[i * m + i] + 0.5 * s0[i] * cw[i * m + i])
        .collect();

    let scale = spectral_scale(s0);
    let sm = scale_rows(&mmat, s0, m);
    let sbu = scale_rows(&bu, s0, m);
    let mut omega = vec![0.0; n];
    for i in 0..m {
        for j in 0..m {
            let idx = i * m + j;
            omega[idx] = if i == j {
                -0.5 * bu[idx]
            } else {
                let bm = f[idx] - sm[idx] + sbu[idx];
                broadened_div(-bm, s0[i] - s0[j], scale)
            };
        }
    }
    let uk = mm(u0, &omega, m);
    (uk, sk, wk)
}

/// Order-`k` coefficients `(U_k, Σ_k, W_k)`.
#[derive(Clone, Debug)]
pub struct SvdWOutput {
    pub u: BatchedTensor,
    pub sigma: BatchedTensor,
    pub w: BatchedTensor,
}

/// Batched SVD-W rule for `k ≥ 1`.
pub fn svdw(
    k: usize,
    x: &[BatchedTensor],
    u: &[BatchedTensor],
    s: &[BatchedTensor],
    w: &[BatchedTensor],
) -> Result<SvdWOutput> {
    let sh = series_shape(x);
    let m = sh.rows;
    let n = sh.item_len();
    let xlen = x.len().min(k + 1);
    let item_out = 2 * n + m;
    let packed = BatchedTensor::try_par_from_items(Shape::new(sh.batch, 1, item_out), |b, out| {
        let (uk, sk, wk) = svdw_item(
            k,
            m,
            &gather(x, xlen, b, n),
            &gather(u, k, b, n),
            &gather(s, k, b, m),
            &gather(w, k, b, n),
        );
        out[..n].copy_from_slice(&uk);
        out[n..n + m].copy_from_slice(&sk);
        out[n + m..].copy_from_slice(&wk);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("svd_w", b, "non-finite coefficient"));
        }
        Ok(())
    })?;
    Ok(SvdWOutput {
        u: unpack(&packed, sh.batch, item_out, 0, sh)?,
        sigma: unpack(&packed, sh.batch, item_out, n, Shape::new(sh.batch, m, 1))?,
        w: unpack(&packed, sh.batch, item_out, n + m, sh)?,
    })
}

fn unpack(p: &BatchedTensor, batch: usize, stride: usize, off: usize, shape: Shape) -> Result<BatchedTensor> {
    let d = p.values();
    let len = shape.item_len();
    let mut v = Vec::with_capacity(batch * len);
    for b in 0..batch {
        v.extend_from_slice(&d[b * stride + off..b * stride + off + len]);
    }
    BatchedTensor::from_vec(shape, v)
}

/// Order-`k` polar coefficients `(W_k, P_k)` of one item, given `U₀`, `Σ₀`
/// of `P₀ = U₀ Σ₀ U₀ᵀ`. `None` when `Σ₀` is singular.
pub fn polar_item(
    k: usize,
    m: usize,
    x: &[Vec<f64>],
    p: &[Vec<f64>],
    w: &[Vec<f64>],
    u0: &[f64],
    s0: &[f64],
) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = m * m;
    let smax = s0.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if s0.iter().any(|v| !(v.abs() > 1e-14 * smax)) {
        return None;
    }
    let zero = vec![0.0; n];
    let xi = |i: usize| x.get(i).unwrap_or(&zero);
    let (x0, xk) = (xi(0), xi(k));
    let mut rhs = mm(x0, &tr(xk, m), m);
    mm_acc(&mut rhs, xk, &tr(x0, m), m);
    for i in 1..k {
        let pp = mm(&p[i], &p[k - i], m);
        let xx = mm(xi(i), &tr(xi(k - i), m), m);
        for e in 0..n {
            rhs[e] += xx[e] - pp[e];
        }
    }
    let u0t = tr(u0, m);
    let a = mm(&mm(&u0t, &rhs, m), u0, m);
    let pt = sylvester_sym(&a, s0);
    let pk = mm(&mm(u0, &pt, m), &u0t, m);

    let mut t = xk.to_vec();
    for i in 1..=k {
        let pi = if i == k { &pk } else { &p[i] };
        let prod = mm(pi, &w[k - i], m);
        t.iter_mut().zip(&prod).for_each(|(o, v)| *o -= v);
    }
    let inv_s: Vec<f64> = s0.iter().map(|v| 1.0 / v).collect();
    let wk = mm(&scale_cols(u0, &inv_s, m), &mm(&u0t, &t, m), m);
    Some((wk, pk))
}

/// Order-`k` coefficients of the polar factors.
#[derive(Clone, Debug)]
pub struct PolarOutput {
    pub w: BatchedTensor,
    pub p: BatchedTensor,
}

/// Batched polar rule for `k ≥ 1`. `p` and `w` hold orders `0..k−1`;
/// `u0`, `s0` come from the order-zero SVD-W of `X₀`.
pub fn polar(
    k: usize,
    x: &[BatchedTensor],
    p: &[BatchedTensor],
    w: &[BatchedTensor],
    u0: &BatchedTensor,
    s0: &BatchedTensor,
) -> Result<PolarOutput> {
    let sh = series_shape(x);
    let m = sh.rows;
    let n = sh.item_len();
    let xlen = x.len().min(k + 1);
    let (uv, sv) = (u0.values(), s0.values());
    let packed = BatchedTensor::try_par_from_items(Shape::new(sh.batch, 1, 2 * n), |b, out| {
        let (wk, pk) = polar_item(
            k,
            m,
            &gather(x, xlen, b, n),
            &gather(p, k, b, n),
            &gather(w, k, b, n),
            &uv[b * n..(b + 1) * n],
            &sv[b * m..(b + 1) * m],
        )
        .ok_or_else(|| Error::domain("polar", b, "singular matrix"))?;
        out[..n].copy_from_slice(&wk);
        out[n..].copy_from_slice(&pk);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("polar", b, "non-finite coefficient"));
        }
        Ok(())
    })?;
    Ok(PolarOutput {
        w: unpack(&packed, sh.batch, 2 * n, 0, sh)?,
        p: unpack(&packed, sh.batch, 2 * n, n, sh)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::svd::svd_w_item;

    /// Runs both rules on `X(a) = Σ x_i aⁱ` up to order `n`.
    fn expand(x: &[Vec<f64>], n: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let m = 3;
        let (u0, s0, w0) = svd_w_item(&x[0], m, false);
        let p0 = mm(&scale_cols(&u0, &s0, m), &tr(&u0, m), m);
        let (mut u, mut s, mut w) = (vec![u0.clone()], vec![s0.clone()], vec![w0.clone()]);
        let (mut pw, mut p) = (vec![w0], vec![p0]);
        for k in 1..=n {
            let (uk, sk, wk) = svdw_item(k, m, x, &u, &s, &w);
            u.push(uk);
            s.push(sk);
            w.push(wk);
            let (wk, pk) = polar_item(k, m, x, &p, &pw, &u0, &s0).unwrap();
            pw.push(wk);
            p.push(pk);
        }
        (u, s, w, pw, p)
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn isotropic_growth() {
        let i = dense::identity(3);
        let x = vec![i.clone(), i.clone()];
        let (_, s, w, pw, p) = expand(&x, 4);
        assert!(max_diff(&s[1], &[1.0, 1.0, 1.0]) < 1e-12);
        for k in 1..=4 {
            assert!(w[k].iter().all(|v| v.abs() < 1e-10));
            assert!(pw[k].iter().all(|v| v.abs() < 1e-10));
        }
        assert!(max_diff(&p[1], &i) < 1e-12);
        assert!(p[2].iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn constant_input_has_no_higher_terms() {
        let x = vec![vec![2.0, 0.3, 0.0, -0.1, 1.0, 0.2, 0.0, 0.4, 3.0]];
        let (u, s, w, pw, p) = expand(&x, 3);
        for k in 1..=3 {
            for v in [&u[k], &s[k], &w[k], &pw[k], &p[k]] {
                assert!(v.iter().all(|e| e.abs() < 1e-12));
            }
        }
    }
}
