//! Reference computations shared by the integration and acceptance tests.
//!
//! Every check drives one propagation rule order by order and compares the
//! result against coefficients obtained by substituting the input
//! polynomial into the function directly and truncating the expansion.

#![allow(dead_code)]

use anm_core::taylor;
use anm_core::tensor::{dense, svd};
use anm_core::{BatchedTensor, Shape};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub type Poly = Vec<f64>;

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn poly_mul(a: &[f64], b: &[f64], n: usize) -> Poly {
    let mut c = vec![0.0; n + 1];
    for (i, &x) in a.iter().enumerate().take(n + 1) {
        for (j, &y) in b.iter().enumerate().take(n + 1 - i) {
            c[i + j] += x * y;
        }
    }
    c
}

/// `Σ_j c_j u(a)^j` truncated at degree `n`, where `u(0) = 0`.
pub fn poly_series(c: &[f64], u: &[f64], n: usize) -> Poly {
    let mut out = vec![0.0; n + 1];
    let mut p = vec![0.0; n + 1];
    p[0] = 1.0;
    for &cj in c {
        for (o, v) in out.iter_mut().zip(&p) {
            *o += cj * v;
        }
        p = poly_mul(&p, u, n);
    }
    out
}

/// `ln x(a)` as `ln x₀ + ln(1 + u)` with `u = (x − x₀)/x₀`.
pub fn poly_log(x: &[f64], n: usize) -> Poly {
    let u: Poly = (0..=n).map(|i| if i == 0 { 0.0 } else { x.get(i).copied().unwrap_or(0.0) / x[0] }).collect();
    let mut c = vec![x[0].ln()];
    for j in 1..=n {
        c.push(if j % 2 == 1 { 1.0 } else { -1.0 } / j as f64);
    }
    poly_series(&c, &u, n)
}

/// `x(a)^r` as `x₀^r (1 + u)^r` with generalized binomial coefficients.
pub fn poly_pow(x: &[f64], r: f64, n: usize) -> Poly {
    let u: Poly = (0..=n).map(|i| if i == 0 { 0.0 } else { x.get(i).copied().unwrap_or(0.0) / x[0] }).collect();
    let mut c = Vec::new();
    let mut binom = 1.0;
    for j in 0..=n {
        c.push(x[0].powf(r) * binom);
        binom *= (r - j as f64) / (j + 1) as f64;
    }
    poly_series(&c, &u, n)
}

/// `1 / y(a)` as a geometric series.
pub fn poly_recip(y: &[f64], n: usize) -> Poly {
    let u: Poly = (0..=n).map(|i| if i == 0 { 0.0 } else { y.get(i).copied().unwrap_or(0.0) / y[0] }).collect();
    let c: Vec<f64> = (0..=n).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 } / y[0]).collect();
    poly_series(&c, &u, n)
}

/// Relative error `‖a − b‖∞ / max(‖b‖∞, 1)`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let d = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let s = b.iter().map(|v| v.abs()).fold(1.0, f64::max);
    d / s
}

fn scalar_series(c: &[f64]) -> Vec<BatchedTensor> {
    c.iter().map(|&v| BatchedTensor::from_slice(&[v])).collect()
}

fn random_poly(r: &mut StdRng, n: usize, lo: f64, hi: f64) -> Poly {
    (0..=n).map(|i| if i == 0 { r.gen_range(lo..hi) } else { r.gen_range(-1.0..1.0) }).collect()
}

/// Drives a recursive rule for orders `1..=n` from `f₀`.
fn drive(n: usize, f0: BatchedTensor, mut rule: impl FnMut(usize, &[BatchedTensor]) -> BatchedTensor) -> Vec<BatchedTensor> {
    let mut f = vec![f0];
    for k in 1..=n {
        let next = rule(k, &f);
        f.push(next);
    }
    f
}

fn scalars(f: &[BatchedTensor]) -> Vec<f64> {
    f.iter().map(|t| t.get(0, 0, 0)).collect()
}

/// Maximum relative error of each elementwise rule against the oracle
/// for one random input, as `(name, error)` pairs.
pub fn elementwise_errors(seed: u64, n: usize) -> Vec<(&'static str, f64)> {
    let mut r = rng(seed);
    let x = random_poly(&mut r, n, 0.5, 2.0);
    let y = random_poly(&mut r, n, 0.5, 2.0);
    let (xs, ys) = (scalar_series(&x), scalar_series(&y));
    let mut out = Vec::new();

    let add: Vec<f64> = (1..=n).map(|k| taylor::add(k, &xs, &ys).unwrap().get(0, 0, 0)).collect();
    let want: Vec<f64> = (1..=n).map(|k| x[k] + y[k]).collect();
    out.push(("add", rel_err(&add, &want)));
    let sub: Vec<f64> = (1..=n).map(|k| taylor::sub(k, &xs, &ys).unwrap().get(0, 0, 0)).collect();
    let want: Vec<f64> = (1..=n).map(|k| x[k] - y[k]).collect();
    out.push(("sub", rel_err(&sub, &want)));

    let mul: Vec<f64> = (0..=n)
        .map(|k| if k == 0 { x[0] * y[0] } else { taylor::mul(k, &xs, &ys).unwrap().get(0, 0, 0) })
        .collect();
    out.push(("mul", rel_err(&mul, &poly_mul(&x, &y, n))));

    let div = drive(n, BatchedTensor::from_slice(&[x[0] / y[0]]), |k, f| taylor::div(k, &xs, &ys, f).unwrap());
    out.push(("div", rel_err(&scalars(&div), &poly_mul(&x, &poly_recip(&y, n), n))));

    let log = drive(n, BatchedTensor::from_slice(&[x[0].ln()]), |k, f| taylor::log(k, &xs, f).unwrap());
    out.push(("log", rel_err(&scalars(&log), &poly_log(&x, n))));

    let rexp = r.gen_range(-2.5..2.5);
    let pow = drive(n, BatchedTensor::from_slice(&[x[0].powf(rexp)]), |k, f| taylor::pow(k, &xs, f, rexp).unwrap());
    out.push(("pow", rel_err(&scalars(&pow), &poly_pow(&x, rexp, n))));

    // integer exponent at a vanishing constant term
    let mut z = random_poly(&mut r, n, -1.0, 1.0);
    z[0] = r.gen_range(-1e-4..1e-4);
    let e = r.gen_range(1..5) as f64;
    let zs = scalar_series(&z);
    let powi = drive(n, BatchedTensor::from_slice(&[z[0].powf(e)]), |k, f| taylor::pow(k, &zs, f, e).unwrap());
    let mut want = vec![0.0; n + 1];
    want[0] = 1.0;
    for _ in 0..e as usize {
        want = poly_mul(&want, &z, n);
    }
    out.push(("pow-int", rel_err(&scalars(&powi), &want)));
    out
}

// ---- matrix polynomials ----

pub type MatPoly = Vec<Vec<f64>>;

pub fn mat_poly_mul(a: &MatPoly, b: &MatPoly, m: usize, n: usize) -> MatPoly {
    let mut c = vec![vec![0.0; m * m]; n + 1];
    for (i, ai) in a.iter().enumerate().take(n + 1) {
        for (j, bj) in b.iter().enumerate().take(n + 1 - i) {
            dense::matmul_acc(ai, bj, m, m, m, &mut c[i + j]);
        }
    }
    c
}

pub fn mat_poly_transpose(a: &MatPoly, m: usize) -> MatPoly {
    a.iter().map(|x| dense::transpose(x, m, m)).collect()
}

pub fn random_mat_poly(r: &mut StdRng, m: usize, n: usize, lead: f64) -> MatPoly {
    (0..=n)
        .map(|i| {
            (0..m * m)
                .map(|e| {
                    let v = r.gen_range(-1.0..1.0);
                    if i == 0 && e % (m + 1) == 0 { v + lead } else if i == 0 { v } else { 0.5 * v }
                })
                .collect()
        })
        .collect()
}

fn to_series(p: &MatPoly, m: usize) -> Vec<BatchedTensor> {
    p.iter()
        .map(|x| BatchedTensor::from_vec(Shape::new(1, m, m), x.clone()).unwrap())
        .collect()
}

fn flat(p: &[BatchedTensor]) -> Vec<f64> {
    p.iter().flat_map(|t| t.to_vec()).collect()
}

fn flat_poly(p: &MatPoly) -> Vec<f64> {
    p.iter().flatten().copied().collect()
}

pub fn matmul_error(seed: u64, m: usize, n: usize) -> f64 {
    let mut r = rng(seed);
    let (x, y) = (random_mat_poly(&mut r, m, n, 0.0), random_mat_poly(&mut r, m, n, 0.0));
    let (xs, ys) = (to_series(&x, m), to_series(&y, m));
    let got: Vec<BatchedTensor> = (0..=n).map(|k| taylor::matmul(k, &xs, &ys).unwrap()).collect();
    rel_err(&flat(&got), &flat_poly(&mat_poly_mul(&x, &y, m, n)))
}

/// Inverse against the Neumann expansion `Σ (−X₀⁻¹ D)^j X₀⁻¹`.
pub fn matinv_error(seed: u64, m: usize, n: usize) -> f64 {
    let mut r = rng(seed);
    let x = random_mat_poly(&mut r, m, n, 3.0);
    let inv0 = dense::inverse(&x[0], m).unwrap();
    let xs = to_series(&x, m);
    let f0 = BatchedTensor::from_vec(Shape::new(1, m, m), inv0.clone()).unwrap();
    let got = drive(n, f0, |k, f| taylor::matinv(k, &xs, f).unwrap());
    // T(a) = −X₀⁻¹ (X(a) − X₀)
    let mut t: MatPoly = vec![vec![0.0; m * m]; n + 1];
    for k in 1..=n {
        let mut p = vec![0.0; m * m];
        dense::matmul(&inv0, &x[k], m, m, m, &mut p);
        t[k] = p.iter().map(|v| -v).collect();
    }
    let mut term: MatPoly = vec![vec![0.0; m * m]; n + 1];
    term[0] = dense::identity(m);
    let mut sum = term.clone();
    for _ in 0..n {
        term = mat_poly_mul(&term, &t, m, n);
        for (s, v) in sum.iter_mut().zip(&term) {
            s.iter_mut().zip(v).for_each(|(a, b)| *a += b);
        }
    }
    let want = mat_poly_mul(&sum, &vec![inv0], m, n);
    rel_err(&flat(&got), &flat_poly(&want))
}

/// Determinant coefficients of a polynomial matrix by cofactor expansion
/// over full polynomial entries.
pub fn poly_det(x: &MatPoly, m: usize, n: usize) -> Poly {
    let entry = |i: usize, j: usize| -> Poly { (0..=n).map(|k| x.get(k).map_or(0.0, |c| c[i * m + j])).collect() };
    fn rec(rows: &[usize], cols: &[usize], entry: &dyn Fn(usize, usize) -> Poly, n: usize) -> Poly {
        if rows.len() == 1 {
            return entry(rows[0], cols[0]);
        }
        let mut out = vec![0.0; n + 1];
        for (c, &col) in cols.iter().enumerate() {
            let rest: Vec<usize> = cols.iter().copied().filter(|&q| q != col).collect();
            let minor = rec(&rows[1..], &rest, entry, n);
            let prod = poly_mul(&entry(rows[0], col), &minor, n);
            let s = if c % 2 == 0 { 1.0 } else { -1.0 };
            out.iter_mut().zip(&prod).for_each(|(o, v)| *o += s * v);
        }
        out
    }
    let idx: Vec<usize> = (0..m).collect();
    rec(&idx, &idx, &entry, n)
}

pub fn det_error(seed: u64, m: usize, n: usize) -> f64 {
    let mut r = rng(seed);
    let x = random_mat_poly(&mut r, m, n, 0.0);
    let xs = to_series(&x, m);
    let cof = taylor::cofactor(&xs[0]).unwrap();
    let got: Vec<f64> = (1..=n).map(|k| taylor::det_coeff(k, &xs, &cof).unwrap().get(0, 0, 0)).collect();
    let want = poly_det(&x, m, n);
    rel_err(&got, &want[1..])
}

/// FFT and Leibniz biases for one random series, relative difference.
pub fn det_bias_agreement(seed: u64, m: usize, k: usize) -> f64 {
    let mut r = rng(seed);
    let x = random_mat_poly(&mut r, m, k, 0.0);
    let xs = to_series(&x, m);
    let l = taylor::det_bias_leibniz(k, &xs[..k]).unwrap().get(0, 0, 0);
    let f = taylor::det_bias_fft(k, &xs[..k]).unwrap().get(0, 0, 0);
    (l - f).abs() / l.abs().max(1.0)
}

/// Runs SVD-W and polar rules to order `n`; returns the factor series.
pub struct DecompSeries {
    pub u: MatPoly,
    pub s: Vec<Vec<f64>>,
    pub w: MatPoly,
    pub pw: MatPoly,
    pub p: MatPoly,
}

pub fn decomp_series(x: &MatPoly, m: usize, n: usize, rotation_variant: bool) -> DecompSeries {
    let (u0, s0, w0) = svd::svd_w_item(&x[0], m, rotation_variant);
    let mut us = u0.clone();
    for r in 0..m {
        for c in 0..m {
            us[r * m + c] *= s0[c];
        }
    }
    let mut p0 = vec![0.0; m * m];
    dense::matmul(&us, &dense::transpose(&u0, m, m), m, m, m, &mut p0);
    let mut d = DecompSeries {
        u: vec![u0.clone()],
        s: vec![s0.clone()],
        w: vec![w0.clone()],
        pw: vec![w0],
        p: vec![p0],
    };
    for k in 1..=n {
        let (uk, sk, wk) = taylor::svdw_item(k, m, x, &d.u, &d.s, &d.w);
        d.u.push(uk);
        d.s.push(sk);
        d.w.push(wk);
        let (wk, pk) = taylor::polar_item(k, m, x, &d.p, &d.pw, &u0, &s0).unwrap();
        d.pw.push(wk);
        d.p.push(pk);
    }
    d
}

pub fn diag_poly(s: &[Vec<f64>], m: usize) -> MatPoly {
    s.iter()
        .map(|v| {
            let mut d = vec![0.0; m * m];
            for i in 0..m {
                d[i * m + i] = v[i];
            }
            d
        })
        .collect()
}

/// Order-by-order residuals of the SVD-W and polar identities.
pub struct DecompErrors {
    pub svdw_reconstruction: f64,
    pub svdw_orthogonality: f64,
    pub polar_reconstruction: f64,
    pub polar_symmetry: f64,
    pub w_agreement: f64,
}

pub fn decomp_errors(x: &MatPoly, m: usize, n: usize) -> DecompErrors {
    let d = decomp_series(x, m, n, false);
    let ut = mat_poly_transpose(&d.u, m);
    let usu = mat_poly_mul(&mat_poly_mul(&d.u, &diag_poly(&d.s, m), m, n), &ut, m, n);
    let rec = mat_poly_mul(&usu, &d.w, m, n);
    let mut xfull = x.clone();
    xfull.resize(n + 1, vec![0.0; m * m]);
    let svdw_reconstruction = rel_err(&flat_poly(&rec), &flat_poly(&xfull));
    let utu = mat_poly_mul(&ut, &d.u, m, n);
    let wtw = mat_poly_mul(&mat_poly_transpose(&d.w, m), &d.w, m, n);
    let ortho = utu[1..].iter().chain(&wtw[1..]).flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    let pwrec = mat_poly_mul(&d.p, &d.pw, m, n);
    let polar_reconstruction = rel_err(&flat_poly(&pwrec), &flat_poly(&xfull));
    let pt = mat_poly_transpose(&d.p, m);
    let polar_symmetry = rel_err(&flat_poly(&pt), &flat_poly(&d.p));
    let w_agreement = rel_err(&flat_poly(&d.pw), &flat_poly(&d.w));
    DecompErrors {
        svdw_reconstruction,
        svdw_orthogonality: ortho,
        polar_reconstruction,
        polar_symmetry,
        w_agreement,
    }
}

pub fn random_decomp_errors(seed: u64, n: usize) -> DecompErrors {
    let mut r = rng(seed);
    // distinct, well separated singular values
    let x = loop {
        let x = random_mat_poly(&mut r, 3, n, 0.0);
        let s = svd::svd(&x[0], 3).s;
        if s[2] > 0.2 && s[0] - s[1] > 0.1 && s[1] - s[2] > 0.1 {
            break x;
        }
    };
    // keep the series well inside the region where X stays invertible
    let x: MatPoly = x
        .into_iter()
        .enumerate()
        .map(|(i, c)| c.into_iter().map(|v| v * 0.5f64.powi(i as i32)).collect())
        .collect();
    decomp_errors(&x, 3, n)
}

/// Polar rotation of a 3×3 matrix by the Newton iteration `R ← (R + R⁻ᵀ)/2`.
pub fn polar_rotation(f: &[f64]) -> Vec<f64> {
    let mut r = f.to_vec();
    for _ in 0..100 {
        let inv = dense::inverse(&r, 3).unwrap();
        let next: Vec<f64> = (0..9).map(|i| 0.5 * (r[i] + inv[(i % 3) * 3 + i / 3])).collect();
        let d: f64 = next.iter().zip(&r).map(|(a, b)| (a - b).abs()).sum();
        r = next;
        if d < 1e-15 {
            break;
        }
    }
    r
}

/// Strain energy density of each model at `F` (row-major 3×3).
pub fn energy_density(m: &anm_core::fem::MaterialSpec, f: &[f64]) -> f64 {
    use anm_core::fem::Model;
    let j = dense::det(f, 3);
    let i1: f64 = f.iter().map(|v| v * v).sum();
    match m.model {
        Model::NeoHookean => 0.5 * m.mu * (i1 - 3.0) - m.mu * j.ln() + 0.5 * m.lambda * j.ln().powi(2),
        Model::IncompressibleNeoHookean => {
            0.5 * m.mu * (j.powf(-2.0 / 3.0) * i1 - 3.0) + 0.5 * m.kappa * (j - 1.0).powi(2)
        }
        Model::Arap => {
            let r = polar_rotation(f);
            0.5 * m.mu * f.iter().zip(&r).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
        }
    }
}

/// Total strain energy of `coords` relative to the reference `mesh.nodes`.
pub fn strain_energy(mesh: &anm_core::fem::TetMesh, m: &anm_core::fem::MaterialSpec, coords: &[[f64; 3]]) -> f64 {
    use anm_core::fem::shape_matrix;
    mesh.tets
        .iter()
        .map(|t| {
            let dm = shape_matrix(&mesh.nodes, t);
            let ds = shape_matrix(coords, t);
            let mut f = vec![0.0; 9];
            dense::matmul(&ds, &dense::inverse(&dm, 3).unwrap(), 3, 3, 3, &mut f);
            dense::det(&dm, 3) / 6.0 * energy_density(m, &f)
        })
        .sum()
}

/// A small bar with jittered interior-free coordinates.
pub fn jittered_bar(seed: u64, n: [usize; 3], size: [f64; 3], amount: f64) -> anm_core::fem::TetMesh {
    let m = anm_core::fem::TetMesh::box_grid(n, size).unwrap();
    let mut r = rng(seed);
    let h = size[0] / n[0] as f64;
    // coordinates on the boundary stay put, so faces remain planar
    let nodes = m
        .nodes
        .iter()
        .map(|p| {
            let mut q = *p;
            for c in 0..3 {
                if p[c] > 1e-9 && p[c] < size[c] - 1e-9 {
                    q[c] += amount * h * r.gen_range(-1.0..1.0);
                }
            }
            q
        })
        .collect();
    anm_core::fem::TetMesh::new(nodes, m.tets).unwrap()
}
