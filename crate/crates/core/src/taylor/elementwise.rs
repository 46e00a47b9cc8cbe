//! Elementwise rules: arithmetic, `log`, and `pow`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{series_shape, term};
use crate::error::{Error, Result};
use crate::tensor::{BatchedTensor, Shape};

/// Integer exponents switch to polynomial exponentiation when `|x₀|` drops
/// below this, keeping the recurrence's `1/x₀` bounded.
pub const INTEGER_POW_THRESHOLD: f64 = 1e-3;

/// Dense accumulator over a broadcast output shape.
struct Acc {
    shape: Shape,
    data: Vec<f64>,
    touched: bool,
}

impl Acc {
    fn new(shape: Shape) -> Self {
        Acc {
            shape,
            data: vec![0.0; shape.len()],
            touched: false,
        }
    }

    fn stride(&self, t: &BatchedTensor) -> usize {
        // number of output elements that read the same source element
        if t.shape().item_len() == self.shape.item_len() {
            1
        } else {
            self.shape.item_len()
        }
    }

    fn add_scaled(&mut self, c: f64, a: Option<&BatchedTensor>) {
        let Some(a) = a else { return };
        let sa = self.stride(a);
        let av = a.data().unwrap();
        for (e, o) in self.data.iter_mut().enumerate() {
            *o += c * av[e / sa];
        }
        self.touched = true;
    }

    fn add_prod(&mut self, c: f64, a: Option<&BatchedTensor>, b: Option<&BatchedTensor>) {
        let (Some(a), Some(b)) = (a, b) else { return };
        let (sa, sb) = (self.stride(a), self.stride(b));
        let (av, bv) = (a.data().unwrap(), b.data().unwrap());
        for (e, o) in self.data.iter_mut().enumerate() {
            *o += c * av[e / sa] * bv[e / sb];
        }
        self.touched = true;
    }

    /// Divides by the broadcast `d`, reporting a zero divisor.
    fn divide(&mut self, op: &'static str, d: &BatchedTensor, positive: bool) -> Result<()> {
        let sd = self.stride(d);
        let dv = d.values();
        let n = self.shape.item_len().max(1);
        for (e, o) in self.data.iter_mut().enumerate() {
            let y = dv[e / sd];
            if y == 0.0 || (positive && !(y > 0.0)) {
                return Err(Error::domain(op, e / n, format!("order-zero value {y}")));
            }
            *o /= y;
        }
        Ok(())
    }

    fn finish(self) -> BatchedTensor {
        if self.touched {
            BatchedTensor::from_vec(self.shape, self.data).unwrap()
        } else {
            BatchedTensor::zeros(self.shape)
        }
    }
}

fn binary_shape(x: &[BatchedTensor], y: &[BatchedTensor]) -> Result<Shape> {
    series_shape(x).broadcast(series_shape(y))
}

/// `f_k = x_k + y_k`
pub fn add(k: usize, x: &[BatchedTensor], y: &[BatchedTensor]) -> Result<BatchedTensor> {
    let mut acc = Acc::new(binary_shape(x, y)?);
    acc.add_scaled(1.0, term(x, k));
    acc.add_scaled(1.0, term(y, k));
    Ok(acc.finish())
}

/// `f_k = x_k − y_k`
pub fn sub(k: usize, x: &[BatchedTensor], y: &[BatchedTensor]) -> Result<BatchedTensor> {
    let mut acc = Acc::new(binary_shape(x, y)?);
    acc.add_scaled(1.0, term(x, k));
    acc.add_scaled(-1.0, term(y, k));
    Ok(acc.finish())
}

/// Cauchy product `f_k = Σ_{i=0}^{k} x_i y_{k−i}`.
pub fn mul(k: usize, x: &[BatchedTensor], y: &[BatchedTensor]) -> Result<BatchedTensor> {
    let mut acc = Acc::new(binary_shape(x, y)?);
    for i in 0..=k {
        acc.add_prod(1.0, term(x, i), term(y, k - i));
    }
    Ok(acc.finish())
}

/// `f_k = (x_k − Σ_{i=0}^{k−1} f_i y_{k−i}) / y₀`, for `k ≥ 1`; `f` holds the
/// output coefficients below `k`.
pub fn div(
    k: usize,
    x: &[BatchedTensor],
    y: &[BatchedTensor],
    f: &[BatchedTensor],
) -> Result<BatchedTensor> {
    debug_assert!(k >= 1 && f.len() >= k);
    let mut acc = Acc::new(binary_shape(x, y)?);
    acc.add_scaled(1.0, term(x, k));
    for i in 0..k {
        acc.add_prod(-1.0, term(f, i), term(y, k - i));
    }
    acc.divide("div", &y[0], false)?;
    Ok(acc.finish())
}

/// `f_k = (x_k − Σ_{i=1}^{k−1} (i/k) x_{k−i} f_i) / x₀`, for `k ≥ 1`.
pub fn log(k: usize, x: &[BatchedTensor], f: &[BatchedTensor]) -> Result<BatchedTensor> {
    debug_assert!(k >= 1 && f.len() >= k);
    let mut acc = Acc::new(series_shape(x));
    acc.add_scaled(1.0, term(x, k));
    for i in 1..k {
        acc.add_prod(-(i as f64) / k as f64, term(x, k - i), term(f, i));
    }
    acc.divide("log", &x[0], true)?;
    Ok(acc.finish())
}

/// Coefficients of `p(a)^r` up to degree `k`, by repeated squaring.
fn poly_pow_trunc(p: &[f64], mut r: u64, k: usize) -> Vec<f64> {
    let mul = |a: &[f64], b: &[f64]| {
        let mut c = vec![0.0; k + 1];
        for (i, &ai) in a.iter().enumerate() {
            if ai == 0.0 {
                continue;
            }
            for (j, &bj) in b.iter().enumerate().take(k + 1 - i) {
                c[i + j] += ai * bj;
            }
        }
        c
    };
    let mut result = vec![0.0; k + 1];
    result[0] = 1.0;
    let mut base = p.to_vec();
    base.resize(k + 1, 0.0);
    while r > 0 {
        if r & 1 == 1 {
            result = mul(&result, &base);
        }
        r >>= 1;
        if r > 0 {
            base = mul(&base, &base);
        }
    }
    result
}

/// Coefficient `k ≥ 1` of `x(a)^r`.
///
/// Uses `f_k = (1/x₀) Σ_{i=1}^{k} ((i/k)(r+1) − 1) f_{k−i} x_i`, except for
/// non-negative integer `r` at elements with `|x₀| <` [`INTEGER_POW_THRESHOLD`],
/// where the truncated polynomial power is expanded directly.
pub fn pow(k: usize, x: &[BatchedTensor], f: &[BatchedTensor], r: f64) -> Result<BatchedTensor> {
    debug_assert!(k >= 1 && f.len() >= k);
    let shape = series_shape(x);
    let x0 = x[0].values();
    let integer = libm::round(r) == r && r >= 0.0;
    let n = shape.item_len();
    let xs: Vec<Option<&[f64]>> = (0..=k).map(|i| term(x, i).and_then(|t| t.data())).collect();
    let fs: Vec<Option<&[f64]>> = (0..k).map(|i| term(f, i).and_then(|t| t.data())).collect();
    if xs[1..].iter().all(Option::is_none) {
        return Ok(BatchedTensor::zeros(shape));
    }
    BatchedTensor::try_par_from_items(shape, |b, out| {
        for (j, o) in out.iter_mut().enumerate() {
            let e = b * n + j;
            let v0 = x0[e];
            let at = |s: &[Option<&[f64]>], i: usize| s[i].map_or(0.0, |d| d[e]);
            if integer && v0.abs() < INTEGER_POW_THRESHOLD {
                let p: Vec<f64> = (0..=k).map(|i| at(&xs, i)).collect();
                *o = poly_pow_trunc(&p, r as u64, k)[k];
                continue;
            }
            if v0 == 0.0 || (v0 < 0.0 && libm::round(r) != r) {
                return Err(Error::domain("pow", b, format!("{v0}^{r}")));
            }
            let mut s = 0.0;
            for i in 1..=k {
                let c = (i as f64 / k as f64) * (r + 1.0) - 1.0;
                s += c * at(&fs, k - i) * at(&xs, i);
            }
            *o = s / v0;
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_series(c: &[f64]) -> Vec<BatchedTensor> {
        c.iter().map(|&v| BatchedTensor::from_slice(&[v])).collect()
    }

    fn val(t: &BatchedTensor) -> f64 {
        t.get(0, 0, 0)
    }

    /// Runs a recursive rule from order 1 to `n`, starting from `f0`.
    fn run(n: usize, f0: f64, rule: impl Fn(usize, &[BatchedTensor]) -> BatchedTensor) -> Vec<f64> {
        let mut f = vec![BatchedTensor::from_slice(&[f0])];
        for k in 1..=n {
            let next = rule(k, &f);
            f.push(next);
        }
        f.iter().map(val).collect()
    }

    #[test]
    fn sums_and_products() {
        let x = scalar_series(&[1.0, 2.0]);
        let y = scalar_series(&[3.0, 4.0]);
        assert_eq!(val(&add(1, &x, &y).unwrap()), 6.0);
        assert_eq!(val(&mul(1, &x, &y).unwrap()), 10.0);
        assert_eq!(val(&mul(2, &x, &y).unwrap()), 8.0);
        assert_eq!(sub(1, &x, &x).unwrap().to_vec(), [0.0]);
        // bias: drop the order-k terms
        assert_eq!(val(&mul(2, &x[..2], &y[..2]).unwrap()), 8.0);
        assert!(mul(1, &x[..1], &y[..1]).unwrap().is_zero());
    }

    #[test]
    fn reciprocal_series() {
        let x = scalar_series(&[1.0, 0.0]);
        let y = scalar_series(&[1.0, 1.0]);
        let f = run(3, 1.0, |k, f| div(k, &x, &y, f).unwrap());
        assert_eq!(f, [1.0, -1.0, 1.0, -1.0]);
        let z = scalar_series(&[0.0, 1.0]);
        assert!(div(1, &x, &z, &scalar_series(&[0.0])).is_err());
    }

    #[test]
    fn log_one_plus_a() {
        let x = scalar_series(&[1.0, 1.0]);
        let f = run(3, 0.0, |k, f| log(k, &x, f).unwrap());
        assert!((f[1] - 1.0).abs() < 1e-15);
        assert!((f[2] + 0.5).abs() < 1e-15);
        assert!((f[3] - 1.0 / 3.0).abs() < 1e-15);
        assert!(log(1, &scalar_series(&[-1.0, 1.0]), &scalar_series(&[0.0])).is_err());
    }

    #[test]
    fn powers() {
        let f = run(2, 1.0, |k, f| pow(k, &scalar_series(&[1.0, 1.0]), f, 2.0).unwrap());
        assert_eq!(f, [1.0, 2.0, 1.0]);
        let f = run(1, 2.0, |k, f| pow(k, &scalar_series(&[4.0, 1.0]), f, 0.5).unwrap());
        assert!((f[1] - 0.25).abs() < 1e-15);
        let cube = run(4, 0.0, |k, f| pow(k, &scalar_series(&[0.0, 1.0]), f, 3.0).unwrap());
        assert_eq!(cube, [0.0, 0.0, 0.0, 1.0, 0.0]);
        assert!(pow(1, &scalar_series(&[0.0, 1.0]), &scalar_series(&[0.0]), 0.5).is_err());
    }

    #[test]
    fn scalar_broadcasts_against_matrix() {
        let s = Shape::new(2, 2, 2);
        let x = vec![
            BatchedTensor::filled(s, 1.0),
            BatchedTensor::from_fn(s, |b, i, j| (b + i + j) as f64),
        ];
        let c = vec![
            BatchedTensor::from_vec(Shape::scalar(2), vec![2.0, 3.0]).unwrap(),
            BatchedTensor::zeros(Shape::scalar(2)),
        ];
        let f1 = mul(1, &x, &c).unwrap();
        assert_eq!(f1.shape(), s);
        assert_eq!(f1.get(1, 1, 1), 3.0 * 3.0);
    }
}
