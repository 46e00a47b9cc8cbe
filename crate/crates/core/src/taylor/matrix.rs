//! Matrix product, transpose, and inverse rules.

use alloc::vec;
use alloc::vec::Vec;

use super::{item_of, series_shape, term};
use crate::error::{Error, Result};
use crate::tensor::{dense, BatchedTensor, Shape};

/// `F_k = Σ_{i=0}^{k} X_i Y_{k−i}` per batch item.
pub fn matmul(k: usize, x: &[BatchedTensor], y: &[BatchedTensor]) -> Result<BatchedTensor> {
    let (sx, sy) = (series_shape(x), series_shape(y));
    if sx.batch != sy.batch || sx.cols != sy.rows {
        return Err(Error::Shape(alloc::format!("matmul {sx:?} by {sy:?}")));
    }
    let out = Shape::new(sx.batch, sx.rows, sy.cols);
    let pairs: Vec<usize> = (0..=k)
        .filter(|&i| term(x, i).is_some() && term(y, k - i).is_some())
        .collect();
    if pairs.is_empty() {
        return Ok(BatchedTensor::zeros(out));
    }
    Ok(BatchedTensor::par_from_items(out, |b, c| {
        for &i in &pairs {
            let (xi, yi) = (item_of(x, i, b).unwrap(), item_of(y, k - i, b).unwrap());
            dense::matmul_acc(xi, yi, sx.rows, sx.cols, sy.cols, c);
        }
    }))
}

/// Transposition is linear: `F_k = X_kᵀ`.
pub fn transpose(k: usize, x: &[BatchedTensor]) -> BatchedTensor {
    match term(x, k) {
        Some(t) => t.transpose(),
        None => {
            let s = series_shape(x);
            BatchedTensor::zeros(Shape::new(s.batch, s.cols, s.rows))
        }
    }
}

/// `F_k = −(Σ_{i=0}^{k−1} F_i X_{k−i}) F₀` for `k ≥ 1`, where `f` holds the
/// inverse's coefficients below `k`.
pub fn matinv(k: usize, x: &[BatchedTensor], f: &[BatchedTensor]) -> Result<BatchedTensor> {
    debug_assert!(k >= 1 && f.len() >= k);
    let s = series_shape(x);
    let m = s.rows;
    let pairs: Vec<usize> = (0..k)
        .filter(|&i| term(f, i).is_some() && term(x, k - i).is_some())
        .collect();
    if pairs.is_empty() {
        return Ok(BatchedTensor::zeros(s));
    }
    Ok(BatchedTensor::par_from_items(s, |b, c| {
        let mut acc = vec![0.0; m * m];
        for &i in &pairs {
            dense::matmul_acc(
                item_of(f, i, b).unwrap(),
                item_of(x, k - i, b).unwrap(),
                m,
                m,
                m,
                &mut acc,
            );
        }
        match item_of(f, 0, b) {
            Some(f0) => {
                dense::matmul(&acc, f0, m, m, m, c);
                c.iter_mut().for_each(|v| *v = -*v);
            }
            None => c.fill(0.0),
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_matmul_reduces_to_mul() {
        let x: Vec<_> = [1.0, 2.0].iter().map(|&v| BatchedTensor::from_slice(&[v])).collect();
        let y: Vec<_> = [3.0, 4.0].iter().map(|&v| BatchedTensor::from_slice(&[v])).collect();
        assert_eq!(matmul(1, &x, &y).unwrap().to_vec(), [10.0]);
    }

    #[test]
    fn inverse_geometric_series() {
        let i = BatchedTensor::identity(1, 3);
        let x = vec![i.clone(), i.clone()];
        let mut f = vec![i.clone()];
        for k in 1..=3 {
            let fk = matinv(k, &x, &f).unwrap();
            f.push(fk);
        }
        assert_eq!(f[1], i.scale(-1.0));
        assert_eq!(f[2], i);
        assert_eq!(f[3], i.scale(-1.0));
        let c = vec![i.clone()];
        assert!(matinv(2, &c, &[i.clone(), BatchedTensor::zeros(i.shape())]).unwrap().is_zero());
    }
}
