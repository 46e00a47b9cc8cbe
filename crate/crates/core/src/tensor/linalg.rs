use alloc::format;

use super::{dense, BatchedTensor, Shape};
use crate::error::{Error, Result};

/// Per-item matrix product. Batch sizes must match.
pub fn batched_matmul(a: &BatchedTensor, b: &BatchedTensor) -> Result<BatchedTensor> {
    let (sa, sb) = (a.shape(), b.shape());
    if sa.batch != sb.batch || sa.cols != sb.rows {
        return Err(Error::Shape(format!("matmul {sa:?} by {sb:?}")));
    }
    let out = Shape::new(sa.batch, sa.rows, sb.cols);
    if a.is_zero() || b.is_zero() {
        return Ok(BatchedTensor::zeros(out));
    }
    let (ad, bd) = (a.data().unwrap(), b.data().unwrap());
    let (an, bn) = (sa.item_len(), sb.item_len());
    Ok(BatchedTensor::par_from_items(out, |i, c| {
        dense::matmul(
            &ad[i * an..(i + 1) * an],
            &bd[i * bn..(i + 1) * bn],
            sa.rows,
            sa.cols,
            sb.cols,
            c,
        )
    }))
}

pub fn batched_transpose(x: &BatchedTensor) -> BatchedTensor {
    let s = x.shape();
    let out = Shape::new(s.batch, s.cols, s.rows);
    match x.data() {
        None => BatchedTensor::zeros(out),
        Some(d) => {
            let n = s.item_len();
            BatchedTensor::par_from_items(out, |i, c| {
                let src = &d[i * n..(i + 1) * n];
                for r in 0..s.rows {
                    for k in 0..s.cols {
                        c[k * s.rows + r] = src[r * s.cols + k];
                    }
                }
            })
        }
    }
}

/// Determinant of each square item, shaped `batch × 1 × 1`.
pub fn batched_det(x: &BatchedTensor) -> Result<BatchedTensor> {
    let s = x.shape();
    if !s.is_square() {
        return Err(Error::Shape(format!("det of non-square {s:?}")));
    }
    let out = Shape::scalar(s.batch);
    let Some(d) = x.data() else {
        return Ok(if s.rows == 0 {
            BatchedTensor::filled(out, 1.0)
        } else {
            BatchedTensor::zeros(out)
        });
    };
    let n = s.item_len();
    Ok(BatchedTensor::par_from_items(out, |i, c| {
        c[0] = dense::det(&d[i * n..(i + 1) * n], s.rows)
    }))
}

/// Inverse of each square item; a singular item is a domain error naming
/// its batch index.
pub fn batched_inverse(x: &BatchedTensor) -> Result<BatchedTensor> {
    let s = x.shape();
    if !s.is_square() {
        return Err(Error::Shape(format!("inverse of non-square {s:?}")));
    }
    if x.is_zero() {
        return Err(Error::domain("inverse", 0, "zero matrix"));
    }
    let d = x.values();
    let n = s.item_len();
    BatchedTensor::try_par_from_items(s, |i, c| {
        let inv = dense::inverse(&d[i * n..(i + 1) * n], s.rows)
            .ok_or_else(|| Error::domain("inverse", i, "singular matrix"))?;
        c.copy_from_slice(&inv);
        Ok(())
    })
}
