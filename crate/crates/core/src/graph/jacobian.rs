//! Block-sparse local Jacobians and their composition into a global sparse
//! matrix.

use alloc::vec;
use alloc::vec::Vec;

use crate::sparse::{CsrAssembler, CsrMatrix, RowAccumulator};
use crate::tensor::{BatchedTensor, Shape};

/// `∂out/∂in` of one operator output with respect to one input, over the
/// flattened tensors.
#[derive(Clone, Debug)]
pub enum LocalJacobian {
    Zero,
    /// `out = c · in`, equal lengths.
    Scaled(f64),
    /// `out_e = d_e · in_e`, equal lengths.
    Diagonal(Vec<f64>),
    /// One dense `out_item × in_item` block per batch item, row-major.
    Batched {
        out_item: usize,
        in_item: usize,
        data: Vec<f64>,
    },
    Sparse(CsrMatrix),
}

impl LocalJacobian {
    pub fn is_zero(&self) -> bool {
        matches!(self, LocalJacobian::Zero)
    }

    /// `J · x`, shaped as `out`.
    pub fn apply(&self, x: &BatchedTensor, out: Shape) -> BatchedTensor {
        let Some(xv) = x.data() else {
            return BatchedTensor::zeros(out);
        };
        match self {
            LocalJacobian::Zero => BatchedTensor::zeros(out),
            LocalJacobian::Scaled(c) => x.scale(*c).reshape(out).unwrap(),
            LocalJacobian::Diagonal(d) => {
                let v = xv.iter().zip(d).map(|(a, b)| a * b).collect();
                BatchedTensor::from_vec(out, v).unwrap()
            }
            LocalJacobian::Batched {
                out_item,
                in_item,
                data,
            } => {
                let (oi, ii) = (*out_item, *in_item);
                BatchedTensor::par_from_items(Shape::new(out.len() / oi.max(1), 1, oi), |b, o| {
                    let blk = &data[b * oi * ii..(b + 1) * oi * ii];
                    let xin = &xv[b * ii..(b + 1) * ii];
                    for (p, op) in o.iter_mut().enumerate() {
                        *op = (0..ii).map(|q| blk[p * ii + q] * xin[q]).sum();
                    }
                })
                .reshape(out)
                .unwrap()
            }
            LocalJacobian::Sparse(m) => BatchedTensor::from_vec(out, m.matvec(xv)).unwrap(),
        }
    }

    /// Dense `out_len × in_len` matrix.
    pub fn to_dense(&self, out_len: usize, in_len: usize) -> Vec<f64> {
        let mut d = vec![0.0; out_len * in_len];
        match self {
            LocalJacobian::Zero => {}
            LocalJacobian::Scaled(c) => (0..out_len).for_each(|i| d[i * in_len + i] = *c),
            LocalJacobian::Diagonal(v) => (0..out_len).for_each(|i| d[i * in_len + i] = v[i]),
            LocalJacobian::Batched {
                out_item,
                in_item,
                data,
            } => {
                for b in 0..out_len / out_item {
                    for p in 0..*out_item {
                        for q in 0..*in_item {
                            d[(b * out_item + p) * in_len + b * in_item + q] =
                                data[(b * out_item + p) * in_item + q];
                        }
                    }
                }
            }
            LocalJacobian::Sparse(m) => d = m.to_dense(),
        }
        d
    }

    /// Adds row-vector-times-Jacobian contributions `a · J[c, :]` to `acc`.
    #[inline]
    fn scatter_row(&self, c: usize, a: f64, acc: &mut RowAccumulator) {
        match self {
            LocalJacobian::Zero => {}
            LocalJacobian::Scaled(s) => acc.add(c, a * s),
            LocalJacobian::Diagonal(d) => acc.add(c, a * d[c]),
            LocalJacobian::Batched {
                out_item,
                in_item,
                data,
            } => {
                let (b, p) = (c / out_item, c % out_item);
                let row = &data[(b * out_item + p) * in_item..(b * out_item + p + 1) * in_item];
                for (q, &v) in row.iter().enumerate() {
                    if v != 0.0 {
                        acc.add(b * in_item + q, a * v);
                    }
                }
            }
            LocalJacobian::Sparse(m) => {
                for (q, v) in m.row(c) {
                    acc.add(q, a * v);
                }
            }
        }
    }
}

/// `adj · J`, the chain rule step of reverse-mode accumulation.
pub fn right_mul(adj: &CsrMatrix, jac: &LocalJacobian, in_len: usize) -> CsrMatrix {
    let mut acc = RowAccumulator::new(in_len);
    let mut out = CsrAssembler::new(in_len);
    for r in 0..adj.nrows() {
        for (c, a) in adj.row(r) {
            jac.scatter_row(c, a, &mut acc);
        }
        out.push_row(&mut acc);
    }
    out.finish(adj.nrows())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batched_apply_and_dense_agree() {
        let j = LocalJacobian::Batched {
            out_item: 2,
            in_item: 1,
            data: vec![1.0, 2.0, 3.0, 4.0],
        };
        let x = BatchedTensor::from_slice(&[10.0, 100.0]);
        let y = j.apply(&x, Shape::new(2, 2, 1));
        assert_eq!(y.to_vec(), [10.0, 20.0, 300.0, 400.0]);
        let d = j.to_dense(4, 2);
        assert_eq!(d, [1.0, 0.0, 2.0, 0.0, 0.0, 3.0, 0.0, 4.0]);
        let adj = CsrMatrix::identity(4);
        assert_eq!(right_mul(&adj, &j, 2).to_dense(), d);
    }
}
