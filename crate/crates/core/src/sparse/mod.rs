//! Compressed sparse row matrices, sparse affine maps, and a sparse LU.

mod lu;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub use lu::{reverse_cuthill_mckee, SparseLu};

/// Row-compressed sparse matrix with sorted, duplicate-free column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

/// Coordinate-format accumulator; duplicates are summed on conversion.
#[derive(Clone, Debug, Default)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        TripletBuilder {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    pub fn build(self) -> CsrMatrix {
        CsrMatrix::from_triplets(self.nrows, self.ncols, self.entries)
    }
}

impl CsrMatrix {
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut entries: Vec<(usize, usize, f64)>,
    ) -> CsrMatrix {
        entries.sort_unstable_by_key(|e| (e.0, e.1));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(entries.len());
        let mut data: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                data.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        }
    }

    /// Builds from raw parts; rows must hold sorted unique columns.
    pub fn from_parts(
        nrows: usize,
        ncols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        data: Vec<f64>,
    ) -> Result<CsrMatrix> {
        if indptr.len() != nrows + 1
            || indices.len() != data.len()
            || indptr[nrows] != data.len()
            || indices.iter().any(|&c| c >= ncols)
        {
            return Err(Error::Shape(format!("malformed {nrows}x{ncols} CSR parts")));
        }
        Ok(CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        })
    }

    pub fn identity(n: usize) -> CsrMatrix {
        CsrMatrix {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: vec![1.0; n],
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> CsrMatrix {
        CsrMatrix {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn from_dense(nrows: usize, ncols: usize, dense: &[f64]) -> CsrMatrix {
        let mut t = TripletBuilder::new(nrows, ncols);
        for r in 0..nrows {
            for c in 0..ncols {
                let v = dense[r * ncols + c];
                if v != 0.0 {
                    t.push(r, c, v);
                }
            }
        }
        t.build()
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        self.indices[a..b].iter().copied().zip(self.data[a..b].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        match self.indices[a..b].binary_search(&c) {
            Ok(p) => self.data[a + p],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.nrows * self.ncols];
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                d[r * self.ncols + c] += v;
            }
        }
        d
    }

    /// `y = A x`
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// `y += alpha · A x`
    pub fn matvec_acc(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate().take(self.nrows) {
            let s: f64 = self.row(r).map(|(c, v)| v * x[c]).sum();
            *yr += alpha * s;
        }
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let mut next = counts.clone();
        let mut indices = vec![0; self.nnz()];
        let mut data = vec![0.0; self.nnz()];
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                let p = next[c];
                indices[p] = r;
                data[p] = v;
                next[c] += 1;
            }
        }
        CsrMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            indptr: counts,
            indices,
            data,
        }
    }

    pub fn scale(&self, c: f64) -> CsrMatrix {
        let mut m = self.clone();
        m.data.iter_mut().for_each(|v| *v *= c);
        m
    }

    /// Row-by-row product `self · rhs` with a sparse accumulator.
    pub fn mul(&self, rhs: &CsrMatrix) -> Result<CsrMatrix> {
        if self.ncols != rhs.nrows {
            return Err(Error::Shape(format!(
                "sparse product {}x{} by {}x{}",
                self.nrows, self.ncols, rhs.nrows, rhs.ncols
            )));
        }
        let mut acc = RowAccumulator::new(rhs.ncols);
        let mut out = CsrAssembler::new(rhs.ncols);
        for r in 0..self.nrows {
            for (k, a) in self.row(r) {
                for (c, b) in rhs.row(k) {
                    acc.add(c, a * b);
                }
            }
            out.push_row(&mut acc);
        }
        Ok(out.finish(self.nrows))
    }

    pub fn add(&self, rhs: &CsrMatrix) -> Result<CsrMatrix> {
        if self.nrows != rhs.nrows || self.ncols != rhs.ncols {
            return Err(Error::Shape(format!(
                "sparse sum {}x{} and {}x{}",
                self.nrows, self.ncols, rhs.nrows, rhs.ncols
            )));
        }
        let mut acc = RowAccumulator::new(self.ncols);
        let mut out = CsrAssembler::new(self.ncols);
        for r in 0..self.nrows {
            for (c, v) in self.row(r).chain(rhs.row(r)) {
                acc.add(c, v);
            }
            out.push_row(&mut acc);
        }
        Ok(out.finish(self.nrows))
    }
}

/// Dense scatter buffer for assembling one sparse row at a time.
pub(crate) struct RowAccumulator {
    values: Vec<f64>,
    mark: Vec<bool>,
    touched: Vec<usize>,
}

impl RowAccumulator {
    pub(crate) fn new(ncols: usize) -> Self {
        RowAccumulator {
            values: vec![0.0; ncols],
            mark: vec![false; ncols],
            touched: Vec::new(),
        }
    }

    #[inline]
    pub(crate) fn add(&mut self, col: usize, v: f64) {
        if !self.mark[col] {
            self.mark[col] = true;
            self.touched.push(col);
        }
        self.values[col] += v;
    }
}

/// Collects rows drained from a [`RowAccumulator`] into CSR arrays.
pub(crate) struct CsrAssembler {
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CsrAssembler {
    pub(crate) fn new(ncols: usize) -> Self {
        CsrAssembler {
            ncols,
            indptr: vec![0],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    pub(crate) fn push_row(&mut self, acc: &mut RowAccumulator) {
        acc.touched.sort_unstable();
        for &c in &acc.touched {
            self.indices.push(c);
            self.data.push(acc.values[c]);
            acc.values[c] = 0.0;
            acc.mark[c] = false;
        }
        acc.touched.clear();
        self.indptr.push(self.indices.len());
    }

    pub(crate) fn finish(self, nrows: usize) -> CsrMatrix {
        debug_assert_eq!(self.indptr.len(), nrows + 1);
        CsrMatrix {
            nrows,
            ncols: self.ncols,
            indptr: self.indptr,
            indices: self.indices,
            data: self.data,
        }
    }
}

/// `y = M x + offset`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseAffineMap {
    pub matrix: CsrMatrix,
    pub offset: Vec<f64>,
}

impl SparseAffineMap {
    pub fn new(matrix: CsrMatrix, offset: Vec<f64>) -> Result<Self> {
        if offset.len() != matrix.nrows() {
            return Err(Error::Shape(format!(
                "offset of length {} for a map with {} rows",
                offset.len(),
                matrix.nrows()
            )));
        }
        Ok(SparseAffineMap { matrix, offset })
    }

    pub fn linear(matrix: CsrMatrix) -> Self {
        let offset = vec![0.0; matrix.nrows()];
        SparseAffineMap { matrix, offset }
    }

    pub fn input_len(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn output_len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.offset.clone();
        self.matrix.matvec_acc(1.0, x, &mut y);
        y
    }

    /// The linear part only.
    pub fn apply_linear(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.matvec(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(2, 3, vec![(1, 2, 1.0), (0, 0, 2.0), (1, 2, 3.0)]);
        assert_eq!(m.to_dense(), [2.0, 0.0, 0.0, 0.0, 0.0, 4.0]);
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn product_matches_dense() {
        let a = CsrMatrix::from_dense(2, 3, &[1.0, 0.0, 2.0, 0.0, 3.0, 0.0]);
        let b = CsrMatrix::from_dense(3, 2, &[1.0, 1.0, 0.0, 2.0, 4.0, 0.0]);
        assert_eq!(a.mul(&b).unwrap().to_dense(), [9.0, 1.0, 0.0, 6.0]);
        assert_eq!(a.transpose().transpose(), a);
        assert!(a.mul(&a).is_err());
    }

    proptest! {
        #[test]
        fn affine_map_is_affine(
            u in proptest::collection::vec(-5.0f64..5.0, 4),
            w in proptest::collection::vec(-5.0f64..5.0, 4),
            alpha in -3.0f64..3.0,
            beta in -3.0f64..3.0,
        ) {
            let m = CsrMatrix::from_triplets(3, 4, vec![(0, 0, 1.5), (0, 3, -2.0), (2, 1, 0.5), (1, 2, 4.0)]);
            let map = SparseAffineMap::new(m, vec![1.0, -1.0, 0.25]).unwrap();
            let mix: Vec<f64> = u.iter().zip(&w).map(|(a, b)| alpha * a + beta * b).collect();
            let lhs = map.apply_linear(&mix);
            let (mu, mw) = (map.apply_linear(&u), map.apply_linear(&w));
            for i in 0..3 {
                prop_assert!((lhs[i] - (alpha * mu[i] + beta * mw[i])).abs() < 1e-10);
                prop_assert!((map.apply(&u)[i] - mu[i] - map.offset[i]).abs() < 1e-12);
            }
        }
    }
}
