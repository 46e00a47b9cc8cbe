//! Built-in operators.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use super::jacobian::LocalJacobian;
use crate::error::{Error, Result};
use crate::sparse::{CsrMatrix, SparseAffineMap, TripletBuilder};
use crate::taylor;
use crate::tensor::{
    batched_det, batched_inverse, batched_matmul, batched_svd_w, ew_binary, ew_unary, svd,
    BatchedTensor, BinaryOp, Shape, UnaryOp,
};

/// Order-zero values of an operator: its outputs plus any auxiliary
/// tensors the operator keeps for later orders.
#[derive(Clone, Debug, Default)]
pub struct Forward {
    pub outputs: Vec<BatchedTensor>,
    pub aux: Vec<BatchedTensor>,
}

/// An operator in a computing graph.
///
/// Besides evaluation, an operator supplies its local Jacobians and the
/// bias of its order-`k` Taylor coefficient. The full order-`k`
/// coefficient of output `o` is `Σ_i J[o][i] · in_i[k] + bias[o]`.
pub trait Operator: fmt::Debug + Send + Sync {
    fn name(&self) -> &str;

    fn infer_shapes(&self, inputs: &[Shape]) -> Result<Vec<Shape>>;

    fn forward(&self, inputs: &[&BatchedTensor]) -> Result<Forward>;

    /// `result[o][i] = ∂output_o / ∂input_i` at the forward point.
    fn jacobian(
        &self,
        inputs: &[&BatchedTensor],
        fwd: &Forward,
    ) -> Result<Vec<Vec<LocalJacobian>>>;

    /// Order-`k` bias. Input and output series hold orders `0..k−1`; `aux`
    /// holds the auxiliary series up to the same order.
    fn bias(
        &self,
        k: usize,
        inputs: &[&[BatchedTensor]],
        outputs: &[&[BatchedTensor]],
        aux: &[BatchedTensor],
    ) -> Result<Vec<BatchedTensor>>;

    /// Next auxiliary coefficient once order `k` of inputs and outputs is
    /// final. Only operators with auxiliary series override this.
    fn commit_aux(
        &self,
        _k: usize,
        _inputs: &[&[BatchedTensor]],
        _outputs: &[&[BatchedTensor]],
        _aux: &[BatchedTensor],
    ) -> Result<Option<BatchedTensor>> {
        Ok(None)
    }

    /// A cheaper replacement given which outputs are consumed downstream.
    fn specialize(&self, _used: &[bool]) -> Option<Box<dyn Operator>> {
        None
    }
}

fn arity(name: &str, inputs: &[Shape], n: usize) -> Result<()> {
    if inputs.len() != n {
        return Err(Error::Build(format!(
            "{name} takes {n} inputs, got {}",
            inputs.len()
        )));
    }
    Ok(())
}

fn square(name: &str, s: Shape) -> Result<()> {
    if !s.is_square() {
        return Err(Error::Shape(format!("{name} needs square items, got {s:?}")));
    }
    Ok(())
}

/// Jacobian of an elementwise map with respect to one (possibly broadcast)
/// input, from the partial derivative at each output element.
fn ew_jacobian(out: Shape, input: Shape, partial: impl Fn(usize) -> f64) -> LocalJacobian {
    if input == out {
        LocalJacobian::Diagonal((0..out.len()).map(partial).collect())
    } else {
        LocalJacobian::Batched {
            out_item: out.item_len(),
            in_item: 1,
            data: (0..out.len()).map(partial).collect(),
        }
    }
}

/// Reads element `e` of the broadcast output from `t`.
fn bget(t: &[f64], t_shape: Shape, out: Shape, e: usize) -> f64 {
    if t_shape.item_len() == out.item_len() {
        t[e]
    } else {
        t[e / out.item_len()]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Elementwise(pub BinaryOp);

impl Operator for Elementwise {
    fn name(&self) -> &str {
        match self.0 {
            BinaryOp::Add => "add",
            BinaryOp::Sub => "sub",
            BinaryOp::Mul => "mul",
            BinaryOp::Div => "div",
        }
    }

    fn infer_shapes(&self, inputs: &[Shape]) -> Result<Vec<Shape>> {
        arity(self.name(), inputs, 2)?;
        Ok(vec![inputs[0].broadcast(inputs[1])?])
    }

    fn forward(&self, inputs: &[&BatchedTensor]) -> Result<Forward> {
        Ok(Forward {
            outputs: vec![ew_binary(self.0, inputs[0], inputs[1])?],
            aux: vec![],
        })
    }

    fn jacobian(&self, inputs: &[&BatchedTensor], fwd: &Forward) -> Result<Vec<Vec<LocalJacobian>>> {
        let (a, b) = (inputs[0], inputs[1]);
        let out = fwd.outputs[0].shape();
        let (sa, sb) = (a.shape(), b.shape());
        let (av, bv, fv) = (a.values(), b.values(), fwd.outputs[0].values());
        let unit = |s: Shape, c: f64| {
            if s == out {
                LocalJacobian::Scaled(c)
            } else {
                ew_jacobian(out, s, |_| c)
            }
        };
        let pair = match self.0 {
            BinaryOp::Add => vec![unit(sa, 1.0), unit(sb, 1.0)],
            BinaryOp::Sub => vec![unit(sa, 1.0), unit(sb, -1.0)],
            BinaryOp::Mul => vec![
                ew_jacobian(out, sa, |e| bget(&bv, sb, out, e)),
                ew_jacobian(out, sb, |e| bget(&av, sa, out, e)),
            ],
            BinaryOp::Div => vec![
                ew_jacobian(out, sa, |e| 1.0 / bget(&bv, sb, out, e)),
                ew_jacobian(out, sb, |e| -fv[e] / bget(&bv, sb, out, e)),
            ],
        };
        Ok(vec![pair])
    }

    fn bias(
        &self,
        k: usize,
        inputs: &[&[BatchedTensor]],
        outputs: &[&[BatchedTensor]],
        _aux: &[BatchedTensor],
    ) -> Result<Vec<BatchedTensor>> {
        let (a, b) = (inputs[0], inputs[1]);
        let out = match self.0 {
            BinaryOp::Add | BinaryOp::Sub => {
                BatchedTensor::zeros(a[0].shape().broadcast(b[0].shape())?)
            }
            BinaryOp::Mul => taylor::mul(k, a, b)?,
            BinaryOp::Div => taylor::div(k, a, b, outputs[0])?,
        };
        Ok(vec![out])
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Unary(pub UnaryOp);

impl Operator for Unary {
    fn name(&self) -> &str {
        match self.0 {
            UnaryOp::Log => "log",
            UnaryOp::Pow(_) => "pow",
            UnaryOp::Affine(..) => "affine",
        }
    }

    fn infer_shapes(&self, inputs: &[Shape]) -> Result<Vec<Shape>> {
        arity(self.name(), inputs, 1)?;
        Ok(vec![inputs[0]])
    }

    fn forward(&self, inputs: &[&BatchedTensor]) -> Result<Forward> {
        Ok(Forward {
            outputs: vec![ew_unary(self.0, inputs[0])?],
            aux: vec![],
        })
    }

    fn jacobian(&self, inputs: &[&BatchedTensor], _fwd: &Forward) -> Result<Vec<Vec<LocalJacobian>>> {
        let x = inputs[0].values();
        let j = match self.0 {
            UnaryOp::Log => LocalJacobian::Diagonal(x.iter().map(|v| 1.0 / v).collect()),
            UnaryOp::Pow(r) => {
                LocalJacobian::Diagonal(x.iter().map(|&v| r * libm::pow(v, r - 1.0)).collect())
            }
            UnaryOp::Affine(a, _) => LocalJacobian::Scaled(a),
        };
        Ok(vec![vec![j]])
    }

    fn bias(
        &self,
        k: usize,
        inputs: &[&[BatchedTensor]],
        outputs: &[&[BatchedTensor]],
        _aux: &[BatchedTensor],
    ) -> Result<Vec<BatchedTensor>> {
        let x = inputs[0];
        Ok(vec![match self.0 {
            UnaryOp::Log => taylor::log(k, x, outputs[0])?,
            UnaryOp::Pow(r) => taylor::pow(k, x, outputs[0], r)?,
            UnaryOp::Affine(..) => BatchedTensor::zeros(x[0].shape()),
        }])
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MatMul;

impl Operator for MatMul {
    fn name(&self) -> &str {
        "matmul"
    }

    fn infer_shapes(&self, inputs: &[Shape]) -> Result<Vec<Shape>> {
        arity("matmul", inputs, 2)?;
        let (a, b) = (inputs[0], inputs[1]);
        if a.batch != b.batch || a.cols != b.rows {
            return Err(Error::Shape(format!("matmul {a:?} by {b:?}")));
        }
        Ok(vec![Shape::new(a.batch, a.rows, b.cols)])
    }

    fn forward(&self, inputs: &[&BatchedTensor]) -> Result<Forward> {
        Ok(Forward {
            outputs: vec![batched_matmul(inputs[0], inputs[1])?],
            aux: vec![],
        })
    }

    fn jacobian(&self, inputs: &[&BatchedTensor], _fwd: &Forward) -> Result<Vec<Vec<LocalJacobian>>> {
        let (a, b) = (inputs[0], inputs[1]);
        let (sa, sb) = (a.shape(), b.shape());
        let (m, p, q) = (sa.rows, sa.cols, sb.cols);
        let (av, bv) = (a.values(), b.values());
        let mut ja = vec![0.0; sa.batch * m * q * m * p];
        let mut jb = vec![0.0; sa.batch * m * q * p * q];
        for t in 0..sa.batch {
            let (ai, bi) = (&av[t * m * p..], &bv[t * p * q..]);
            for i in 0..m {
                for j in 0..q {
                    let row = t * m * q + i * q + j;
                    for r in 0..p {
                        // ∂(AB)_ij/∂A_ir = B_rj, ∂(AB)_ij/∂B_rj = A_ir
                        ja[row * m * p + i * p + r] = bi[r * q + j];
                        jb[row * p * q + r * q + j] = ai[i * p + r];
                    }
                }
            }
        }
        Ok(vec![vec![
            LocalJacobian::Batched {
                out_item: m * q,
                in_item: m * p,
                data: ja,
            },
            LocalJacobian::Batched {
                out_item: m * q,
                in_item: p * q,
                data: jb,
            },
        ]])
    }

    fn bias(
        &self,
        k: usize,
        inputs: &[&[BatchedTensor]],
        _outputs: &[&[BatchedTensor]],
        _aux: &[BatchedTensor],
    ) -> Result<Vec<BatchedTensor>> {
        Ok(vec![taylor::matmul(k, inputs[0], inputs[1])?])
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Transpose;

impl Operator for Transpose {
    fn name(&self) -> &str {
        "transpose"
    }

    fn infer_shapes(&self, inputs: &[Shape]) -> Result<Vec<Shape>> {
        arity("transpose", inputs, 1)?;
        let s = inputs[0];
        Ok(vec![Shape::new(s.batch, s.cols, s.rows)])
    }

    fn forward(&self, inputs: &[&BatchedTensor]) -> Result<Forward> {
        Ok(Forward {
            outputs: vec![inputs[0].transpose()],
            aux: vec![],
        })
    }

    fn jacobian(&self, inputs: &[&BatchedTensor], _fwd: &Forward) -> Result<Vec<Vec<LocalJacobian>>> {
        let s = inputs[0].shape();
        let (r, c) = (s.rows, s.cols);
        let mut t = TripletBuilder::new(s.len(), s.len());
        for b in 0..s.batch {
            for i in 0..r {
                for j in 0..c {
                    t.push(b * r * c + j * r + i, b * r * c + i * c + j, 1.0);
                }
            }
        }
        Ok(vec![vec![LocalJacobian::Sparse(t.build())]])
    }

    fn bias(
        &self,
        _k: usize,
        inputs: &[&[BatchedTensor]],
        _outputs: &[&[BatchedTensor]],
        _aux: &[BatchedTensor],
    ) -> Result<Vec<BatchedTensor>> {
        let s = inputs[0][0].shape();
        Ok(vec![BatchedTensor::zeros(Shape::new(s.batch, s.cols, s.rows))])
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Inverse;

impl Operator for Inverse {
    fn name(&self) -> &str {
        "inverse"
    }

    fn infer_shapes(&self, inputs: &[Shape]) -> Result<Vec<Shape>> {
        arity("inverse", inputs, 1)?;
        square("inverse", inputs[0])?;
        Ok(vec![inputs[0]])
    }

    fn forward(&self, inputs: &[&BatchedTensor]) -> Result<Forward> {
        Ok(Forward {
            outputs: vec![batched_inverse(inputs[0])?],
            aux: vec![],
        })
    }

    fn jacobian(&self, inputs: &[&BatchedTensor], fwd: &Forward) -> Result<Vec<Vec<LocalJacobian>>> {
        let s = inputs[0].shape();
        let m = s.rows;
        let n = m * m;
        let f = fwd.outputs[0].values();
        let mut data = vec![0.0; s.batch * n * n];
        for t in 0..s.batch {
            let fi = &f[t * n..(t + 1) * n];
            for i in 0..m {
                for j in 0..m {
                    for a in 0..m {
                        for b in 0..m {
                            // ∂(X⁻¹)_ij/∂X_ab = −F_ia F_bj
                            data[t * n * n + (i * m + j) * n + a * m + b] = -fi[i * m + a] * fi[b * m + j];
                        }
                    }
                }
            }
        }
        Ok(vec![vec![LocalJacobian::Batched {
            out_item: n,
            in_item: n,
            data,
        }]])
    }

    fn bias(
        &self,
        k: usize,
        inputs: &[&[BatchedTensor]],
        outputs: &[&[BatchedTensor]],
        _aux: &[BatchedTensor],
    ) -> Result<Vec<BatchedTensor>> {
        Ok(vec![taylor::matinv(k, inputs[0], outputs[0])?])
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Det;

impl Operator for Det {
    fn name(&self) -> &str {
        "det"
    }

    fn infer_shapes(&self, inputs: &[Shape]) -> Result<Vec<Shape>> {
        arity("det", inputs, 1)?;
        square("det", inputs[0])?;
        Ok(vec![Shape::scalar(inputs[0].batch)])
    }

    fn forward(&self, inputs: &[&BatchedTensor]) -> Result<Forward> {
        Ok(Forward {
            outputs: vec![batched_det(inputs[0])?],
            aux: vec![],
        })
    }

    fn jacobian(&self, inputs: &[&BatchedTensor], _fwd: &Forward) -> Result<Vec<Vec<LocalJacobian>>> {
        let c = taylor::cofactor(inputs[0])?;
        Ok(vec![vec![LocalJacobian::Batched {
            out_item: 1,
            in_item: inputs[0].shape().item_len(),
            data: c.to_vec(),
        }]])
    }

    fn bias(
        &self,
        k: usize,
        inputs: &[&[BatchedTensor]],
        _outputs: &[&[BatchedTensor]],
        _aux: &[BatchedTensor],
    ) -> Result<Vec<BatchedTensor>> {
        Ok(vec![taylor::det_bias(k, inputs[0])?])
    }
}

/// SVD-W with outputs `(U, Σ, W)`. When only `W` is consumed the graph
/// swaps in the polar variant, which propagates `W` through `X = P W` and
/// keeps the `P` series as auxiliary state; `U` and `Σ` then carry their
/// order-zero values only.
#[derive(Debug, Clone, Copy)]
pub struct SvdW {
    pub rotation_variant: bool,
    pub polar: bool,
}

impl SvdW {
    fn item_jacobian(&self, x0: &[f64], u0: &[f64], s0: &[f64], w0: &[f64], p0: &[f64], m: usize) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let n = m * m;
        let (mut ju, mut js, mut jw) = (vec![0.0; n * n], vec![0.0; m * n], vec![0.0; n * n]);
        for e in 0..n {
            let mut dx = vec![0.0; n];
            dx[e] = 1.0;
            let xs = [x0.to_vec(), dx];
            let (du, ds, dw) = if self.polar {
                let (dw, _) = taylor::polar_item(1, m, &xs, &[p0.to_vec()], &[w0.to_vec()], u0, s0)
                    .ok_or_else(|| Error::domain("polar", 0, "singular matrix"))?;
                (vec![0.0; n], vec![0.0; m], dw)
            } else {
                taylor::svdw_item(1, m, &xs, &[u0.to_vec()], &[s0.to_vec()], &[w0.to_vec()])
            };
            for r in 0..n {
                ju[r * n + e] = du[r];
                jw[r * n + e] = dw[r];
            }
            for r in 0..m {
                js[r * n + e] = ds[r];
            }
        }
        Ok((ju, js, jw))
    }
}

fn polar_p0(u: &BatchedTensor, s: &BatchedTensor) -> BatchedTensor {
    let sh = u.shape();
    let m = sh.rows;
    let (uv, sv) = (u.values(), s.values());
    BatchedTensor::par_from_items(sh, |b, o| {
        let ui = &uv[b * m * m..(b + 1) * m * m];
        let si = &sv[b * m..(b + 1) * m];
        for i in 0..m {
            for j in 0..m {
                o[i * m + j] = (0..m).map(|c| ui[i * m + c] * si[c] * ui[j * m + c]).sum();
            }
        }
    })
}

impl Operator for SvdW {
    fn name(&self) -> &str {
        match (self.rotation_variant, self.polar) {
            (false, false) => "svd_w",
            (true, false) => "svd_w_rv",
            (false, true) => "polar",
            (true, true) => "polar_rv",
        }
    }

    fn infer_shapes(&self, inputs: &[Shape]) -> Result<Vec<Shape>> {
        arity("svd_w", inputs, 1)?;
        let s = inputs[0];
        square("svd_w", s)?;
        Ok(vec![s, Shape::new(s.batch, s.rows, 1), s])
    }

    fn forward(&self, inputs: &[&BatchedTensor]) -> Result<Forward> {
        let t = batched_svd_w(inputs[0], self.rotation_variant)?;
        let aux = if self.polar {
            vec![t.u.clone(), t.sigma.clone(), polar_p0(&t.u, &t.sigma)]
        } else {
            vec![]
        };
        Ok(Forward {
            outputs: vec![t.u, t.sigma, t.w],
            aux,
        })
    }

    fn jacobian(&self, inputs: &[&BatchedTensor], fwd: &Forward) -> Result<Vec<Vec<LocalJacobian>>> {
        let x = inputs[0];
        let s = x.shape();
        let m = s.rows;
        let n = m * m;
        let (xv, uv, sv, wv) = (
            x.values(),
            fwd.outputs[0].values(),
            fwd.outputs[1].values(),
            fwd.outputs[2].values(),
        );
        let pv = fwd.aux.get(2).map(|p| p.values());
        let item = n * n + m * n + n * n;
        let packed = BatchedTensor::try_par_from_items(Shape::new(s.batch, 1, item), |b, o| {
            let p0 = pv.as_ref().map_or(&[][..], |p| &p[b * n..(b + 1) * n]);
            let (ju, js, jw) = self
                .item_jacobian(
                    &xv[b * n..(b + 1) * n],
                    &uv[b * n..(b + 1) * n],
                    &sv[b * m..(b + 1) * m],
                    &wv[b * n..(b + 1) * n],
                    p0,
                    m,
                )
                .map_err(|_| Error::domain(if self.polar { "polar" } else { "svd_w" }, b, "singular matrix"))?;
            o[..n * n].copy_from_slice(&ju);
            o[n * n..n * n + m * n].copy_from_slice(&js);
            o[n * n + m * n..].copy_from_slice(&jw);
            Ok(())
        })?;
        let pk = packed.values();
        let split = |off: usize, len: usize| -> Vec<f64> {
            (0..s.batch)
                .flat_map(|b| pk[b * item + off..b * item + off + len].iter().copied())
                .collect()
        };
        let jw = LocalJacobian::Batched {
            out_item: n,
            in_item: n,
            data: split(n * n + m * n, n * n),
        };
        let (ju, js) = if self.polar {
            (LocalJacobian::Zero, LocalJacobian::Zero)
        } else {
            (
                LocalJacobian::Batched {
                    out_item: n,
                    in_item: n,
                    data: split(0, n * n),
                },
                LocalJacobian::Batched {
                    out_item: m,
                    in_item: n,
                    data: split(n * n, m * n),
                },
            )
        };
        Ok(vec![vec![ju], vec![js], vec![jw]])
    }

    fn bias(
        &self,
        k: usize,
        inputs: &[&[BatchedTensor]],
        outputs: &[&[BatchedTensor]],
        aux: &[BatchedTensor],
    ) -> Result<Vec<BatchedTensor>> {
        let x = inputs[0];
        if self.polar {
            let r = taylor::polar(k, x, &aux[2..], outputs[2], &aux[0], &aux[1])?;
            let s = x[0].shape();
            Ok(vec![
                BatchedTensor::zeros(s),
                BatchedTensor::zeros(Shape::new(s.batch, s.rows, 1)),
                r.w,
            ])
        } else {
            let r = taylor::svdw(k, x, outputs[0], outputs[1], outputs[2])?;
            Ok(vec![r.u, r.sigma, r.w])
        }
    }

    fn commit_aux(
        &self,
        k: usize,
        inputs: &[&[BatchedTensor]],
        outputs: &[&[BatchedTensor]],
        aux: &[BatchedTensor],
    ) -> Result<Option<BatchedTensor>> {
        if !self.polar {
            return Ok(None);
        }
        let r = taylor::polar(k, inputs[0], &aux[2..], &outputs[2][..k], &aux[0], &aux[1])?;
        Ok(Some(r.p))
    }

    fn specialize(&self, used: &[bool]) -> Option<Box<dyn Operator>> {
        if !self.polar && !used[0] && !used[1] {
            Some(Box::new(SvdW {
                rotation_variant: self.rotation_variant,
                polar: true,
            }))
        } else {
            None
        }
    }
}

/// `y = M · [in_0; in_1; …] + offset` over flattened inputs. Serves as the
/// sparse input map (free coordinates to per-element matrices), the output
/// map (stresses to nodal forces), and for reshaping or slicing.
#[derive(Debug, Clone)]
pub struct SparseAffine {
    map: SparseAffineMap,
    out: Shape,
    /// Column blocks of `M`, one per input.
    blocks: Vec<CsrMatrix>,
    splits: Vec<usize>,
}

impl SparseAffine {
    /// `input_lens` partitions the columns of `map` among the inputs.
    pub fn new(map: SparseAffineMap, input_lens: &[usize], out: Shape) -> Result<Self> {
        let total: usize = input_lens.iter().sum();
        if total != map.input_len() || out.len() != map.output_len() {
            return Err(Error::Shape(format!(
                "affine map {}x{} for inputs {input_lens:?} and output {out:?}",
                map.output_len(),
                map.input_len()
            )));
        }
        let mut splits = vec![0];
        for l in input_lens {
            splits.push(splits.last().unwrap() + l);
        }
        let mut trip: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); input_lens.len()];
        for r in 0..map.matrix.nrows() {
            for (c, v) in map.matrix.row(r) {
                let i = splits.partition_point(|&s| s <= c) - 1;
                trip[i].push((r, c - splits[i], v));
            }
        }
        let blocks = trip
            .into_iter()
            .zip(input_lens)
            .map(|(t, &l)| CsrMatrix::from_triplets(out.len(), l, t))
            .collect();
        Ok(SparseAffine {
            map,
            out,
            blocks,
            splits,
        })
    }

    pub fn map(&self) -> &SparseAffineMap {
        &self.map
    }
}

impl Operator for SparseAffine {
    fn name(&self) -> &str {
        "sparse_affine"
    }

    fn infer_shapes(&self, inputs: &[Shape]) -> Result<Vec<Shape>> {
        arity("sparse_affine", inputs, self.blocks.len())?;
        for (i, s) in inputs.iter().enumerate() {
            if s.len() != self.splits[i + 1] - self.splits[i] {
                return Err(Error::Shape(format!("sparse_affine input {i} has shape {s:?}")));
            }
        }
        Ok(vec![self.out])
    }

    fn forward(&self, inputs: &[&BatchedTensor]) -> Result<Forward> {
        let mut y = self.map.offset.clone();
        for (blk, x) in self.blocks.iter().zip(inputs) {
            if let Some(d) = x.data() {
                blk.matvec_acc(1.0, d, &mut y);
            }
        }
        Ok(Forward {
            outputs: vec![BatchedTensor::from_vec(self.out, y)?],
            aux: vec![],
        })
    }

    fn jacobian(&self, _inputs: &[&BatchedTensor], _fwd: &Forward) -> Result<Vec<Vec<LocalJacobian>>> {
        Ok(vec![self
            .blocks
            .iter()
            .map(|b| {
                if b.nnz() == 0 {
                    LocalJacobian::Zero
                } else {
                    LocalJacobian::Sparse(b.clone())
                }
            })
            .collect()])
    }

    fn bias(
        &self,
        _k: usize,
        _inputs: &[&[BatchedTensor]],
        _outputs: &[&[BatchedTensor]],
        _aux: &[BatchedTensor],
    ) -> Result<Vec<BatchedTensor>> {
        Ok(vec![BatchedTensor::zeros(self.out)])
    }
}

/// Singular values of each item, for diagnostics.
pub fn singular_values(x: &BatchedTensor) -> Vec<Vec<f64>> {
    let s = x.shape();
    let v = x.values();
    (0..s.batch)
        .map(|b| svd::svd(&v[b * s.item_len()..(b + 1) * s.item_len()], s.rows).s)
        .collect()
}
