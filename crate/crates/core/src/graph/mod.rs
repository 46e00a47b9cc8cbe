//! Computing graphs built from operators, with order-zero evaluation,
//! reverse-mode sparse Jacobians, and order-by-order Taylor propagation.

mod jacobian;
pub mod ops;
mod series;

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

pub use jacobian::{right_mul, LocalJacobian};
pub use ops::{Forward, Operator};
pub use series::SeriesState;

use crate::error::{Error, Result};
use crate::sparse::{CsrMatrix, SparseAffineMap};
use crate::tensor::{BatchedTensor, BinaryOp, Shape, UnaryOp};

/// Handle to a variable (an edge carrying one batched tensor).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Clone, Debug)]
enum VarKind {
    InputX,
    InputLambda,
    Constant(BatchedTensor),
    Output,
}

#[derive(Clone, Debug)]
struct Var {
    shape: Shape,
    kind: VarKind,
}

#[derive(Debug)]
struct Node {
    op: Box<dyn Operator>,
    inputs: Vec<VarId>,
    outputs: Vec<VarId>,
}

/// Parameterless operator by registry name.
pub fn operator_by_name(name: &str) -> Option<Box<dyn Operator>> {
    use ops::*;
    Some(match name {
        "add" => Box::new(Elementwise(BinaryOp::Add)),
        "sub" => Box::new(Elementwise(BinaryOp::Sub)),
        "mul" => Box::new(Elementwise(BinaryOp::Mul)),
        "div" => Box::new(Elementwise(BinaryOp::Div)),
        "log" => Box::new(Unary(UnaryOp::Log)),
        "matmul" => Box::new(MatMul),
        "transpose" => Box::new(Transpose),
        "inverse" => Box::new(Inverse),
        "det" => Box::new(Det),
        "svd_w" => Box::new(SvdW {
            rotation_variant: false,
            polar: false,
        }),
        "svd_w_rv" => Box::new(SvdW {
            rotation_variant: true,
            polar: false,
        }),
        _ => return None,
    })
}

/// Incremental graph construction. Nodes are appended in topological
/// order since every input must exist before it is used.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    vars: Vec<Var>,
    nodes: Vec<Node>,
    x: Option<VarId>,
    lambda: Option<VarId>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn push_var(&mut self, shape: Shape, kind: VarKind) -> VarId {
        self.vars.push(Var { shape, kind });
        VarId(self.vars.len() - 1)
    }

    /// The unknown vector, of length `n`.
    pub fn input_x(&mut self, n: usize) -> Result<VarId> {
        if self.x.is_some() {
            return Err(Error::Build("x declared twice".into()));
        }
        let v = self.push_var(Shape::vector(n), VarKind::InputX);
        self.x = Some(v);
        Ok(v)
    }

    /// The scalar continuation parameter.
    pub fn input_lambda(&mut self) -> Result<VarId> {
        if self.lambda.is_some() {
            return Err(Error::Build("lambda declared twice".into()));
        }
        let v = self.push_var(Shape::scalar(1), VarKind::InputLambda);
        self.lambda = Some(v);
        Ok(v)
    }

    pub fn constant(&mut self, value: BatchedTensor) -> VarId {
        self.push_var(value.shape(), VarKind::Constant(value))
    }

    pub fn shape(&self, v: VarId) -> Shape {
        self.vars[v.0].shape
    }

    pub fn apply(&mut self, op: Box<dyn Operator>, inputs: &[VarId]) -> Result<Vec<VarId>> {
        if let Some(bad) = inputs.iter().find(|v| v.0 >= self.vars.len()) {
            return Err(Error::Build(format!("unknown variable {}", bad.0)));
        }
        let shapes: Vec<Shape> = inputs.iter().map(|v| self.vars[v.0].shape).collect();
        let node = self.nodes.len();
        let out_shapes = op
            .infer_shapes(&shapes)
            .map_err(|e| e.at_vertex(node))?;
        let outputs = out_shapes
            .into_iter()
            .map(|s| self.push_var(s, VarKind::Output))
            .collect::<Vec<_>>();
        self.nodes.push(Node {
            op,
            inputs: inputs.to_vec(),
            outputs: outputs.clone(),
        });
        Ok(outputs)
    }

    /// Applies a registered parameterless operator.
    pub fn op(&mut self, name: &str, inputs: &[VarId]) -> Result<Vec<VarId>> {
        let op = operator_by_name(name)
            .ok_or_else(|| Error::Build(format!("unknown operator '{name}'")))?;
        self.apply(op, inputs)
    }

    fn single(&mut self, op: Box<dyn Operator>, inputs: &[VarId]) -> Result<VarId> {
        Ok(self.apply(op, inputs)?[0])
    }

    pub fn add(&mut self, a: VarId, b: VarId) -> Result<VarId> {
        self.single(Box::new(ops::Elementwise(BinaryOp::Add)), &[a, b])
    }

    pub fn sub(&mut self, a: VarId, b: VarId) -> Result<VarId> {
        self.single(Box::new(ops::Elementwise(BinaryOp::Sub)), &[a, b])
    }

    pub fn mul(&mut self, a: VarId, b: VarId) -> Result<VarId> {
        self.single(Box::new(ops::Elementwise(BinaryOp::Mul)), &[a, b])
    }

    pub fn div(&mut self, a: VarId, b: VarId) -> Result<VarId> {
        self.single(Box::new(ops::Elementwise(BinaryOp::Div)), &[a, b])
    }

    pub fn log(&mut self, a: VarId) -> Result<VarId> {
        self.single(Box::new(ops::Unary(UnaryOp::Log)), &[a])
    }

    pub fn pow(&mut self, a: VarId, r: f64) -> Result<VarId> {
        self.single(Box::new(ops::Unary(UnaryOp::Pow(r))), &[a])
    }

    /// `s·a + c`, elementwise.
    pub fn affine(&mut self, a: VarId, s: f64, c: f64) -> Result<VarId> {
        self.single(Box::new(ops::Unary(UnaryOp::Affine(s, c))), &[a])
    }

    pub fn scale(&mut self, a: VarId, s: f64) -> Result<VarId> {
        self.affine(a, s, 0.0)
    }

    pub fn matmul(&mut self, a: VarId, b: VarId) -> Result<VarId> {
        self.single(Box::new(ops::MatMul), &[a, b])
    }

    pub fn transpose(&mut self, a: VarId) -> Result<VarId> {
        self.single(Box::new(ops::Transpose), &[a])
    }

    pub fn inverse(&mut self, a: VarId) -> Result<VarId> {
        self.single(Box::new(ops::Inverse), &[a])
    }

    pub fn det(&mut self, a: VarId) -> Result<VarId> {
        self.single(Box::new(ops::Det), &[a])
    }

    /// `(U, Σ, W)` of each item.
    pub fn svd_w(&mut self, a: VarId, rotation_variant: bool) -> Result<(VarId, VarId, VarId)> {
        let o = self.apply(
            Box::new(ops::SvdW {
                rotation_variant,
                polar: false,
            }),
            &[a],
        )?;
        Ok((o[0], o[1], o[2]))
    }

    /// `map · [inputs…] + offset`, shaped as `out`.
    pub fn sparse_affine(&mut self, map: SparseAffineMap, inputs: &[VarId], out: Shape) -> Result<VarId> {
        let lens: Vec<usize> = inputs.iter().map(|v| self.vars[v.0].shape.len()).collect();
        let op = ops::SparseAffine::new(map, &lens, out)?;
        self.single(Box::new(op), inputs)
    }

    /// Reinterprets `a` with a new shape of equal length.
    pub fn reshape(&mut self, a: VarId, shape: Shape) -> Result<VarId> {
        let n = self.vars[a.0].shape.len();
        if n != shape.len() {
            return Err(Error::Shape(format!("reshape {n} values to {shape:?}")));
        }
        self.sparse_affine(SparseAffineMap::linear(CsrMatrix::identity(n)), &[a], shape)
    }

    /// Finalizes with `output` as the graph value. Decomposition nodes
    /// whose `U` and `Σ` are never consumed switch to the polar form.
    pub fn finish(mut self, output: VarId) -> Result<ComputeGraph> {
        let x = self
            .x
            .ok_or_else(|| Error::Build("graph has no x input".into()))?;
        if output.0 >= self.vars.len() {
            return Err(Error::Build(format!("unknown output variable {}", output.0)));
        }
        let mut used = vec![false; self.vars.len()];
        used[output.0] = true;
        for n in &self.nodes {
            for v in &n.inputs {
                used[v.0] = true;
            }
        }
        for n in &mut self.nodes {
            let flags: Vec<bool> = n.outputs.iter().map(|v| used[v.0]).collect();
            if let Some(op) = n.op.specialize(&flags) {
                n.op = op;
            }
        }
        Ok(ComputeGraph {
            vars: self.vars,
            nodes: self.nodes,
            x,
            lambda: self.lambda,
            output,
        })
    }
}

/// A directed acyclic graph of operators mapping `(x, λ)` to an output
/// tensor, read as a flat vector.
#[derive(Debug)]
pub struct ComputeGraph {
    vars: Vec<Var>,
    nodes: Vec<Node>,
    x: VarId,
    lambda: Option<VarId>,
    output: VarId,
}

/// Order-zero values of every variable.
#[derive(Clone, Debug)]
pub struct Evaluation {
    values: Vec<BatchedTensor>,
    forward: Vec<Forward>,
}

impl Evaluation {
    pub fn value(&self, v: VarId) -> &BatchedTensor {
        &self.values[v.0]
    }
}

/// Local Jacobians of every node at an evaluation point.
#[derive(Clone, Debug)]
pub struct Linearization {
    pub eval: Evaluation,
    local: Vec<Vec<Vec<LocalJacobian>>>,
}

impl ComputeGraph {
    pub fn num_inputs(&self) -> usize {
        self.vars[self.x.0].shape.len()
    }

    pub fn num_outputs(&self) -> usize {
        self.vars[self.output.0].shape.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn output_var(&self) -> VarId {
        self.output
    }

    pub fn has_lambda(&self) -> bool {
        self.lambda.is_some()
    }

    /// Registry names of the nodes, in order.
    pub fn operator_names(&self) -> Vec<&str> {
        self.nodes.iter().map(|n| n.op.name()).collect()
    }

    pub fn evaluate(&self, x: &[f64], lambda: f64) -> Result<Evaluation> {
        if x.len() != self.num_inputs() {
            return Err(Error::Shape(format!(
                "x has length {}, graph expects {}",
                x.len(),
                self.num_inputs()
            )));
        }
        let mut values: Vec<Option<BatchedTensor>> = vec![None; self.vars.len()];
        for (i, v) in self.vars.iter().enumerate() {
            values[i] = match &v.kind {
                VarKind::InputX => Some(BatchedTensor::from_slice(x)),
                VarKind::InputLambda => Some(BatchedTensor::from_slice(&[lambda])),
                VarKind::Constant(t) => Some(t.clone()),
                VarKind::Output => None,
            };
        }
        let mut forward = Vec::with_capacity(self.nodes.len());
        for (ni, n) in self.nodes.iter().enumerate() {
            let ins: Vec<&BatchedTensor> = n
                .inputs
                .iter()
                .map(|v| values[v.0].as_ref().unwrap())
                .collect();
            let f = n.op.forward(&ins).map_err(|e| e.at_vertex(ni))?;
            for (v, t) in n.outputs.iter().zip(&f.outputs) {
                values[v.0] = Some(t.clone());
            }
            forward.push(f);
        }
        Ok(Evaluation {
            values: values.into_iter().map(Option::unwrap).collect(),
            forward,
        })
    }

    /// Graph output at `(x, λ)`, flattened.
    pub fn output(&self, x: &[f64], lambda: f64) -> Result<Vec<f64>> {
        Ok(self.evaluate(x, lambda)?.values[self.output.0].to_vec())
    }

    pub fn linearize(&self, eval: Evaluation) -> Result<Linearization> {
        let mut local = Vec::with_capacity(self.nodes.len());
        for (ni, n) in self.nodes.iter().enumerate() {
            let ins: Vec<&BatchedTensor> = n.inputs.iter().map(|v| &eval.values[v.0]).collect();
            let j = n
                .op
                .jacobian(&ins, &eval.forward[ni])
                .map_err(|e| e.at_vertex(ni))?;
            local.push(j);
        }
        Ok(Linearization { eval, local })
    }

    /// `(∂out/∂x, ∂out/∂λ)` by reverse accumulation of the local Jacobians.
    pub fn jacobian(&self, lin: &Linearization) -> (CsrMatrix, Vec<f64>) {
        let m = self.num_outputs();
        let mut adj: Vec<Option<CsrMatrix>> = vec![None; self.vars.len()];
        adj[self.output.0] = Some(CsrMatrix::identity(m));
        for (ni, n) in self.nodes.iter().enumerate().rev() {
            for (o, ov) in n.outputs.iter().enumerate() {
                let Some(a) = adj[ov.0].take() else { continue };
                for (i, iv) in n.inputs.iter().enumerate() {
                    let j = &lin.local[ni][o][i];
                    if j.is_zero() {
                        continue;
                    }
                    let c = right_mul(&a, j, self.vars[iv.0].shape.len());
                    adj[iv.0] = Some(match adj[iv.0].take() {
                        Some(prev) => prev.add(&c).unwrap(),
                        None => c,
                    });
                }
            }
        }
        let p = adj[self.x.0]
            .take()
            .unwrap_or_else(|| CsrMatrix::zeros(m, self.num_inputs()));
        let v = self
            .lambda
            .and_then(|l| adj[l.0].take())
            .map_or_else(|| vec![0.0; m], |a| a.to_dense());
        (p, v)
    }

    /// Dense `∂out/∂x` by forward differences, for checking.
    pub fn jacobian_fd(&self, x: &[f64], lambda: f64, h: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let (n, m) = (self.num_inputs(), self.num_outputs());
        let mut p = vec![0.0; m * n];
        let mut xp = x.to_vec();
        for c in 0..n {
            xp[c] = x[c] + h;
            let fp = self.output(&xp, lambda)?;
            xp[c] = x[c] - h;
            let fm = self.output(&xp, lambda)?;
            xp[c] = x[c];
            for r in 0..m {
                p[r * n + c] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        let fp = self.output(x, lambda + h)?;
        let fm = self.output(x, lambda - h)?;
        let v = fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        Ok((p, v))
    }
}
