//! Order-by-order Taylor propagation through a linearized graph.

use alloc::vec;
use alloc::vec::Vec;

use super::{ComputeGraph, Linearization, VarKind};
use crate::error::Result;
use crate::tensor::{BatchedTensor, Shape};

/// Taylor series of every variable, grown one order at a time.
///
/// Each order is a two-step exchange with the solver: [`bias`](Self::bias)
/// propagates with `x_k = 0, λ_k = 0` and returns the output coefficient,
/// which is the right-hand side term of the bordered system; once the
/// solver has `x_k, λ_k`, [`commit`](Self::commit) fixes order `k`.
#[derive(Debug)]
pub struct SeriesState<'g> {
    graph: &'g ComputeGraph,
    lin: &'g Linearization,
    coeffs: Vec<Vec<BatchedTensor>>,
    aux: Vec<Vec<BatchedTensor>>,
    lambda: Vec<f64>,
    biases: Vec<Option<Vec<BatchedTensor>>>,
}

impl<'g> SeriesState<'g> {
    pub fn new(graph: &'g ComputeGraph, lin: &'g Linearization) -> Self {
        let coeffs = lin.eval.values.iter().map(|v| vec![v.clone()]).collect();
        let aux = lin.eval.forward.iter().map(|f| f.aux.clone()).collect();
        let lambda0 = graph.lambda.map_or(0.0, |l| lin.eval.values[l.0].to_vec()[0]);
        SeriesState {
            graph,
            lin,
            coeffs,
            aux,
            lambda: vec![lambda0],
            biases: vec![None; graph.nodes.len()],
        }
    }

    /// Number of committed orders, including order zero.
    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coefficients(&self, v: super::VarId) -> &[BatchedTensor] {
        &self.coeffs[v.0]
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// `x_0, x_1, …`
    pub fn x_series(&self) -> Vec<Vec<f64>> {
        self.coeffs[self.graph.x.0].iter().map(BatchedTensor::to_vec).collect()
    }

    fn input_coeff(&self, kind: &VarKind, shape: Shape, xk: Option<&[f64]>, lk: f64) -> BatchedTensor {
        match kind {
            VarKind::InputX => match xk {
                Some(x) => BatchedTensor::from_slice(x),
                None => BatchedTensor::zeros(shape),
            },
            VarKind::InputLambda => BatchedTensor::from_slice(&[lk]),
            _ => BatchedTensor::zeros(shape),
        }
    }

    /// Propagates order `k` given the order-`k` inputs; biases are computed
    /// once per order and cached.
    fn propagate(&mut self, xk: Option<&[f64]>, lk: f64) -> Result<Vec<BatchedTensor>> {
        let g = self.graph;
        let k = self.len();
        let mut cur: Vec<Option<BatchedTensor>> = g
            .vars
            .iter()
            .map(|v| match v.kind {
                VarKind::Output => None,
                ref kind => Some(self.input_coeff(kind, v.shape, xk, lk)),
            })
            .collect();
        for (ni, n) in g.nodes.iter().enumerate() {
            if self.biases[ni].is_none() {
                let ins: Vec<&[BatchedTensor]> = n.inputs.iter().map(|v| &self.coeffs[v.0][..]).collect();
                let outs: Vec<&[BatchedTensor]> = n.outputs.iter().map(|v| &self.coeffs[v.0][..]).collect();
                let b = n
                    .op
                    .bias(k, &ins, &outs, &self.aux[ni])
                    .map_err(|e| e.at_vertex(ni))?;
                self.biases[ni] = Some(b);
            }
            let bias = self.biases[ni].as_ref().unwrap();
            for (o, ov) in n.outputs.iter().enumerate() {
                let shape = g.vars[ov.0].shape;
                let mut acc = bias[o].clone();
                for (i, iv) in n.inputs.iter().enumerate() {
                    let j = &self.lin.local[ni][o][i];
                    let x = cur[iv.0].as_ref().unwrap();
                    if j.is_zero() || x.is_zero() {
                        continue;
                    }
                    acc = acc.add(&j.apply(x, shape))?;
                }
                cur[ov.0] = Some(acc);
            }
        }
        Ok(cur.into_iter().map(Option::unwrap).collect())
    }

    /// Output coefficient of order `k = len()` with `x_k = 0, λ_k = 0`.
    pub fn bias(&mut self) -> Result<Vec<f64>> {
        let cur = self.propagate(None, 0.0)?;
        Ok(cur[self.graph.output.0].to_vec())
    }

    /// Fixes order `k = len()` with the solved `x_k, λ_k`.
    pub fn commit(&mut self, xk: &[f64], lk: f64) -> Result<()> {
        let cur = self.propagate(Some(xk), lk)?;
        let k = self.len();
        for (v, c) in self.coeffs.iter_mut().zip(cur) {
            v.push(c);
        }
        self.lambda.push(lk);
        for (ni, n) in self.graph.nodes.iter().enumerate() {
            let ins: Vec<&[BatchedTensor]> = n.inputs.iter().map(|v| &self.coeffs[v.0][..]).collect();
            let outs: Vec<&[BatchedTensor]> = n.outputs.iter().map(|v| &self.coeffs[v.0][..]).collect();
            if let Some(a) = n
                .op
                .commit_aux(k, &ins, &outs, &self.aux[ni])
                .map_err(|e| e.at_vertex(ni))?
            {
                self.aux[ni].push(a);
            }
        }
        self.biases.iter_mut().for_each(|b| *b = None);
        Ok(())
    }
}
