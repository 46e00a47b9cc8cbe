//! Tetrahedral meshes and per-element geometry.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::dense;

pub type Vec3 = [f64; 3];

#[derive(Clone, Debug)]
pub struct TetMesh {
    pub nodes: Vec<Vec3>,
    pub tets: Vec<[usize; 4]>,
    /// Number of input tets whose node order was flipped to make the
    /// signed volume positive.
    pub reoriented: usize,
}

/// Shape matrix of a tet: columns `x_j − x_0`, row-major.
pub fn shape_matrix(coords: &[Vec3], t: &[usize; 4]) -> [f64; 9] {
    let mut d = [0.0; 9];
    for c in 0..3 {
        for r in 0..3 {
            d[r * 3 + c] = coords[t[c + 1]][r] - coords[t[0]][r];
        }
    }
    d
}

/// Barycentric gradients `G[j]` (rows) of a tet with inverse shape matrix
/// `dinv`: `F = Σ_j x_j ⊗ G[j]`, and `G[0] = −Σ_{j≥1} G[j]`.
pub fn barycentric_gradients(dinv: &[f64; 9]) -> [Vec3; 4] {
    let mut g = [[0.0; 3]; 4];
    for j in 1..4 {
        for c in 0..3 {
            g[j][c] = dinv[(j - 1) * 3 + c];
            g[0][c] -= g[j][c];
        }
    }
    g
}

/// Per-tet geometry in one configuration.
#[derive(Clone, Debug)]
pub struct TetGeometry {
    /// `D⁻¹`, row-major.
    pub dinv: Vec<[f64; 9]>,
    pub volume: Vec<f64>,
    /// Area-weighted outward normals `n̄_{t,j}`: one third of the area
    /// normal of the face opposite node `j`.
    pub normals: Vec<[Vec3; 4]>,
}

impl TetMesh {
    /// Validates indices, flips negatively oriented tets, and rejects
    /// degenerate ones.
    pub fn new(nodes: Vec<Vec3>, mut tets: Vec<[usize; 4]>) -> Result<Self> {
        if nodes.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Mesh("non-finite node coordinate".into()));
        }
        for (i, t) in tets.iter().enumerate() {
            if let Some(&bad) = t.iter().find(|&&v| v >= nodes.len()) {
                return Err(Error::Mesh(format!("tet {i} references node {bad} of {}", nodes.len())));
            }
        }
        let scale = bbox_diagonal(&nodes);
        let tol = 1e-12 * scale * scale * scale;
        let mut reoriented = 0;
        for (i, t) in tets.iter_mut().enumerate() {
            let d = dense::det(&shape_matrix(&nodes, t), 3);
            if !(d.abs() >= tol) || d == 0.0 {
                return Err(Error::Mesh(format!("tet {i} is degenerate (det {d:e})")));
            }
            if d < 0.0 {
                t.swap(2, 3);
                reoriented += 1;
            }
        }
        Ok(TetMesh {
            nodes,
            tets,
            reoriented,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn bbox_diagonal(&self) -> f64 {
        bbox_diagonal(&self.nodes)
    }

    /// Geometry of the mesh at `coords` (which must keep every tet
    /// positively oriented).
    pub fn geometry(&self, coords: &[Vec3]) -> Result<TetGeometry> {
        let n = self.tets.len();
        let mut g = TetGeometry {
            dinv: Vec::with_capacity(n),
            volume: Vec::with_capacity(n),
            normals: Vec::with_capacity(n),
        };
        for (i, t) in self.tets.iter().enumerate() {
            let d = shape_matrix(coords, t);
            let det = dense::det(&d, 3);
            if !(det > 0.0) {
                return Err(Error::InvertedElement {
                    tet: i,
                    segment: 0,
                    lambda: 0.0,
                });
            }
            let inv: [f64; 9] = dense::inverse(&d, 3)
                .ok_or_else(|| Error::Mesh(format!("tet {i} is singular")))?
                .try_into()
                .unwrap();
            let vol = det / 6.0;
            let grads = barycentric_gradients(&inv);
            let normals = grads.map(|gj| gj.map(|v| -vol * v));
            g.dinv.push(inv);
            g.volume.push(vol);
            g.normals.push(normals);
        }
        Ok(g)
    }

    /// Lumped nodal masses: a quarter of each incident tet's mass.
    pub fn lumped_masses(&self, coords: &[Vec3], density: f64) -> Result<Vec<f64>> {
        let g = self.geometry(coords)?;
        let mut m = vec![0.0; self.nodes.len()];
        for (t, v) in self.tets.iter().zip(&g.volume) {
            for &i in t {
                m[i] += density * v / 4.0;
            }
        }
        Ok(m)
    }

    /// First tet with `det(D) ≤ 0` at `coords`.
    pub fn first_inverted(&self, coords: &[Vec3]) -> Option<usize> {
        self.tets
            .iter()
            .position(|t| !(dense::det(&shape_matrix(coords, t), 3) > 0.0))
    }

    /// Regular grid of `n[0]×n[1]×n[2]` cells spanning `size`, each cell
    /// split into six tets around its main diagonal.
    pub fn box_grid(n: [usize; 3], size: Vec3) -> Result<Self> {
        if n.contains(&0) {
            return Err(Error::Mesh("grid needs at least one cell per axis".into()));
        }
        let idx = |i: usize, j: usize, k: usize| (k * (n[1] + 1) + j) * (n[0] + 1) + i;
        let mut nodes = Vec::with_capacity((n[0] + 1) * (n[1] + 1) * (n[2] + 1));
        for k in 0..=n[2] {
            for j in 0..=n[1] {
                for i in 0..=n[0] {
                    nodes.push([
                        size[0] * i as f64 / n[0] as f64,
                        size[1] * j as f64 / n[1] as f64,
                        size[2] * k as f64 / n[2] as f64,
                    ]);
                }
            }
        }
        const PATHS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let mut tets = Vec::with_capacity(6 * n[0] * n[1] * n[2]);
        for k in 0..n[2] {
            for j in 0..n[1] {
                for i in 0..n[0] {
                    for p in PATHS {
                        let mut c = [i, j, k];
                        let mut t = [idx(i, j, k), 0, 0, 0];
                        for (s, &axis) in p.iter().enumerate() {
                            c[axis] += 1;
                            t[s + 1] = idx(c[0], c[1], c[2]);
                        }
                        tets.push(t);
                    }
                }
            }
        }
        TetMesh::new(nodes, tets)
    }
}

pub fn bbox_diagonal(nodes: &[Vec3]) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    let mut lo = nodes[0];
    let mut hi = nodes[0];
    for p in nodes {
        for c in 0..3 {
            lo[c] = lo[c].min(p[c]);
            hi[c] = hi[c].max(p[c]);
        }
    }
    libm::sqrt((0..3).map(|c| (hi[c] - lo[c]) * (hi[c] - lo[c])).sum())
}
