//! Static equilibrium of tetrahedral hyperelastic meshes.
//!
//! Nodal forces are `f_i = Σ_t P(F_t) n̄_{t,i}` with `F = D_s D_m⁻¹` and
//! `n̄` the area-weighted outward normals of the reference state, which is
//! `−∇` of the total strain energy. Three problems are provided:
//!
//! * [`solve_forward`]: rest shape and body force given, deformed shape
//!   wanted. Solved by equational continuation from the rest state.
//! * [`solve_inverse`]: deformed shape and body force given, rest shape
//!   wanted. Forces are written with the Cauchy stress and the normals of
//!   the deformed state, so the unknown rest coordinates enter through
//!   `D_m⁻¹` only.
//! * [`solve_deform`]: handle nodes follow a path of rigid transforms; one
//!   continuation per path chord, then a low-order equational refinement.

mod material;
mod mesh;
mod path;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

pub use material::{MaterialSpec, Model};
pub use mesh::{barycentric_gradients, bbox_diagonal, shape_matrix, TetGeometry, TetMesh, Vec3};
pub use path::{Handle, Transform};

use crate::anm::{
    continuation, equational_continuation, Approximant, ContinuationTrace, Homotopy, Options,
};
use crate::error::{Error, Result};
use crate::graph::{ComputeGraph, GraphBuilder};
use crate::sparse::{SparseAffineMap, TripletBuilder};
use crate::{rms, BatchedTensor, Shape};
use material::StressBuilder;

/// Problem description shared by the three drivers.
#[derive(Clone, Debug)]
pub struct ProblemConfig {
    pub material: MaterialSpec,
    /// Body acceleration; nodal loads are `m_i g`.
    pub gravity: Vec3,
    /// Nodes held at their given position.
    pub fixed: Vec<usize>,
    /// Prescribed nodal masses, overriding lumping from the density.
    pub masses: Option<Vec<f64>>,
    pub handles: Vec<Handle>,
    /// Rotation waypoints are followed by linear chords of at most this
    /// angle (degrees).
    pub max_chord_angle_deg: f64,
    /// Truncation order of the final refinement of a deformation.
    pub refine_order: usize,
    pub solver: Options,
}

impl ProblemConfig {
    pub fn new(material: MaterialSpec) -> Self {
        ProblemConfig {
            material,
            gravity: [0.0; 3],
            fixed: Vec::new(),
            masses: None,
            handles: Vec::new(),
            max_chord_angle_deg: 30.0,
            refine_order: 6,
            solver: Options::default(),
        }
    }
}

/// One accepted continuation step, expanded to full node coordinates.
#[derive(Clone, Debug)]
pub struct StepState {
    /// Index into [`FemSolution::phases`].
    pub phase: usize,
    pub lambda: f64,
    pub a: f64,
    pub a_m: f64,
    pub kind: Approximant,
    pub residual_rms: f64,
    pub coords: Vec<Vec3>,
}

/// One continuation run within a solve.
#[derive(Clone, Debug)]
pub struct Phase {
    pub label: String,
    pub segment: usize,
    pub trace: ContinuationTrace,
}

#[derive(Clone, Debug)]
pub struct FemSolution {
    /// Solved coordinates of every node.
    pub coords: Vec<Vec3>,
    /// RMS of the nodal force residual of the free nodes.
    pub residual_rms: f64,
    pub phases: Vec<Phase>,
    pub steps: Vec<StepState>,
    /// Nodal masses used for the body force.
    pub masses: Vec<f64>,
}

impl FemSolution {
    pub fn iterations(&self) -> usize {
        self.phases.iter().map(|p| p.trace.iterations()).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Role {
    Free(usize),
    Fixed,
    Handle,
}

/// Split of the nodes into unknowns and prescribed positions.
#[derive(Clone, Debug)]
struct Layout {
    roles: Vec<Role>,
    free: Vec<usize>,
}

impl Layout {
    fn new(n: usize, fixed: &[usize], handles: &[Handle]) -> Result<Self> {
        let mut roles = vec![Role::Free(0); n];
        for &i in fixed {
            *roles
                .get_mut(i)
                .ok_or_else(|| Error::Config(format!("fixed node {i} out of range")))? = Role::Fixed;
        }
        for h in handles {
            for &i in &h.nodes {
                match roles.get(i) {
                    None => return Err(Error::Config(format!("handle node {i} out of range"))),
                    Some(Role::Fixed) => {
                        return Err(Error::Config(format!("node {i} is both fixed and a handle")))
                    }
                    Some(Role::Handle) => {
                        return Err(Error::Config(format!("node {i} belongs to two handles")))
                    }
                    _ => roles[i] = Role::Handle,
                }
            }
        }
        let mut free = Vec::new();
        for (i, r) in roles.iter_mut().enumerate() {
            if let Role::Free(_) = r {
                *r = Role::Free(free.len());
                free.push(i);
            }
        }
        Ok(Layout { roles, free })
    }

    fn dim(&self) -> usize {
        3 * self.free.len()
    }

    fn gather(&self, coords: &[Vec3]) -> Vec<f64> {
        self.free.iter().flat_map(|&i| coords[i]).collect()
    }

    /// Full coordinates from unknowns `x`, prescribed positions `base`,
    /// and prescribed motion `λ·dir`.
    fn scatter(&self, x: &[f64], base: &[Vec3], dir: Option<(&[Vec3], f64)>) -> Vec<Vec3> {
        let mut out = base.to_vec();
        for (i, r) in self.roles.iter().enumerate() {
            match *r {
                Role::Free(k) => out[i] = [x[3 * k], x[3 * k + 1], x[3 * k + 2]],
                _ => {
                    if let Some((d, l)) = dir {
                        for c in 0..3 {
                            out[i][c] += l * d[i][c];
                        }
                    }
                }
            }
        }
        out
    }
}

/// Force assembly `f = Σ_t S_t n_{t,j}` from a stress batch to free nodes.
fn assemble_forces(
    b: &mut GraphBuilder,
    mesh: &TetMesh,
    layout: &Layout,
    normals: &[[Vec3; 4]],
    stress: crate::graph::VarId,
) -> Result<crate::graph::VarId> {
    let nt = mesh.num_tets();
    let mut t = TripletBuilder::new(layout.dim(), 9 * nt);
    for (e, tet) in mesh.tets.iter().enumerate() {
        for (j, &v) in tet.iter().enumerate() {
            if let Role::Free(k) = layout.roles[v] {
                for r in 0..3 {
                    for c in 0..3 {
                        t.push(3 * k + r, 9 * e + 3 * r + c, normals[e][j][c]);
                    }
                }
            }
        }
    }
    let map = SparseAffineMap::linear(t.build());
    b.sparse_affine(map, &[stress], Shape::vector(layout.dim()))
}

/// Sparse map from `[x; λ]` to the stacked deformation gradients.
fn gradient_map(
    mesh: &TetMesh,
    geo: &TetGeometry,
    layout: &Layout,
    base: &[Vec3],
    dir: Option<&[Vec3]>,
) -> Result<SparseAffineMap> {
    let nt = mesh.num_tets();
    let n = layout.dim();
    let mut t = TripletBuilder::new(9 * nt, n + usize::from(dir.is_some()));
    let mut offset = vec![0.0; 9 * nt];
    for (e, tet) in mesh.tets.iter().enumerate() {
        let g = barycentric_gradients(&geo.dinv[e]);
        for (j, &v) in tet.iter().enumerate() {
            for r in 0..3 {
                for c in 0..3 {
                    let row = 9 * e + 3 * r + c;
                    let w = g[j][c];
                    match layout.roles[v] {
                        Role::Free(k) => t.push(row, 3 * k + r, w),
                        _ => {
                            offset[row] += base[v][r] * w;
                            if let Some(d) = dir {
                                if d[v][r] != 0.0 {
                                    t.push(row, n, d[v][r] * w);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    SparseAffineMap::new(t.build(), offset)
}

/// Internal force graph in the reference configuration `mesh.nodes`.
/// Prescribed nodes sit at `base`, moving by `λ·dir` when `dir` is given.
fn forward_graph(
    mesh: &TetMesh,
    geo: &TetGeometry,
    layout: &Layout,
    material: &MaterialSpec,
    base: &[Vec3],
    dir: Option<&[Vec3]>,
) -> Result<ComputeGraph> {
    let mut b = GraphBuilder::new();
    let x = b.input_x(layout.dim())?;
    let mut inputs = vec![x];
    if dir.is_some() {
        inputs.push(b.input_lambda()?);
    }
    let map = gradient_map(mesh, geo, layout, base, dir)?;
    let f = b.sparse_affine(map, &inputs, Shape::new(mesh.num_tets(), 3, 3))?;
    let p = StressBuilder::new(&mut b, f).pk1(material)?;
    let out = assemble_forces(&mut b, mesh, layout, &geo.normals, p)?;
    b.finish(out)
}

/// Internal force graph of the deformed configuration `mesh.nodes` as a
/// function of the rest coordinates of the free nodes.
fn inverse_graph(
    mesh: &TetMesh,
    geo: &TetGeometry,
    layout: &Layout,
    material: &MaterialSpec,
) -> Result<ComputeGraph> {
    let nt = mesh.num_tets();
    let n = layout.dim();
    let mut b = GraphBuilder::new();
    let x = b.input_x(n)?;
    // D_m[r][c] = X_{c+1}[r] − X_0[r]; prescribed nodes keep their given
    // position in both states.
    let mut t = TripletBuilder::new(9 * nt, n);
    let mut offset = vec![0.0; 9 * nt];
    let mut ds = Vec::with_capacity(9 * nt);
    for (e, tet) in mesh.tets.iter().enumerate() {
        ds.extend_from_slice(&shape_matrix(&mesh.nodes, tet));
        for (j, &v) in tet.iter().enumerate() {
            for r in 0..3 {
                for c in 0..3 {
                    let w = if j == 0 {
                        -1.0
                    } else if j == c + 1 {
                        1.0
                    } else {
                        continue;
                    };
                    let row = 9 * e + 3 * r + c;
                    match layout.roles[v] {
                        Role::Free(k) => t.push(row, 3 * k + r, w),
                        _ => offset[row] += w * mesh.nodes[v][r],
                    }
                }
            }
        }
    }
    let dm = b.sparse_affine(SparseAffineMap::new(t.build(), offset)?, &[x], Shape::new(nt, 3, 3))?;
    let dm_inv = b.inverse(dm)?;
    let ds = b.constant(BatchedTensor::from_vec(Shape::new(nt, 3, 3), ds)?);
    let f = b.matmul(ds, dm_inv)?;
    let sigma = StressBuilder::new(&mut b, f).cauchy(material)?;
    let out = assemble_forces(&mut b, mesh, layout, &geo.normals, sigma)?;
    b.finish(out)
}

fn body_force(layout: &Layout, masses: &[f64], g: Vec3) -> Vec<f64> {
    layout
        .free
        .iter()
        .flat_map(|&i| g.map(|c| masses[i] * c))
        .collect()
}

fn masses_for(mesh: &TetMesh, cfg: &ProblemConfig) -> Result<Vec<f64>> {
    match &cfg.masses {
        Some(m) if m.len() != mesh.num_nodes() => Err(Error::Config(format!(
            "{} masses for {} nodes",
            m.len(),
            mesh.num_nodes()
        ))),
        Some(m) => Ok(m.clone()),
        None => mesh.lumped_masses(&mesh.nodes, cfg.material.density),
    }
}

fn check_config(cfg: &ProblemConfig) -> Result<()> {
    cfg.material.validate()?;
    if cfg.gravity.iter().any(|g| !g.is_finite()) {
        return Err(Error::Config("gravity must be finite".into()));
    }
    if !(cfg.solver.order >= 1) {
        return Err(Error::Config("truncation order must be at least 1".into()));
    }
    if !(cfg.solver.eps_rov > 0.0 && cfg.solver.eps_res > 0.0) {
        return Err(Error::Config("tolerances must be positive".into()));
    }
    Ok(())
}

fn push_phase(
    sol: &mut FemSolution,
    label: String,
    segment: usize,
    trace: ContinuationTrace,
    coords: impl Fn(&[f64], f64) -> Vec<Vec3>,
) {
    let phase = sol.phases.len();
    for s in &trace.steps {
        sol.steps.push(StepState {
            phase,
            lambda: s.lambda,
            a: s.a,
            a_m: s.a_m,
            kind: s.kind,
            residual_rms: s.residual_rms,
            coords: coords(&s.x, s.lambda),
        });
    }
    sol.phases.push(Phase {
        label,
        segment,
        trace,
    });
}

fn inversion_check<'a>(
    mesh: &'a TetMesh,
    coords: impl Fn(&[f64], f64) -> Vec<Vec3> + 'a,
    segment: usize,
    lambda_map: impl Fn(f64) -> f64 + 'a,
) -> impl FnMut(&[f64], f64) -> Result<()> + 'a {
    move |x, l| match mesh.first_inverted(&coords(x, l)) {
        Some(tet) => Err(Error::InvertedElement {
            tet,
            segment,
            lambda: lambda_map(l),
        }),
        None => Ok(()),
    }
}

/// Deformed shape of `mesh` (the rest state) under the body force.
pub fn solve_forward(mesh: &TetMesh, cfg: &ProblemConfig) -> Result<FemSolution> {
    check_config(cfg)?;
    let layout = Layout::new(mesh.num_nodes(), &cfg.fixed, &[])?;
    let geo = mesh.geometry(&mesh.nodes)?;
    let masses = masses_for(mesh, cfg)?;
    let g = forward_graph(mesh, &geo, &layout, &cfg.material, &mesh.nodes, None)?;
    let v = body_force(&layout, &masses, cfg.gravity);
    let x0 = layout.gather(&mesh.nodes);
    let coords = |x: &[f64], _: f64| layout.scatter(x, &mesh.nodes, None);
    let mut check = inversion_check(mesh, coords, 0, |l| l);
    let s = equational_continuation(&g, &v, &x0, &cfg.solver, &mut check)?;
    let mut sol = FemSolution {
        coords: coords(&s.x, 1.0),
        residual_rms: s.residual_rms,
        phases: Vec::new(),
        steps: Vec::new(),
        masses,
    };
    push_phase(&mut sol, "forward".into(), 0, s.trace, coords);
    Ok(sol)
}

/// Rest shape whose equilibrium under the body force is `mesh` (the
/// deformed state). Fixed nodes keep their position. Without prescribed
/// masses, lumping uses the deformed volumes.
pub fn solve_inverse(mesh: &TetMesh, cfg: &ProblemConfig) -> Result<FemSolution> {
    check_config(cfg)?;
    let layout = Layout::new(mesh.num_nodes(), &cfg.fixed, &[])?;
    let geo = mesh.geometry(&mesh.nodes)?;
    let masses = masses_for(mesh, cfg)?;
    let g = inverse_graph(mesh, &geo, &layout, &cfg.material)?;
    let v = body_force(&layout, &masses, cfg.gravity);
    let x0 = layout.gather(&mesh.nodes);
    let coords = |x: &[f64], _: f64| layout.scatter(x, &mesh.nodes, None);
    let mut check = inversion_check(mesh, coords, 0, |l| l);
    let s = equational_continuation(&g, &v, &x0, &cfg.solver, &mut check)?;
    let mut sol = FemSolution {
        coords: coords(&s.x, 1.0),
        residual_rms: s.residual_rms,
        phases: Vec::new(),
        steps: Vec::new(),
        masses,
    };
    push_phase(&mut sol, "inverse".into(), 0, s.trace, coords);
    Ok(sol)
}

/// Moves the handles of `cfg` along their waypoints starting from the
/// rest state `mesh`, then refines the final state. Body forces are not
/// applied.
pub fn solve_deform(mesh: &TetMesh, cfg: &ProblemConfig) -> Result<FemSolution> {
    check_config(cfg)?;
    let layout = Layout::new(mesh.num_nodes(), &cfg.fixed, &cfg.handles)?;
    let geo = mesh.geometry(&mesh.nodes)?;
    let chords = path::chords(&cfg.handles, cfg.max_chord_angle_deg)?;
    let mut x = layout.gather(&mesh.nodes);
    let mut base = mesh.nodes.clone();
    let mut sol = FemSolution {
        coords: mesh.nodes.clone(),
        residual_rms: 0.0,
        phases: Vec::new(),
        steps: Vec::new(),
        masses: masses_for(mesh, cfg)?,
    };
    for ch in &chords {
        let mut dir = vec![[0.0; 3]; mesh.num_nodes()];
        let mut moving = false;
        for (h, ends) in cfg.handles.iter().zip(&ch.targets) {
            for (&i, p) in h.nodes.iter().zip(ends) {
                for c in 0..3 {
                    dir[i][c] = p[c] - base[i][c];
                }
                moving |= dir[i] != [0.0; 3];
            }
        }
        if !moving {
            continue;
        }
        let g = forward_graph(mesh, &geo, &layout, &cfg.material, &base, Some(&dir))?;
        // Absorb the start residual so that H(x, 0) = 0 exactly:
        // H = G(x, λ) − (1 − λ) G(x_start, 0).
        let r0 = g.output(&x, 0.0)?;
        let h = Homotopy {
            graph: &g,
            direction: r0.clone(),
            offset: r0.iter().map(|v| -v).collect(),
        };
        let coords = |x: &[f64], l: f64| layout.scatter(x, &base, Some((&dir, l)));
        let (s0, s1) = (ch.start, ch.end);
        let mut check = inversion_check(mesh, coords, ch.segment, move |l| s0 + l * (s1 - s0));
        let s = continuation(&h, &x, 0.0, 1.0, &cfg.solver, &mut check)?;
        drop(check);
        x = s.x;
        push_phase(&mut sol, format!("segment {} chord {}", ch.segment, ch.index), ch.segment, s.trace, coords);
        base = layout.scatter(&x, &base, Some((&dir, 1.0)));
    }
    let g = forward_graph(mesh, &geo, &layout, &cfg.material, &base, None)?;
    let zero = vec![0.0; layout.dim()];
    let opts = Options {
        order: cfg.refine_order,
        ..cfg.solver
    };
    let coords = |x: &[f64], _: f64| layout.scatter(x, &base, None);
    let last = chords.last().map_or(0, |c| c.segment);
    let mut check = inversion_check(mesh, coords, last, |_| 1.0);
    let s = equational_continuation(&g, &zero, &x, &opts, &mut check)?;
    sol.coords = coords(&s.x, 1.0);
    sol.residual_rms = s.residual_rms;
    push_phase(&mut sol, "refine".into(), last, s.trace, coords);
    Ok(sol)
}

/// Internal nodal forces of every node at `coords`, for a mesh whose
/// reference state is `mesh.nodes`. Used for residual reporting.
pub fn nodal_forces(mesh: &TetMesh, material: &MaterialSpec, coords: &[Vec3]) -> Result<Vec<Vec3>> {
    let layout = Layout::new(mesh.num_nodes(), &[], &[])?;
    let geo = mesh.geometry(&mesh.nodes)?;
    let g = forward_graph(mesh, &geo, &layout, material, &mesh.nodes, None)?;
    let f = g.output(&layout.gather(coords), 0.0)?;
    Ok(f.chunks(3).map(|c| [c[0], c[1], c[2]]).collect())
}

/// RMS of `f_int + m g` over the nodes not in `fixed`.
pub fn equilibrium_residual(
    mesh: &TetMesh,
    material: &MaterialSpec,
    coords: &[Vec3],
    masses: &[f64],
    gravity: Vec3,
    fixed: &[usize],
) -> Result<f64> {
    let f = nodal_forces(mesh, material, coords)?;
    let mut skip = vec![false; mesh.num_nodes()];
    fixed.iter().for_each(|&i| skip[i] = true);
    let r: Vec<f64> = f
        .iter()
        .enumerate()
        .filter(|(i, _)| !skip[*i])
        .flat_map(|(i, v)| (0..3).map(move |c| v[c] + masses[i] * gravity[c]))
        .collect();
    Ok(rms(&r))
}

/// Force graph of the forward problem with every node free, for
/// Jacobian checks and benchmarks.
pub fn force_graph(mesh: &TetMesh, material: &MaterialSpec) -> Result<ComputeGraph> {
    let layout = Layout::new(mesh.num_nodes(), &[], &[])?;
    let geo = mesh.geometry(&mesh.nodes)?;
    forward_graph(mesh, &geo, &layout, material, &mesh.nodes, None)
}

/// Graph from all node coordinates (flattened) to the per-tet deformation
/// gradients relative to `mesh.nodes`, as a `T×3×3` batch.
pub fn deformation_gradient_graph(mesh: &TetMesh) -> Result<ComputeGraph> {
    let layout = Layout::new(mesh.num_nodes(), &[], &[])?;
    let geo = mesh.geometry(&mesh.nodes)?;
    let mut b = GraphBuilder::new();
    let x = b.input_x(layout.dim())?;
    let map = gradient_map(mesh, &geo, &layout, &mesh.nodes, None)?;
    let f = b.sparse_affine(map, &[x], Shape::new(mesh.num_tets(), 3, 3))?;
    b.finish(f)
}

/// Graph from a batch of `batch` row-major deformation gradients to the
/// first Piola–Kirchhoff stress, or the Cauchy stress with `cauchy`.
pub fn stress_graph(material: &MaterialSpec, batch: usize, cauchy: bool) -> Result<ComputeGraph> {
    let mut b = GraphBuilder::new();
    let x = b.input_x(9 * batch)?;
    let f = b.reshape(x, Shape::new(batch, 3, 3))?;
    let mut s = StressBuilder::new(&mut b, f);
    let out = if cauchy { s.cauchy(material)? } else { s.pk1(material)? };
    b.finish(out)
}
