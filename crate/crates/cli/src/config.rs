//! TOML problem configuration.
//!
//! ```toml
//! gravity = [0.0, 0.0, -0.01]
//!
//! [material]
//! model = "nc"        # nc | ni | arap
//! mu = 1.0
//! lambda = 2.0
//! density = 1.0
//!
//! [fixed]
//! box = { min = [-0.01, -1, -1], max = [0.01, 2, 2] }
//!
//! [[handles]]
//! nodes = [12, 13, 14]
//! [[handles.waypoints]]
//! rotate = { axis = [1, 0, 0], angle_deg = 360, center = [6, 0.5, 0.5] }
//! translate = [0, 0, 1]
//!
//! [solver]
//! order = 20
//! eps_rov = 1e-4
//! ```
//!
//! Node indices use the index base of the mesh files.

use std::path::Path;

use anm_core::anm::Options;
use anm_core::fem::{Handle, MaterialSpec, Model, ProblemConfig, TetMesh, Transform, Vec3};
use serde::Deserialize;

use crate::InputError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub material: MaterialSection,
    pub gravity: Option<Vec3>,
    pub fixed: Option<Selection>,
    #[serde(default)]
    pub handles: Vec<HandleSection>,
    #[serde(default)]
    pub solver: SolverSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSection {
    pub model: String,
    pub mu: f64,
    pub lambda: Option<f64>,
    pub kappa: Option<f64>,
    pub density: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSelection {
    pub min: Vec3,
    pub max: Vec3,
}

/// Explicit node list, an axis-aligned box, or both (union).
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Selection {
    #[serde(default)]
    pub nodes: Vec<usize>,
    #[serde(rename = "box")]
    pub bbox: Option<BoxSelection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rotation {
    pub axis: Vec3,
    pub angle_deg: f64,
    #[serde(default)]
    pub center: Vec3,
}

/// Rotation first, then translation.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub rotate: Option<Rotation>,
    pub translate: Option<Vec3>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandleSection {
    #[serde(flatten)]
    pub select: Selection,
    #[serde(default)]
    pub waypoints: Vec<Waypoint>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub order: Option<usize>,
    pub eps_rov: Option<f64>,
    pub eps_res: Option<f64>,
    pub max_iter: Option<usize>,
    pub pade: Option<bool>,
    pub max_chord_angle_deg: Option<f64>,
    pub refine_order: Option<usize>,
}

pub fn parse(path: &Path, text: &str) -> Result<ConfigFile, InputError> {
    toml::from_str(text).map_err(|e| InputError::new(format!("{}: {e}", path.display())))
}

pub fn load(path: &Path) -> Result<ConfigFile, InputError> {
    let text = std::fs::read_to_string(path).map_err(|e| InputError::new(format!("{}: {e}", path.display())))?;
    parse(path, &text)
}

impl Selection {
    fn resolve(&self, mesh: &TetMesh, base: usize, what: &str) -> Result<Vec<usize>, InputError> {
        let mut out = Vec::new();
        for &i in &self.nodes {
            let k = i
                .checked_sub(base)
                .filter(|&k| k < mesh.num_nodes())
                .ok_or_else(|| InputError::new(format!("{what}: node {i} is not in the mesh")))?;
            out.push(k);
        }
        if let Some(b) = &self.bbox {
            out.extend((0..mesh.num_nodes()).filter(|&i| {
                let p = mesh.nodes[i];
                (0..3).all(|c| b.min[c] <= p[c] && p[c] <= b.max[c])
            }));
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }
}

impl Waypoint {
    fn transform(&self) -> Result<Transform, InputError> {
        let mut t = match &self.rotate {
            Some(r) => Transform::rotate(r.axis, r.angle_deg, r.center).map_err(|e| InputError::new(format!("waypoint: {e}")))?,
            None => Transform::default(),
        };
        if let Some(d) = self.translate {
            t.translation = d;
        }
        Ok(t)
    }
}

impl ConfigFile {
    /// Resolves selections against `mesh` and fills in defaults.
    pub fn to_problem(&self, mesh: &TetMesh, base: usize) -> Result<ProblemConfig, InputError> {
        let model = Model::parse(&self.material.model).map_err(|e| InputError::new(format!("material.model: {e}")))?;
        let mut material = MaterialSpec::new(model, self.material.mu);
        if let Some(v) = self.material.lambda {
            material.lambda = v;
        }
        if let Some(v) = self.material.kappa {
            material.kappa = v;
        }
        if let Some(v) = self.material.density {
            material.density = v;
        }
        material.validate().map_err(|e| InputError::new(format!("material: {e}")))?;
        let mut cfg = ProblemConfig::new(material);
        cfg.gravity = self.gravity.unwrap_or([0.0; 3]);
        if let Some(f) = &self.fixed {
            cfg.fixed = f.resolve(mesh, base, "fixed")?;
        }
        for (i, h) in self.handles.iter().enumerate() {
            let what = format!("handles[{i}]");
            let nodes = h.select.resolve(mesh, base, &what)?;
            if nodes.is_empty() {
                return Err(InputError::new(format!("{what}: selects no nodes")));
            }
            let wps = h.waypoints.iter().map(Waypoint::transform).collect::<Result<_, _>>()?;
            cfg.handles.push(Handle::new(nodes, &mesh.nodes, wps).map_err(|e| InputError::new(format!("{what}: {e}")))?);
        }
        let s = &self.solver;
        let d = Options::default();
        cfg.solver = Options {
            order: s.order.unwrap_or(d.order),
            eps_rov: s.eps_rov.unwrap_or(d.eps_rov),
            eps_res: s.eps_res.unwrap_or(d.eps_res),
            max_iter: s.max_iter.unwrap_or(d.max_iter),
            pade: s.pade.unwrap_or(d.pade),
            keep_approximants: false,
        };
        if let Some(a) = s.max_chord_angle_deg {
            cfg.max_chord_angle_deg = a;
        }
        if let Some(n) = s.refine_order {
            cfg.refine_order = n;
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_example() {
        let mesh = TetMesh::box_grid([2, 1, 1], [2.0, 1.0, 1.0]).unwrap();
        let text = r#"
gravity = [0.0, 0.0, -0.5]
[material]
model = "ARAP"
mu = 2.0
[fixed]
box = { min = [-0.1, -0.1, -0.1], max = [0.1, 1.1, 1.1] }
[[handles]]
nodes = [3, 4]
[[handles.waypoints]]
translate = [1, 0, 0]
[[handles.waypoints]]
rotate = { axis = [0, 0, 1], angle_deg = 90 }
[solver]
order = 12
pade = false
"#;
        let cfg = parse(Path::new("c.toml"), text).unwrap().to_problem(&mesh, 1).unwrap();
        assert_eq!(cfg.material.model, Model::Arap);
        assert_eq!(cfg.material.mu, 2.0);
        assert_eq!(cfg.fixed.len(), 4);
        assert_eq!(cfg.handles[0].nodes, vec![2, 3]);
        assert_eq!(cfg.handles[0].waypoints.len(), 2);
        assert_eq!(cfg.solver.order, 12);
        assert!(!cfg.solver.pade);
        assert_eq!(cfg.solver.eps_res, 1e-10);
    }

    #[test]
    fn errors_name_the_field() {
        let p = Path::new("c.toml");
        let e = parse(p, "[material]\nmodel = \"nc\"\nmu = 1\nshear = 2\n").unwrap_err();
        assert!(e.to_string().contains("shear"), "{e}");
        let e = parse(p, "[material]\nmodel = \"nc\"\nmu = \"soft\"\n").unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        let mesh = TetMesh::box_grid([1, 1, 1], [1.0, 1.0, 1.0]).unwrap();
        let c = parse(p, "[material]\nmodel = \"nc\"\nmu = 1\n[fixed]\nnodes = [42]\n").unwrap();
        let e = c.to_problem(&mesh, 0).unwrap_err();
        assert!(e.to_string().contains("fixed: node 42"), "{e}");
        let c = parse(p, "[material]\nmodel = \"rubber\"\nmu = 1\n").unwrap();
        assert!(c.to_problem(&mesh, 0).is_err());
    }
}
