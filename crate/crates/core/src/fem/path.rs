//! Handle paths: rigid waypoints split into linear chords.

use alloc::format;
use alloc::vec::Vec;

use super::mesh::Vec3;
use crate::error::{Error, Result};

/// `p ↦ R(p − center) + center + translation`, with `R` the rotation by
/// the axis-angle vector `rotation` (radians).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Transform {
    pub rotation: Vec3,
    pub center: Vec3,
    pub translation: Vec3,
}

impl Transform {
    pub fn translate(t: Vec3) -> Self {
        Transform {
            translation: t,
            ..Default::default()
        }
    }

    /// Rotation by `degrees` about `axis` through `center`.
    pub fn rotate(axis: Vec3, degrees: f64, center: Vec3) -> Result<Self> {
        let n = libm::sqrt(axis.iter().map(|a| a * a).sum());
        if !(n > 0.0) || !degrees.is_finite() {
            return Err(Error::Config("rotation needs a nonzero axis and a finite angle".into()));
        }
        let s = degrees.to_radians() / n;
        Ok(Transform {
            rotation: axis.map(|a| a * s),
            center,
            translation: [0.0; 3],
        })
    }

    pub fn angle(&self) -> f64 {
        libm::sqrt(self.rotation.iter().map(|a| a * a).sum())
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        let q = [p[0] - self.center[0], p[1] - self.center[1], p[2] - self.center[2]];
        let r = rotate(self.rotation, q);
        [0, 1, 2].map(|c| r[c] + self.center[c] + self.translation[c])
    }

    fn lerp(&self, other: &Transform, s: f64) -> Transform {
        let l = |a: Vec3, b: Vec3| [0, 1, 2].map(|c| a[c] + s * (b[c] - a[c]));
        Transform {
            rotation: l(self.rotation, other.rotation),
            center: l(self.center, other.center),
            translation: l(self.translation, other.translation),
        }
    }
}

/// Rodrigues rotation of `v` by the axis-angle vector `w`.
fn rotate(w: Vec3, v: Vec3) -> Vec3 {
    let th = libm::sqrt(w.iter().map(|a| a * a).sum());
    if th == 0.0 {
        return v;
    }
    let k = w.map(|a| a / th);
    let (s, c) = (libm::sin(th), libm::cos(th));
    let kv = k[0] * v[0] + k[1] * v[1] + k[2] * v[2];
    let kxv = [k[1] * v[2] - k[2] * v[1], k[2] * v[0] - k[0] * v[2], k[0] * v[1] - k[1] * v[0]];
    [0, 1, 2].map(|i| v[i] * c + kxv[i] * s + k[i] * kv * (1.0 - c))
}

/// A group of nodes driven through a sequence of transforms of their
/// initial positions. The path starts at the identity.
#[derive(Clone, Debug)]
pub struct Handle {
    pub nodes: Vec<usize>,
    pub initial: Vec<Vec3>,
    pub waypoints: Vec<Transform>,
}

impl Handle {
    pub fn new(nodes: Vec<usize>, rest: &[Vec3], waypoints: Vec<Transform>) -> Result<Self> {
        let initial = nodes
            .iter()
            .map(|&i| {
                rest.get(i)
                    .copied()
                    .ok_or_else(|| Error::Config(format!("handle node {i} out of range")))
            })
            .collect::<Result<_>>()?;
        Ok(Handle {
            nodes,
            initial,
            waypoints,
        })
    }

    fn waypoint(&self, s: usize) -> Transform {
        match s {
            0 => Transform::default(),
            _ => self.waypoints[(s - 1).min(self.waypoints.len().saturating_sub(1))],
        }
    }
}

/// Linear piece of a handle path.
#[derive(Clone, Debug)]
pub(crate) struct Chord {
    pub segment: usize,
    pub index: usize,
    /// Range of the segment parameter covered by the chord.
    pub start: f64,
    pub end: f64,
    /// End positions of every handle's nodes.
    pub targets: Vec<Vec<Vec3>>,
}

/// Chords for all handles. Segment `s` runs from waypoint `s − 1` to `s`;
/// handles with fewer waypoints hold their last one.
pub(crate) fn chords(handles: &[Handle], max_angle_deg: f64) -> Result<Vec<Chord>> {
    if !(max_angle_deg > 0.0) {
        return Err(Error::Config("chord angle must be positive".into()));
    }
    let segments = handles.iter().map(|h| h.waypoints.len()).max().unwrap_or(0);
    let max_angle = max_angle_deg.to_radians();
    let mut out = Vec::new();
    for s in 1..=segments {
        let pieces = handles
            .iter()
            .map(|h| {
                let (a, b) = (h.waypoint(s - 1), h.waypoint(s));
                let d = libm::sqrt((0..3).map(|c| b.rotation[c] - a.rotation[c]).map(|d| d * d).sum());
                libm::ceil(d / max_angle) as usize
            })
            .max()
            .unwrap_or(1)
            .max(1);
        for i in 0..pieces {
            let t = (i + 1) as f64 / pieces as f64;
            let targets = handles
                .iter()
                .map(|h| {
                    let tr = h.waypoint(s - 1).lerp(&h.waypoint(s), t);
                    h.initial.iter().map(|&p| tr.apply(p)).collect()
                })
                .collect();
            out.push(Chord {
                segment: s,
                index: i,
                start: i as f64 / pieces as f64,
                end: t,
                targets,
            });
        }
    }
    Ok(out)
}
