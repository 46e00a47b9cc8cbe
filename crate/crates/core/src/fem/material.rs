//! Hyperelastic stress models as graph fragments.

use alloc::format;
use alloc::string::String;

use crate::error::{Error, Result};
use crate::graph::{GraphBuilder, VarId};
use crate::sparse::{CsrMatrix, SparseAffineMap};
use crate::Shape;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Model {
    /// Compressible neo-Hookean.
    NeoHookean,
    /// Nearly incompressible neo-Hookean with a volumetric penalty.
    IncompressibleNeoHookean,
    /// As-rigid-as-possible.
    Arap,
}

impl Model {
    pub fn as_str(self) -> &'static str {
        match self {
            Model::NeoHookean => "nc",
            Model::IncompressibleNeoHookean => "ni",
            Model::Arap => "arap",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nc" | "neo-hookean" => Ok(Model::NeoHookean),
            "ni" | "incompressible-neo-hookean" => Ok(Model::IncompressibleNeoHookean),
            "arap" => Ok(Model::Arap),
            other => Err(Error::Config(format!("unknown material model '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaterialSpec {
    pub model: Model,
    /// Shear modulus.
    pub mu: f64,
    /// Lamé's first parameter (NC).
    pub lambda: f64,
    /// Bulk modulus (NI).
    pub kappa: f64,
    /// Rest mass density, for body forces.
    pub density: f64,
}

impl MaterialSpec {
    pub fn new(model: Model, mu: f64) -> Self {
        MaterialSpec {
            model,
            mu,
            lambda: mu,
            kappa: mu,
            density: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, v: f64| -> Result<()> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("material {name} must be finite and nonnegative, got {v}")))
            }
        };
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::Config(format!("shear modulus must be positive, got {}", self.mu)));
        }
        bad("lambda", self.lambda)?;
        bad("kappa", self.kappa)?;
        bad("density", self.density)
    }

    pub fn describe(&self) -> String {
        match self.model {
            Model::NeoHookean => format!("nc(mu={}, lambda={})", self.mu, self.lambda),
            Model::IncompressibleNeoHookean => format!("ni(mu={}, kappa={})", self.mu, self.kappa),
            Model::Arap => format!("arap(mu={})", self.mu),
        }
    }
}

/// Stress fragment for a batch of deformation gradients. `J = det F` is
/// built at most once and shared with the Cauchy conversion.
pub(crate) struct StressBuilder<'b> {
    pub b: &'b mut GraphBuilder,
    pub f: VarId,
    j: Option<VarId>,
    finv_t: Option<VarId>,
}

impl<'b> StressBuilder<'b> {
    pub fn new(b: &'b mut GraphBuilder, f: VarId) -> Self {
        StressBuilder {
            b,
            f,
            j: None,
            finv_t: None,
        }
    }

    fn j(&mut self) -> Result<VarId> {
        if let Some(j) = self.j {
            return Ok(j);
        }
        let j = self.b.det(self.f)?;
        self.j = Some(j);
        Ok(j)
    }

    fn finv_t(&mut self) -> Result<VarId> {
        if let Some(v) = self.finv_t {
            return Ok(v);
        }
        let inv = self.b.inverse(self.f)?;
        let v = self.b.transpose(inv)?;
        self.finv_t = Some(v);
        Ok(v)
    }

    /// First Piola–Kirchhoff stress.
    pub fn pk1(&mut self, m: &MaterialSpec) -> Result<VarId> {
        let f = self.f;
        match m.model {
            Model::NeoHookean => {
                // μ(F − F⁻ᵀ) + λ log J F⁻ᵀ
                let fit = self.finv_t()?;
                let j = self.j()?;
                let dev = self.b.sub(f, fit)?;
                let dev = self.b.scale(dev, m.mu)?;
                let lj = self.b.log(j)?;
                let lj = self.b.scale(lj, m.lambda)?;
                let vol = self.b.mul(fit, lj)?;
                self.b.add(dev, vol)
            }
            Model::IncompressibleNeoHookean => {
                // μ J^{−2/3} (F − ⅓ tr(FᵀF) F⁻ᵀ) + κ J (J − 1) F⁻ᵀ
                let fit = self.finv_t()?;
                let j = self.j()?;
                let batch = self.b.shape(f).batch;
                let ff = self.b.mul(f, f)?;
                let sum = CsrMatrix::from_triplets(
                    batch,
                    9 * batch,
                    (0..9 * batch).map(|i| (i / 9, i, 1.0 / 3.0)).collect(),
                );
                let tr3 = self.b.sparse_affine(SparseAffineMap::linear(sum), &[ff], Shape::scalar(batch))?;
                let t = self.b.mul(fit, tr3)?;
                let dev = self.b.sub(f, t)?;
                let jp = self.b.pow(j, -2.0 / 3.0)?;
                let jp = self.b.scale(jp, m.mu)?;
                let dev = self.b.mul(dev, jp)?;
                let jm1 = self.b.affine(j, 1.0, -1.0)?;
                let jj = self.b.mul(j, jm1)?;
                let jj = self.b.scale(jj, m.kappa)?;
                let vol = self.b.mul(fit, jj)?;
                self.b.add(dev, vol)
            }
            Model::Arap => {
                // μ(F − R), R the rotation of the polar decomposition.
                let (_, _, r) = self.b.svd_w(f, true)?;
                let d = self.b.sub(f, r)?;
                self.b.scale(d, m.mu)
            }
        }
    }

    /// Cauchy stress `σ = P Fᵀ / J`.
    pub fn cauchy(&mut self, m: &MaterialSpec) -> Result<VarId> {
        let p = self.pk1(m)?;
        let ft = self.b.transpose(self.f)?;
        let pf = self.b.matmul(p, ft)?;
        let j = self.j()?;
        self.b.div(pf, j)
    }
}
