//! Continuation solver for nonlinear systems described as computing graphs.
//!
//! A system `H(x, λ) = 0` is built symbolically from batched tensor operators
//! ([`graph`]). The solver ([`anm`]) expands the solution curve through the
//! starting point as a power series in a pseudo-arclength parameter, solving
//! one order at a time against a single factorization of the Jacobian, and
//! then steps along the curve using Taylor or Padé approximants. Every
//! operator knows how to propagate Taylor coefficients ([`taylor`]).
//!
//! The [`fem`] module applies this to tetrahedral elasticity: forward and
//! inverse static equilibrium and handle-driven deformation.
//!
//! The crate is `no_std` with `alloc`. Enable `parallel` to split batched
//! operators across a rayon thread pool.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod anm;
pub mod error;
pub mod fem;
pub mod graph;
pub mod par;
pub mod sparse;
pub mod taylor;
pub mod tensor;
pub mod toy;

pub use error::{Error, Result};
pub use tensor::{BatchedTensor, Shape};

/// Root-mean-square of a vector; zero for an empty slice.
pub fn rms(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    libm::sqrt(dot(v, v) / v.len() as f64)
}

/// Euclidean inner product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm.
pub fn norm(v: &[f64]) -> f64 {
    libm::sqrt(dot(v, v))
}
