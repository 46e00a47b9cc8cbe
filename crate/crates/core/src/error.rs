use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Incompatible tensor shapes.
    Shape(String),
    /// A value left the domain of an operator (log of a nonpositive number,
    /// singular matrix, non-finite input). `batch` is the offending item.
    Domain {
        op: &'static str,
        batch: usize,
        detail: String,
    },
    /// Graph construction problem: unknown operator, wrong arity.
    Build(String),
    /// Error raised while evaluating a particular graph variable.
    AtVertex { vertex: usize, source: Box<Error> },
    /// Sparse factorization hit a zero pivot.
    SingularMatrix { column: usize },
    /// The starting point does not satisfy `H(x0, λ0) = 0`.
    InvalidStart { residual_rms: f64, tolerance: f64 },
    /// The continuation step collapsed.
    NoProgress { iteration: usize, step: f64 },
    MaxIterations { limit: usize },
    Mesh(String),
    Config(String),
    /// A tetrahedron reached `det(F) <= 0`.
    InvertedElement {
        tet: usize,
        segment: usize,
        lambda: f64,
    },
}

impl Error {
    pub(crate) fn domain(op: &'static str, batch: usize, detail: impl Into<String>) -> Self {
        Error::Domain {
            op,
            batch,
            detail: detail.into(),
        }
    }

    pub(crate) fn at_vertex(self, vertex: usize) -> Self {
        match self {
            e @ Error::AtVertex { .. } => e,
            e => Error::AtVertex {
                vertex,
                source: Box::new(e),
            },
        }
    }

    /// The innermost error, skipping vertex annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtVertex { source, .. } => source.root(),
            e => e,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape(s) => write!(f, "shape mismatch: {s}"),
            Error::Domain { op, batch, detail } => {
                write!(f, "numerical domain error in {op} at batch item {batch}: {detail}")
            }
            Error::Build(s) => write!(f, "graph build error: {s}"),
            Error::AtVertex { vertex, source } => write!(f, "at vertex {vertex}: {source}"),
            Error::SingularMatrix { column } => {
                write!(f, "sparse factorization failed: zero pivot in column {column}")
            }
            Error::InvalidStart {
                residual_rms,
                tolerance,
            } => write!(
                f,
                "starting point is not a solution: residual rms {residual_rms:e} > {tolerance:e}"
            ),
            Error::NoProgress { iteration, step } => {
                write!(f, "continuation stalled at iteration {iteration} (step {step:e})")
            }
            Error::MaxIterations { limit } => write!(f, "exceeded {limit} continuation iterations"),
            Error::Mesh(s) => write!(f, "mesh error: {s}"),
            Error::Config(s) => write!(f, "configuration error: {s}"),
            Error::InvertedElement {
                tet,
                segment,
                lambda,
            } => write!(
                f,
                "tetrahedron {tet} inverted in segment {segment} at lambda = {lambda}"
            ),
        }
    }
}

impl core::error::Error for Error {}
