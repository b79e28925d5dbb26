//! Error type shared by every module.

use thiserror::Error;

/// Failures reported by the library.
///
/// Variants split into two families: input/domain problems (bad lattice data,
/// caps exceeded) and numerical-classification failures (a zero that cannot
/// be classified, a sign that cannot be determined). [`Error::is_numerical`]
/// tells them apart so front ends can map them to different exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown lattice `{0}`")]
    UnknownLattice(String),
    #[error("weight `{name}` must be positive, got {value}")]
    NonPositiveWeight { name: String, value: f64 },
    #[error("weight `{name}` is not used by lattice `{lattice}`")]
    UnexpectedWeight { name: String, lattice: String },
    #[error("k odd ({0} vertices per domain): double the fundamental domain first")]
    OddVertexCount(usize),
    #[error("malformed domain: {0}")]
    MalformedDomain(String),
    #[error("non-planar face data: {0}")]
    NonPlanarFaces(String),
    #[error("orientation failure: {0}")]
    Orientation(String),
    #[error("Laurent polynomial evaluated at a zero argument")]
    ZeroArgument,
    #[error("degree bound exceeded (off-grid residual {residual:e})")]
    DegreeBoundExceeded { residual: f64 },
    #[error("integrand not integrable: {0}")]
    NonIntegrable(String),
    #[error("zero not classifiable: {0}")]
    Unclassifiable(String),
    #[error("root on the unit circle away from the known nodes: {0}")]
    RootOnCircle(String),
    #[error("identically degenerate slice: {0}")]
    DegenerateSlice(String),
    #[error("matrix dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("Pfaffian of an odd-dimensional matrix ({0})")]
    OddDimension(usize),
    #[error("matrix not skew-symmetric (residual {0:e})")]
    NotSkew(f64),
    #[error("Pfaffian signs undetermined: {0}")]
    SignUndetermined(String),
    #[error("operation requires a bipartite domain")]
    NotBipartite,
    #[error("criticality class mismatch: {0}")]
    ClassMismatch(String),
    #[error("invalid window: {0}")]
    Window(String),
    #[error("Im tau = {0:e} is below the series floor; reduce tau first")]
    TauFloor(f64),
    #[error("invalid torus: {0}")]
    BadTorus(String),
    #[error("kappa cross-check mismatch: {0}")]
    KappaMismatch(String),
    #[error("enumeration cap exceeded: {vertices} vertices (cap {cap})")]
    EnumerationCap { vertices: usize, cap: usize },
    #[error("lattice file: {0}")]
    LatticeFile(String),
}

impl Error {
    /// True for failures of numerical classification rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Unclassifiable(_)
                | Error::RootOnCircle(_)
                | Error::SignUndetermined(_)
                | Error::NonIntegrable(_)
                | Error::DegreeBoundExceeded { .. }
                | Error::KappaMismatch(_)
                | Error::ClassMismatch(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
