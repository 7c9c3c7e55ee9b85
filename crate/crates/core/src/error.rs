use thiserror::Error;

/// Every failure the library reports. [`Error::code`] gives the stable
/// string used in machine-readable reports.
#[derive(Clone, Debug, Error, PartialEq)]
#[non_exhaustive]
pub enum Error {
    #[error("boundary of boundary is nonzero at cell {cell} (face of face {face})")]
    InvalidIncidence { cell: String, face: String },
    #[error("cell {cell} refers to face {face} which is not listed")]
    DanglingFace { cell: String, face: String },
    #[error("invalid cell description: {0}")]
    InvalidCell(String),
    #[error("not a closed pseudo-manifold: codimension-one cell {cell} has {cofaces} top cofaces")]
    NotPseudoManifold { cell: String, cofaces: usize },
    #[error("orientation propagation is inconsistent at cell {cell}")]
    NonOrientable { cell: String },
    #[error("operation requires a {expected} complex")]
    ModeMismatch { expected: &'static str },
    #[error("not a closed manifold: {0}")]
    NotClosedManifold(String),
    #[error("local system is not flat on triple ({face}, {mid}, {cell}): residual {residual:e}")]
    NotFlat { face: String, mid: String, cell: String, residual: f64 },
    #[error("transport from {cell} to {face} is singular")]
    Singular { face: String, cell: String },
    #[error("missing transport for face {face} of cell {cell}")]
    MissingTransport { face: String, cell: String },
    #[error("twisted boundary squares to nonzero in degree {degree}: residual {residual:e}")]
    BoundaryMismatch { degree: usize, residual: f64 },
    #[error("rank decision is ill-conditioned: pivot {pivot:e} against scale {scale:e}")]
    IllConditioned { pivot: f64, scale: f64 },
    #[error("invalid homology basis in degree {degree}: {reason}")]
    BadHomologyBasis { degree: usize, reason: String },
    #[error("inputs live on different complexes or systems: {0}")]
    ContextMismatch(String),
    #[error("line-bundle map fails compatibility at ({face}, {cell})")]
    NotAMorphism { face: String, cell: String },
    #[error("not a subdivision: {0}")]
    NotASubdivision(String),
    #[error("operation requires an odd-dimensional manifold, got dimension {0}")]
    EvenDimension(usize),
    #[error("operation requires an even-dimensional manifold, got dimension {0}")]
    OddDimension(usize),
    #[error("frame has a zero volume at cell {0}")]
    ZeroFrame(String),
    #[error("determinant system admits no flat metric (at cell {0})")]
    NotUnimodular(String),
    #[error("inner product at cell {0} is not Hermitian positive definite")]
    NotPositiveDefinite(String),
    #[error("inner products on E and E* are not dual at cell {0}")]
    DualMismatch(String),
    #[error("holonomy is trivial; the circle complex is not acyclic")]
    TrivialHolonomy,
    #[error("complex is not acyclic: {0}")]
    NotAcyclic(String),
    #[error("scalar backend cannot represent {0}")]
    Backend(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidIncidence { .. } => "InvalidIncidence",
            Error::DanglingFace { .. } => "DanglingFace",
            Error::InvalidCell(_) => "InvalidCell",
            Error::NotPseudoManifold { .. } => "NotPseudoManifold",
            Error::NonOrientable { .. } => "NonOrientable",
            Error::ModeMismatch { .. } => "ModeMismatch",
            Error::NotClosedManifold(_) => "NotClosedManifold",
            Error::NotFlat { .. } => "NotFlat",
            Error::Singular { .. } => "Singular",
            Error::MissingTransport { .. } => "MissingTransport",
            Error::BoundaryMismatch { .. } => "BoundaryMismatch",
            Error::IllConditioned { .. } => "IllConditioned",
            Error::BadHomologyBasis { .. } => "BadHomologyBasis",
            Error::ContextMismatch(_) => "ContextMismatch",
            Error::NotAMorphism { .. } => "NotAMorphism",
            Error::NotASubdivision(_) => "NotASubdivision",
            Error::EvenDimension(_) => "EvenDimension",
            Error::OddDimension(_) => "OddDimension",
            Error::ZeroFrame(_) => "ZeroFrame",
            Error::NotUnimodular(_) => "NotUnimodular",
            Error::NotPositiveDefinite(_) => "NotPositiveDefinite",
            Error::DualMismatch(_) => "DualMismatch",
            Error::TrivialHolonomy => "TrivialHolonomy",
            Error::NotAcyclic(_) => "NotAcyclic",
            Error::Backend(_) => "Backend",
            Error::Parse(_) => "Parse",
        }
    }

    /// Input validation failures, as opposed to failures of a computation on
    /// valid input.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidIncidence { .. }
                | Error::DanglingFace { .. }
                | Error::InvalidCell(_)
                | Error::NotPseudoManifold { .. }
                | Error::NonOrientable { .. }
                | Error::NotFlat { .. }
                | Error::Singular { .. }
                | Error::MissingTransport { .. }
                | Error::BoundaryMismatch { .. }
                | Error::Parse(_)
                | Error::Backend(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
