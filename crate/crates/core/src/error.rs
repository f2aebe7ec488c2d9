use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("element {element} is degenerate (|det E_K| = {det:e})")]
    DegenerateElement { element: usize, det: f64 },

    #[error("element {element} is inverted (det E_K = {det:e})")]
    InvertedElement { element: usize, det: f64 },

    #[error("metric tensor is not symmetric positive definite (smallest eigenvalue {min_eig:e})")]
    NonSpdMetric { min_eig: f64 },

    #[error("unsupported dimension {0}; only 2 and 3 are supported")]
    UnsupportedDimension(usize),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("index base error: {0}")]
    IndexBase(String),

    #[error("vertex {vertex}: least-squares Hessian patch is rank deficient")]
    SingularPatch { vertex: usize },

    #[error("vertex {vertex}: surface gradient vanishes")]
    ZeroSurfaceGradient { vertex: usize },

    #[error("functional is not coercive with q > d/2")]
    NotCoercive,

    #[error("invalid functional: {0}")]
    InvalidFunctional(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
