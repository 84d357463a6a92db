use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {0}")]
    InvalidDimension(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid exponent: {0}")]
    InvalidExponent(String),
    #[error("no scaling regime for {pair} in dimension {d}")]
    NoRegime { d: usize, pair: String },
    #[error("exponent pair is not on the required scaling line")]
    NotOnScalingLine,
    #[error("degenerate scaling line (d - j - nu = 0)")]
    DegenerateLine,
    #[error("sidelengths must be positive, got {0}")]
    InvalidSidelength(f64),
    #[error("sidelengths must be sorted nondecreasing")]
    UnsortedSidelengths,
    #[error("unbounded domain: truncate infinite sidelengths first")]
    UnboundedDomain,
    #[error("infinite sidelength")]
    InfiniteSidelength,
    #[error("invalid beta profile: {0}")]
    InvalidBeta(String),
    #[error("empty slice: the affine plane misses the open rectangle")]
    EmptySlice,
    #[error("basis is not orthonormal (deviation {0:.3e})")]
    NonOrthonormalBasis(f64),
    #[error("dilated set escapes the domain")]
    NotContained,
    #[error("Hessian is not positive definite at the base point")]
    NotPositiveDefinite,
    #[error("derivative order {requested} exceeds available order {available}")]
    OrderTooHigh { requested: usize, available: usize },
    #[error("quadrature too coarse: phase varies by {phase:.3} rad across a cell")]
    ResolutionTooCoarse { phase: f64 },
    #[error("grid function is not dominated by an indicator (max modulus {0:.3e})")]
    NotSubIndicator(f64),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("aspect ratio {ratio:.3e} does not exceed N^3 = {bound:.3e}")]
    AspectTooSmall { ratio: f64, bound: f64 },
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("regime mismatch: {0}")]
    RegimeMismatch(String),
    #[error("a boundedness condition holds at {0}; no counterexample")]
    NoFailureWitness(String),
    #[error("ill-conditioned fit: {0}")]
    IllConditioned(String),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("config parse error: {0}")]
    Config(String),
}
