use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("negative argument {0} passed to a comparison function")]
    NegativeArgument(f64),
    #[error("argument {arg} outside tabulated range [0, {max}]")]
    OutOfTableRange { arg: f64, max: f64 },
    #[error("function is not invertible up to {requested} (covers [0, {covered}])")]
    NotInvertibleOnRange { requested: f64, covered: f64 },
    #[error("empty list of comparison functions")]
    EmptyList,
    #[error("degenerate sampling range [{lo}, {hi}]")]
    DegenerateRange { lo: f64, hi: f64 },
    #[error("invalid comparison function: {0}")]
    InvalidKFun(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid gain matrix: {0}")]
    InvalidGainMatrix(String),
    #[error("small-gain condition violated; refusing to build an omega-path")]
    SmallGainViolated,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid system spec: {0}")]
    InvalidSpec(String),
    #[error("unknown registry map `{0}`")]
    RegistryUnknown(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("linear solve failed: {0}")]
    LinearSolveFailure(String),
    #[error("eigensolver failed: {0}")]
    EigensolverFailure(String),

    #[error("matrix is not Hurwitz (max real eigenvalue {0})")]
    NotHurwitz(f64),
    #[error("no positive certified radius above {0}")]
    NoPositiveRadius(f64),
    #[error("method unavailable: {0}")]
    MethodUnavailable(String),
    #[error("omega-path has not passed verification")]
    UnverifiedPath,
    #[error("no feasible exponential envelope: {0}")]
    NoFeasibleEnvelope(String),

    #[error("truncation half-width {s} too small for t = {t}")]
    TruncationTooSmall { s: f64, t: f64 },
    #[error("diffusion coefficients must be equal across species, got {0:?}")]
    UnequalDiffusion(Vec<f64>),
    #[error("reaction `{0}` is not odd and monotonically increasing")]
    ReactionNotOddMonotone(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("i/o error: {0}")]
    Io(String),
    #[error("json error: {0}")]
    Json(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}
