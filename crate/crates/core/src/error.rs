use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GfError {
    #[error("zero has no multiplicative inverse in GF(2^8)")]
    NoInverse,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RlncError {
    #[error("generation must contain at least one packet")]
    EmptyGeneration,
    #[error("packet lengths differ: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("coefficient vector has length {got}, generation size is {expected}")]
    MalformedPacket { expected: usize, got: usize },
    #[error("insufficient degrees of freedom: rank {rank} < {f}")]
    InsufficientRank { rank: usize, f: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OpticsError {
    #[error("half-power semi-angle {0} deg outside (0, 90)")]
    SemiAngleOutOfRange(f64),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NomaError {
    #[error("power allocation violates {0}")]
    InvalidAllocation(String),
    #[error("SIC ordering condition fails at user {user}: alpha_i^2 <= alpha_(i+1)^2 * (2^(zeta/B) - 1)")]
    InfeasibleOrdering { user: usize },
    #[error("degenerate channel: user {0} has zero gain")]
    DegenerateChannel(usize),
    #[error("user index {index} out of range for group of {size}")]
    BadUserIndex { index: usize, size: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LidalError {
    #[error("no echo above the noise floor")]
    NoEcho,
    #[error("beta_sigma = {0} must exceed 1")]
    DegenerateBeta(f64),
    #[error("detection threshold radicand is negative ({0:e})")]
    NegativeRadicand(f64),
    #[error("ill-posed geometry: {0}")]
    IllPosed(&'static str),
    #[error("position is not locatable: {0}")]
    Unlocatable(String),
    #[error("need at least {need} footprints, got {got}")]
    TooFewFootprints { need: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CrlbError {
    #[error("noise covariance is not positive definite")]
    CovarianceNotPd,
    #[error("Fisher information is singular: geometry is unobservable")]
    SingularFisher,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("unknown experiment '{0}'")]
    UnknownExperiment(String),
    #[error("experiment {id} failed: {msg}")]
    Failed { id: String, msg: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
