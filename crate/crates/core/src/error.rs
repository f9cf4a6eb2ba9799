use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("strip point collision at y = {y} (generation index {index})")]
    PointCollision { index: usize, y: f64 },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("unsupported family: {0}")]
    UnsupportedFamily(String),

    #[error("unsupported diagnostic: {0}")]
    UnsupportedDiagnostic(String),

    #[error("resource limit: strip level {requested} exceeds cap {cap}")]
    ResourceLimit { requested: f64, cap: f64 },

    #[error("race tie at step {step}: points {first} and {second} share ratio {ratio}")]
    RaceTie {
        step: usize,
        first: usize,
        second: usize,
        ratio: f64,
    },

    #[error("non-positive race time {time} at step {step}")]
    NonPositiveRaceTime { step: usize, time: f64 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("degenerate test: {0}")]
    DegenerateTest(String),

    #[error("correlation undefined for constant input")]
    UndefinedCorrelation,

    #[error("path has no local minima")]
    EmptyMinima,

    #[error("invalid intensity profile: {0}")]
    InvalidProfile(String),

    #[error("unknown name: {0}")]
    UnknownName(String),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::ContractViolation(msg.into())
    }
}
