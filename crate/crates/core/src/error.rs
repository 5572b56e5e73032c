use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("period {period} out of range (valid: {valid})")]
    PeriodOutOfRange { period: usize, valid: String },

    #[error("history length mismatch: expected {expected}, got {actual}")]
    HistoryLength { expected: usize, actual: usize },

    #[error("user {user} out of range for population of {n}")]
    UserOutOfRange { user: usize, n: usize },

    #[error("horizon mismatch: {0}")]
    HorizonMismatch(String),

    #[error("invalid horizon {0}: must be at least 1")]
    InvalidHorizon(usize),

    #[error("invalid fractions: {0}")]
    InvalidFractions(String),

    #[error("cookie-day pool exhausted: need {needed} users over the horizon, pool has {available}")]
    PoolExhausted { needed: usize, available: usize },

    #[error("no cookie-day treated users available for matching at period {0}")]
    EmptyCdt(usize),

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("cluster assignment depends on treatment labels")]
    ClusterTreatmentDependence,

    #[error("empty candidate set for matching user {0}")]
    EmptyCandidates(usize),

    #[error("population mismatch: {0}")]
    PopulationMismatch(String),

    #[error("directive for user {user} at period {period} references missing user {target}")]
    MissingMatch { user: usize, period: usize, target: usize },

    #[error("cohort {cohort} is empty at period {period}")]
    EmptyCohort { cohort: String, period: usize },

    #[error("no assignment probability recorded for cohort {0}")]
    MissingProbability(String),

    #[error("invalid contrast: {0}")]
    InvalidContrast(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("invalid world parameters: {0}")]
    InvalidWorld(String),

    #[error("fit did not converge")]
    Unconverged,

    #[error("missing fit for {0}")]
    MissingFit(String),

    #[error("family has no finite limit: {0}")]
    NonSaturating(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
