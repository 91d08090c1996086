use thiserror::Error;

pub type Result<T> = std::result::Result<T, SheetError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SheetError {
    #[error("grid too coarse: {n} points, at least {min} required")]
    GridTooCoarse { n: usize, min: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("length mismatch: expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("positivity violated in {what}: value {value:e} at index {index}")]
    PositivityViolation {
        what: &'static str,
        index: usize,
        value: f64,
    },

    #[error("singular banded system: zero pivot at row {row}")]
    SingularSystem { row: usize },

    #[error("decay envelope undefined: {0}")]
    EnvelopeUndefined(&'static str),

    #[error("insufficient data: {got} usable samples, at least {need} required")]
    InsufficientData { got: usize, need: usize },

    #[error("rupture detected at t = {t}: h_min = {h_min:e} at index {index}")]
    RuptureDetected { t: f64, index: usize, h_min: f64 },

    #[error("step rejected: {0}")]
    StepRejected(String),

    #[error("stiffness failure at t = {t}: dt = {dt:e} reached dt_min with repeated rejections")]
    StiffnessFailure { t: f64, dt: f64 },

    #[error("incompatible initial data: forcing integrates to {integral:e}")]
    IncompatibleData { integral: f64 },

    #[error("no admissible stationary profile: {0}")]
    NoStationaryProfile(String),

    #[error("stretch lost positivity at t = {t} (min u = {u_min:e}); solver bug")]
    PositivityLost { t: f64, u_min: f64 },

    #[error("hypothesis violated at t = {t}: h_min = {h_min} < m_floor = {m_floor}")]
    HypothesisViolated { t: f64, h_min: f64, m_floor: f64 },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}
