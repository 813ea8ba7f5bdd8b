use thiserror::Error;

/// Errors raised by the model, tensor, field and solver layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-positive conformal factor: 1 + kappa*R = {0}")]
    NonPositiveConformalFactor(f64),
    #[error("division by zero in {0}")]
    DivisionByZero(&'static str),
    #[error("singular metric (|det| = {det:.3e})")]
    SingularMetric { det: f64 },
    #[error("perturbation too large: |h|_inf = {norm:.3e} exceeds {limit}")]
    PerturbationTooLarge { norm: f64, limit: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("coercivity lost at t = {t}: |H^00| = {h00:.3e} > 1/2")]
    CoercivityLost { t: f64, h00: f64 },
    #[error("non-finite value detected at t = {t} in {field}")]
    NaNDetected { t: f64, field: String },
    #[error("step rejected at t = {t}: {reason}")]
    StepRejected { t: f64, reason: String },
    #[error("no contraction: ratios {ratios:?}")]
    NoContraction { ratios: Vec<f64> },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("unresolved data: width {width} < 4h = {min}")]
    UnresolvedData { width: f64, min: f64 },
    #[error("t = const slice is not spacelike")]
    NonSpacelikeSlice,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
