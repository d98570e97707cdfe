use thiserror::Error;

/// Errors shared across the library. Each variant maps onto a CLI exit code.
#[derive(Debug, Error)]
pub enum MobiusError {
    #[error("config/parse error: {0}")]
    Config(String),
    #[error("link components intersect (min separation {sep:.3e} below {floor:.3e})")]
    IntersectingLink { sep: f64, floor: f64 },
    #[error("linking number unresolved: Gauss integral {value} is {residual:.3e} from the nearest integer; increase the quadrature resolution")]
    UnresolvedLinking { value: f64, residual: f64 },
    #[error("singularity: {0}")]
    Singularity(String),
    #[error("containment violation: {0}")]
    ContainmentViolation(String),
    #[error("descent stalled: {0}")]
    Stall(String),
    #[error("degenerate curve: |gamma'| = {min_speed:.3e} vanishes relative to mean speed {mean_speed:.3e}")]
    DegenerateCurve { min_speed: f64, mean_speed: f64 },
    #[error("{0}")]
    Numeric(String),
}

impl MobiusError {
    /// CLI exit code for this error (0 is success, 1 generic).
    pub fn exit_code(&self) -> i32 {
        match self {
            MobiusError::Config(_) => 2,
            MobiusError::IntersectingLink { .. } => 3,
            MobiusError::UnresolvedLinking { .. } => 4,
            MobiusError::Singularity(_) => 5,
            MobiusError::ContainmentViolation(_) => 6,
            MobiusError::Stall(_) => 7,
            MobiusError::DegenerateCurve { .. } => 8,
            MobiusError::Numeric(_) => 9,
        }
    }
}

pub type Result<T> = std::result::Result<T, MobiusError>;
