use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid deformation: {0}")]
    InvalidDeformation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid material model: {0}")]
    InvalidModel(String),

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("fitted model is unstable: {reason} (rms residual {rms_residual:.3e}, condition {condition:.3e})")]
    Instability {
        reason: String,
        rms_residual: f64,
        condition: f64,
    },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("meshing failed: {0}")]
    Meshing(String),

    #[error("element {element} inverted (det F = {det:.3e})")]
    ElementInversion { element: usize, det: f64 },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("Newton iteration did not converge at p = {pressure} kPa after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        pressure: f64,
        iterations: usize,
        residual: f64,
    },

    #[error("load ramp failed below the minimum increment; last converged pressure {last_converged} kPa")]
    RampFailure { last_converged: f64 },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("log integrity error: {0}")]
    LogIntegrity(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
