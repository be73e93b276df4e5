use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid product geometry: {0}")]
    InvalidSpec(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("non-finite value at node {0}")]
    NonFinite(usize),

    #[error("quadratic form is not coercive: {0}")]
    NotCoercive(String),

    /// The Nehari projection needs `u⁺ ≠ 0`.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("solver did not converge after {iterations} iterations (gradient {gradient:.3e})")]
    NotConverged { iterations: usize, gradient: f64 },

    #[error("box too small: decay indicator {indicator:.3e} is not below {limit:.1e}")]
    BoxTooSmall { indicator: f64, limit: f64 },

    #[error("cutoff too tight: inner ball holds {fraction:.6} of the mass, need {required}")]
    CutoffTooTight { fraction: f64, required: f64 },

    #[error("field is not concentrated: best ratio {ratio:.4} at radius {radius} does not exceed {eta_min}")]
    NotConcentrated { ratio: f64, radius: f64, eta_min: f64 },

    #[error("center of mass lies {distance:.4} from the concentration center, beyond 2r = {bound:.4}")]
    CenterOfMassOffTarget { distance: f64, bound: f64 },

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
