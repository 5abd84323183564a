use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoagError {
    #[error("shape mismatch: {what}")]
    ShapeMismatch { what: String },

    #[error(
        "grid too small for diffusion step: a·Δt = {sigma2:.3e} exceeds (L/2)² = {limit:.3e} \
         for class {class}; enlarge the domain or reduce Δt"
    )]
    GridTooSmall { class: usize, sigma2: f64, limit: f64 },

    #[error(
        "stability precheck failed: c_max·Δt = {product:.3e} > 0.5 \
         (c_max = {c_max:.3e}); try Δt ≤ {dt_suggest:.3e}"
    )]
    Stability {
        c_max: f64,
        product: f64,
        dt_suggest: f64,
    },

    #[error(
        "Picard iteration did not converge in {kmax} iterations \
         (last change {last_change:.3e} > tol {tol:.3e}); reduce Δt"
    )]
    NonConvergence {
        kmax: usize,
        last_change: f64,
        tol: f64,
    },

    #[error("negative potential entries rejected (min = {min:.3e})")]
    NegativePotential { min: f64 },

    #[error("admissibility check failed: {summary} (use the override flag to force)")]
    Inadmissible { summary: String },

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("oracle blow-up: concentration {value:.3e} exceeds guard at t = {t}")]
    OracleBlowUp { value: f64, t: f64 },

    #[error("grids or time grids do not match: {what}")]
    GridMismatch { what: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}
