//! Crate-wide error type.

/// Errors produced by the model, integrator, section sampler, indicator
/// pipeline, classifier and fitting routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid model parameters alpha = {alpha}, sigma = {sigma}: both must be finite and positive")]
    InvalidParams { alpha: f64, sigma: f64 },

    #[error("equilibrium {index}: eigenvalue pattern matches no supported stability class")]
    UnclassifiableSpectrum { index: usize },

    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),

    #[error("step size underflow at t = {t}: required step {h:e} below min_step")]
    StepUnderflow { t: f64, h: f64 },

    #[error("step budget exhausted at t = {t} after {steps} steps")]
    StepBudgetExceeded { t: f64, steps: u64 },

    #[error("energy {energy} is not above the minimum equilibrium energy {h1}: section is empty")]
    EmptyRegion { energy: f64, h1: f64 },

    #[error("(theta1 = {theta1}, p1 = {p1}) lies outside the accessible region of the section")]
    OutsideAccessibleRegion { theta1: f64, p1: f64 },

    #[error("(theta1 = {theta1}, p1 = {p1}) is a tangent point of the section (zero crossing speed)")]
    TangentPoint { theta1: f64, p1: f64 },

    #[error("rejection sampling stalled: acceptance rate below 1e-6")]
    SamplingStalled,

    #[error("stencil neighbor at (theta1 = {theta1}, p1 = {p1}) left the energy surface")]
    StencilOffSurface { theta1: f64, p1: f64 },

    #[error("degenerate stencil center: descriptor value is zero")]
    DegenerateCenter,

    #[error("empty input")]
    EmptyInput,

    #[error("insufficient data: need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("no curve points fall inside the {regime} regime")]
    RegimeEmpty { regime: &'static str },

    #[error("calibration required to resolve a single-peak histogram")]
    CalibrationRequired,

    #[error("checkpoint I/O failure at {path}: {message}")]
    Checkpoint { path: String, message: String },
}
