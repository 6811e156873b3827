use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("field does not live on the expected basis")]
    BasisMismatch,

    #[error("grid size mismatch: expected {expected} nodes, got {got}")]
    GridSize { expected: usize, got: usize },

    #[error("mode index {j} out of range (limit {limit})")]
    ModeOutOfRange { j: usize, limit: usize },

    #[error("projection cutoff {m} exceeds basis cutoff {limit}")]
    CutoffOutOfRange { m: usize, limit: usize },

    #[error("{n} does not divide the fine step count {n_max}")]
    NotADivisor { n: usize, n_max: usize },

    #[error("noise truncation {k} exceeds sampled mode count {k_max}")]
    ModeTruncation { k: usize, k_max: usize },

    #[error(
        "stability guard: c(m)*tau = {c_m_tau:.6} exceeds epsilon = {epsilon}; \
         refusing the explicit scheme (override available)"
    )]
    StabilityGuard { c_m_tau: f64, epsilon: f64 },

    #[error("non-finite state at step {step} ({context})")]
    NonFinite { step: usize, context: &'static str },

    #[error("n_max = {n_max} has no divisor at or above the target {needed}")]
    NMaxTooSmall { needed: usize, n_max: usize },

    #[error("interpolation exponent lambda = {lambda:.4} >= 2/p = {two_over_p:.4}; \
             admissible ranges are p in [2,6) for d=1 and p in [2,4) for d=2")]
    InterpolationExponent { lambda: f64, two_over_p: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed noise dump: {0}")]
    BadDump(String),
}
