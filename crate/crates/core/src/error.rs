use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("operands live on {left} and {right} sites")]
    MismatchedSites { left: usize, right: usize },

    #[error("{n_sites} sites exceed the dense limit of {limit}")]
    DenseLimit { n_sites: usize, limit: usize },

    #[error("chain of {n_sites} sites exceeds the 64-site word capacity")]
    TooManySites { n_sites: usize },

    #[error("support interval is empty")]
    EmptyInterval,

    #[error("series did not converge after {order} orders (last term one-norm {norm:e})")]
    NonConvergentSeries { order: usize, norm: f64 },

    #[error("operator is not anti-Hermitian (deviation {deviation:e})")]
    NotAntiHermitian { deviation: f64 },

    #[error("operator is not diagonal (off-diagonal one-norm {norm:e})")]
    NotDiagonal { norm: f64 },

    #[error("state is not normalized (|norm - 1| = {deviation:e})")]
    NotNormalized { deviation: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("energy denominator vanished at step {step} outside any declared resonance")]
    ZeroDenominator { step: usize },

    #[error("generator term on {term:?} overlaps resonance region {region:?}")]
    ResonanceOverlap {
        term: (usize, usize),
        region: (usize, usize),
    },

    #[error("flow stalled: residual {residual:e} after {steps} steps (tolerance {tolerance:e})")]
    FlowNonConvergence {
        steps: usize,
        residual: f64,
        tolerance: f64,
        residual_history: Vec<f64>,
    },

    #[error("alpha = {alpha} is not below 1; tail bounds are vacuous for these parameters")]
    AlphaTooLarge { alpha: f64 },

    #[error("generator term on sites {lo}..={hi} fits no gate window after grouping")]
    NotBondLocal { lo: usize, hi: usize },

    #[error("collar {collar} is narrower than the causal cone of {required} sites")]
    CollarTooSmall { collar: usize, required: usize },

    #[error("{what} diverges (ratio {ratio} is not below 1)")]
    Divergent { what: &'static str, ratio: f64 },

    #[error("degenerate series: {0}")]
    DegenerateFit(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("invariant `{name}` violated: {detail}")]
    Invariant { name: String, detail: String },

    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn invariant(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Invariant {
            name: name.into(),
            detail: detail.into(),
        }
    }
}
