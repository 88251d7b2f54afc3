use thiserror::Error;

/// Why an energy evaluation was undefined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyCause {
    EmptyDomain,
    NonPositiveV,
    /// `min v` below the admissibility floor.
    BelowFloor,
}

impl std::fmt::Display for EnergyCause {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EnergyCause::EmptyDomain => f.write_str("free boundary domain is empty"),
            EnergyCause::NonPositiveV => f.write_str("function is not strictly positive on the link"),
            EnergyCause::BelowFloor => f.write_str("function dips below the admissibility floor (inadmissible)"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("origin is not an interior point of the body")]
    OriginNotInterior,
    #[error("degenerate body: {0}")]
    DegenerateBody(String),
    #[error("unbounded halfspace intersection")]
    Unbounded,
    #[error("unsupported dimension {0} (supported: 1..=3)")]
    UnsupportedDimension(usize),
    #[error("obliqueness predicates disagree: margin {margin:e}, containment says {containment}")]
    InconsistentPredicates { margin: f64, containment: bool },
    #[error("slice of the source link by the split subspace has empty interior")]
    EmptySlice,
    #[error("pair is not oblique (margin {0:e})")]
    NotOblique(f64),
    #[error("quadrature underflow: both integrals below machine floor")]
    QuadratureUnderflow,
    #[error("cone evaluation at or below the apex (last coordinate {0})")]
    ApexEvaluation(f64),
    #[error("free boundary has empty interior (w(0) = {0:e})")]
    EmptyInterior(f64),
    #[error("free boundary domain is empty")]
    EmptyDomain,
    #[error("function is not strictly positive (min nodal value {0:e})")]
    NonPositiveV(f64),
    #[error("energy undefined: {0}")]
    EnergyUndefined(EnergyCause),
    #[error("energy {energy} fell below the alarm floor {floor}")]
    DivergentEnergy { energy: f64, floor: f64 },
    #[error("no convergence after {iters} iterations (grad norm {grad_norm:e})")]
    NoConvergence {
        iters: usize,
        grad_norm: f64,
        best: Box<crate::minimizer::SolutionBundle>,
    },
    #[error("Newton iteration stalled with residual {residual:e}: {diagnosis}")]
    NewtonStall { residual: f64, diagnosis: String },
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("point lies outside the cone over the link")]
    OutsideCone,
    #[error("configuration does not match the oracle hypotheses: {0}")]
    ConfigMismatch(String),
    #[error("shooting found no root ({0})")]
    NoRoot(String),
    #[error("runs are not comparable: {0}")]
    IncompatibleRuns(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
