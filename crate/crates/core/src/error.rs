//! Error types, one enum per subsystem.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GroupError {
    #[error("elements belong to different presentations")]
    PresentationMismatch,
    #[error("presentation needs at least two factors (got {0}); use `single_factor` for the degenerate case")]
    TooFewFactors(usize),
    #[error("every factor must have rank >= 1 (factor {0} has rank 0)")]
    ZeroRankFactor(usize),
    #[error("expected {expected} generator labels, got {got}")]
    LabelCount { expected: usize, got: usize },
    #[error("duplicate generator label `{0}`")]
    DuplicateLabel(String),
    #[error("ball of radius {radius} has an estimated {estimate} elements, over the cap {cap}")]
    BallBudget {
        radius: u32,
        estimate: u128,
        cap: usize,
    },
    #[error("cannot parse element: {0}")]
    Parse(String),
    #[error("cannot parse presentation: {0}")]
    PresentationParse(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricError {
    #[error("target not reached within {0} breadth-first layers")]
    NotReached(u32),
    #[error("search budget of {0} nodes exhausted")]
    SearchBudget(u64),
    #[error("generating set is empty or does not generate (generator `{0}` unreachable)")]
    NotGenerating(String),
    #[error("axis search domain requires the endpoints to differ by a power of a single generator")]
    NotAnAxisPair,
    #[error(transparent)]
    Group(#[from] GroupError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProjectionError {
    #[error("projection candidate enumeration exceeded the budget of {0} points")]
    Budget(usize),
    #[error("need at least {needed} visibility samples, only {got} were generated")]
    InsufficientSamples { needed: usize, got: usize },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Group(#[from] GroupError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PeriodicityError {
    /// A perturbation step failed to verify its conclusion with the current
    /// constants; the estimates for `C`, `L`, `R` are too optimistic for the
    /// instance at hand.
    #[error("constants too small: {check} measured {measured} against bound {bound} on {instance}")]
    ConstantsTooSmall {
        check: &'static str,
        instance: String,
        measured: String,
        bound: String,
    },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("the constant R(tau, eta) = R({0}, {1}) is not available")]
    MissingR(String, String),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Group(#[from] GroupError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SpectrumError {
    #[error("exact translation length needs the standard word metric")]
    ExactNeedsStandard,
    #[error("goodness of the element was not verified: {0}")]
    GoodnessNotVerified(String),
    #[error("ball of radius {0} is over the enumeration budget and no closed form applies")]
    GapBudget(u32),
    #[error(transparent)]
    Periodicity(#[from] PeriodicityError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Group(#[from] GroupError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error(transparent)]
    Group(#[from] GroupError),
}
