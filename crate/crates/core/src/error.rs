use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("jet variable count mismatch: {0} vs {1}")]
    NumVarsMismatch(usize, usize),
    #[error("jet order mismatch: {0} vs {1}")]
    OrderMismatch(usize, usize),
    #[error("division by a jet with zero constant term")]
    ZeroDivisor,
    #[error("outer series has {got} coefficients, composition at order {order} needs {}", order + 1)]
    SeriesTooShort { order: usize, got: usize },
    #[error("multi-index of degree {degree} exceeds jet order {order}")]
    DegreeOutOfRange { degree: usize, order: usize },
    #[error("jet order {have} is too low, {operation} needs at least {need}")]
    InsufficientOrder {
        operation: &'static str,
        need: usize,
        have: usize,
    },
    #[error("value {value} outside the domain of {function}")]
    Domain { function: &'static str, value: f64 },

    #[error("slots {0} and {1} must have opposite variance to be contracted")]
    SameVariance(usize, usize),
    #[error("slots {0:?} do not share a variance")]
    MixedVariance(Vec<usize>),
    #[error("tensor shape error: {0}")]
    Shape(String),
    #[error("metric is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("input is not antisymmetric (defect {0:e})")]
    NotAntisymmetric(f64),

    #[error("unit-Ricci normalisation is impossible: {0}")]
    FlatNormalization(String),
    #[error("empty factor list")]
    EmptyProduct,
    #[error("model is not normalised with Ricci = g (defect {0:e})")]
    NotUnitRicci(f64),
    #[error("Ricci tensor is degenerate: {0}")]
    DegenerateRicci(String),
    #[error("rank is ambiguous near threshold {threshold:e}: singular values {near:?}; pass an explicit tolerance")]
    AmbiguousRank { threshold: f64, near: Vec<f64> },
    #[error("eigensolver did not converge after {0} sweeps")]
    NoConvergence(usize),

    #[error("point {point:?} is outside the chart domain: {reason}")]
    OutsideChart { point: Vec<f64>, reason: String },
    #[error("chart is not of the required form: {0}")]
    ChartKind(String),
    #[error("Khavkine denominator {value:e} is on the singular locus (Υ'' + 2ΥΥ' = 0)")]
    SingularWarp { value: f64 },
    #[error("least-squares probe failed: {0}")]
    Probe(String),

    #[error("cannot parse space spec {input:?} at byte {position}: {message}")]
    SpaceSpecParse {
        input: String,
        position: usize,
        message: String,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("report serialisation failed: {0}")]
    Serialization(String),
}
