use thiserror::Error;

/// Errors raised by the numerical kernel and the game models.
///
/// Payloads are stored as `f64` regardless of the scalar type the
/// computation ran in, so the error type stays non-generic.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NoSignChange {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("no convergence after {iterations} iterations (last estimate {last})")]
    MaxIterExceeded { iterations: usize, last: f64 },

    #[error("function undefined or non-finite at x = {x}")]
    Domain { x: f64 },

    #[error("price {price} outside [0, {p_max}]")]
    PriceOutOfRange { price: f64, p_max: f64 },

    #[error("carried load {load} reaches capacity {capacity}")]
    CapacityExceeded { load: f64, capacity: f64 },

    #[error(
        "effective side payment |{effective}| must be below {bound} for an interior equilibrium{}",
        kappa.map(|k| format!(" (kappa = {k})")).unwrap_or_default()
    )]
    SidePaymentTooLarge {
        effective: f64,
        bound: f64,
        kappa: Option<f64>,
    },

    #[error("model precondition violated: {0}")]
    ModelMismatch(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("popularity mass increases at index {index}: pi({index}) = {value} > {previous}")]
    NotMonotone {
        index: usize,
        value: f64,
        previous: f64,
    },

    #[error("popularity table: {0}")]
    Table(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
