use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{0}: input must be positive")]
    ZeroInput(&'static str),

    #[error("{what} = {value} is out of range (limit {limit})")]
    OutOfRange {
        what: &'static str,
        value: u128,
        limit: u128,
    },

    #[error("{0} is not prime")]
    NotPrime(u64),

    #[error("{divisor} does not divide {of}")]
    NotDivisor { divisor: u64, of: u64 },

    #[error("{value} is not a unit modulo {modulus}")]
    NotUnit { value: u64, modulus: u64 },

    #[error("invalid set: {0}")]
    InvalidSet(String),

    #[error("coefficient at {at} has modulus {norm} > 1")]
    CoefficientTooLarge { at: u64, norm: f64 },

    #[error("{identity} violated: lhs = {lhs}, rhs = {rhs}")]
    IdentityMismatch {
        identity: &'static str,
        lhs: f64,
        rhs: f64,
    },

    #[error("{0}")]
    Domain(String),
}
