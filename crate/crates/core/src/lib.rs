//! Exact evaluation of double exponential sums
//! `W = sum_{x in X} |sum_{y in Y} gamma(y) e_p(a lambda^{xy})|`
//! over prime fields, the constructions used to bound them, and the
//! closed-form bounds they are compared against.

pub mod accum;
pub mod bounds;
pub mod error;
pub mod experiment;
pub mod proof;
pub mod ring;
pub mod sums;
pub mod verify;

pub use accum::{ComplexAccumulator, Neumaier};
pub use bounds::{BoundId, BoundParams, BoundReport};
pub use error::{Error, Result};
pub use proof::{GcdLayer, PrimeBasket};
pub use ring::{OrderedElement, PrimeContext};
pub use sums::{Gamma, Kernel, SumSpec, WeightedSubset};

pub use num_complex::Complex64;
