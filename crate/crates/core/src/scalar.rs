//! Scalar abstractions.
//!
//! Quantity decoding only needs field arithmetic, so [`Scalar`] is satisfied by
//! both floats and exact rationals. The market models raise quantities to
//! fractional powers and therefore need a [`Real`].

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, Num};

/// Field-like number usable by the quantity codec. Implemented for `f32`,
/// `f64` and `num_rational::BigRational`.
pub trait Scalar: Clone + PartialOrd + Debug + Num + FromPrimitive {}

impl<T> Scalar for T where T: Clone + PartialOrd + Debug + Num + FromPrimitive {}

/// Floating point scalar for the market models and the simulation engine.
pub trait Real: Scalar + Float + Display + Send + Sync + 'static {
    /// Lossless-enough conversion from a literal.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal fits the scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Real for T where T: Scalar + Float + Display + Send + Sync + 'static {}

#[cfg(test)]
mod tests {
    use super::*;

    fn half<T: Real>() -> T {
        T::lit(0.5)
    }

    #[test]
    fn literals_round_trip() {
        assert_eq!(half::<f32>(), 0.5f32);
        assert_eq!(half::<f64>().as_f64(), 0.5);
    }
}
