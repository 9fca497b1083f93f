use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::Float;

/// Floating-point scalar the numerical pipeline is generic over.
///
/// Everything needed is already provided by `num_traits::Float` plus the
/// usual bounds for summation, formatting and sharing across threads.
/// Blanket-implemented, so `f32` and `f64` qualify automatically.
pub trait Scalar: Float + Sum<Self> + Debug + Display + Send + Sync + 'static {
    /// Lossy conversion from `f64`, panicking only for exotic scalar types
    /// that cannot represent ordinary finite constants.
    fn from_f64(value: f64) -> Self {
        Self::from(value).expect("finite f64 constant must convert into the scalar type")
    }

    /// Lossy conversion to `f64` for reporting and cross-checks.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("scalar must convert to f64")
    }
}

impl<T> Scalar for T where T: Float + Sum<T> + Debug + Display + Send + Sync + 'static {}
