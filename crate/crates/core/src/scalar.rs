use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real floating point element type for dense and BLAST matrices: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossless for `f64`, rounding for `f32`.
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 always converts to a float type")
    }

    fn to_f64_lossless(self) -> f64 {
        self.to_f64().expect("float types widen to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
