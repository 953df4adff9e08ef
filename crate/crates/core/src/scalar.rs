// SPDX-License-Identifier: Apache-2.0

//! Scalar abstractions shared by the generic solvers.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Sub};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, Zero};

/// Real floating point type the generic parts of the crate are written against.
pub trait Real:
    Float + FloatConst + FromPrimitive + Default + Debug + Display + Sum + AddAssign + Send + Sync + 'static
{
    /// Converts an `f64` literal. Every supported type represents the values used here.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in target float type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Element of an ODE state vector: a real or complex number over `R`.
pub trait OdeElem<R: Real>:
    Copy + Send + Sync + Debug + Zero + Add<Output = Self> + Sub<Output = Self> + Mul<R, Output = Self>
{
    fn magnitude(self) -> R;
    fn is_finite_elem(self) -> bool;
}

macro_rules! impl_elem {
    ($r:ty) => {
        impl OdeElem<$r> for $r {
            #[inline]
            fn magnitude(self) -> $r {
                self.abs()
            }
            #[inline]
            fn is_finite_elem(self) -> bool {
                self.is_finite()
            }
        }

        impl OdeElem<$r> for Complex<$r> {
            #[inline]
            fn magnitude(self) -> $r {
                // Plain sqrt: hypot's overflow guard dominates the step cost for large states.
                self.norm_sqr().sqrt()
            }
            #[inline]
            fn is_finite_elem(self) -> bool {
                self.re.is_finite() && self.im.is_finite()
            }
        }
    };
}

impl_elem!(f32);
impl_elem!(f64);
