//! Real scalar backends and the complex helpers built on them.

use std::fmt::Debug;
use std::ops::{AddAssign, DivAssign, MulAssign, Neg, SubAssign};

use num_complex::Complex;
use num_traits::Num;

/// Extended-precision real type (double-double, 105-bit significand).
pub use qd::Quad as Extended;

/// Complex number over a [`Real`] backend.
pub type C<T> = Complex<T>;

/// Real field used by every numeric routine in the crate.
///
/// Implemented for `f64` (default) and [`Extended`]. Everything above the
/// scalar layer is generic over this trait, so a whole verification run can
/// be repeated in extended precision without code changes.
pub trait Real:
    Copy
    + Debug
    + PartialOrd
    + Send
    + Sync
    + Num
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + 'static
{
    /// Short backend name used in reports.
    const NAME: &'static str;

    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn epsilon() -> Self;
    fn is_finite(self) -> bool;

    fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    /// `sqrt(a^2 + b^2)` without intermediate overflow.
    fn hypot(self, other: Self) -> Self {
        let a = self.abs();
        let b = other.abs();
        let big = a.max(b);
        if big == Self::zero() {
            return big;
        }
        let small = a.min(b) / big;
        big * (Self::one() + small * small).sqrt()
    }
}

impl Real for f64 {
    const NAME: &'static str = "double";

    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn epsilon() -> Self {
        f64::EPSILON
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    fn hypot(self, other: Self) -> Self {
        f64::hypot(self, other)
    }
}

impl Real for Extended {
    const NAME: &'static str = "extended";

    fn from_f64(x: f64) -> Self {
        Extended::from_f64(x)
    }
    fn to_f64(self) -> f64 {
        self.0 + self.1
    }
    fn sqrt(self) -> Self {
        if self.0 <= 0.0 {
            return Extended::ZERO;
        }
        Extended::sqrt(self)
    }
    fn abs(self) -> Self {
        Extended::abs(self)
    }
    fn epsilon() -> Self {
        Extended::EPSILON
    }
    fn is_finite(self) -> bool {
        Extended::is_finite(self)
    }
}

/// Lift an `f64` pair into `C<T>`.
pub fn c<T: Real>(re: f64, im: f64) -> C<T> {
    Complex::new(T::from_f64(re), T::from_f64(im))
}

/// Real constant as a complex number.
pub fn cr<T: Real>(re: f64) -> C<T> {
    Complex::new(T::from_f64(re), T::zero())
}

pub fn cabs<T: Real>(z: C<T>) -> T {
    z.re.hypot(z.im)
}

/// Modulus as `f64`, for reporting.
pub fn cabs64<T: Real>(z: C<T>) -> f64 {
    cabs(z).to_f64()
}

/// Principal square root (branch cut along the negative real axis).
pub fn csqrt<T: Real>(z: C<T>) -> C<T> {
    let zero = T::zero();
    let half = T::from_f64(0.5);
    if z.re == zero && z.im == zero {
        return Complex::new(zero, zero);
    }
    let m = cabs(z);
    let t = ((m + z.re.abs()) * half).sqrt();
    if z.re >= zero {
        Complex::new(t, z.im / (t + t))
    } else {
        let im = if z.im >= zero { t } else { -t };
        Complex::new(z.im.abs() / (t + t), im)
    }
}

/// Convert between backends (through `f64` hi/lo parts where available).
pub fn to_c64<T: Real>(z: C<T>) -> C<f64> {
    Complex::new(z.re.to_f64(), z.im.to_f64())
}

pub fn from_c64<T: Real>(z: C<f64>) -> C<T> {
    Complex::new(T::from_f64(z.re), T::from_f64(z.im))
}

pub fn is_finite<T: Real>(z: C<T>) -> bool {
    z.re.is_finite() && z.im.is_finite()
}
