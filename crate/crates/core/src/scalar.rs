//! Generic scalar abstraction: all numerics are written over `T: Scalar`,
//! with `f64` as the default precision (see the crate-root aliases).

use std::fmt::{Debug, Display};
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point scalar the solvers are generic over (`f32` or `f64`).
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` constant.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to Scalar")
    }

    /// Conversion from a count.
    #[inline]
    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("usize converts to Scalar")
    }

    /// Lossy conversion to `f64` (used by the fixed-format writers).
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }

    /// Round to nearest even via the shifter constant, valid for
    /// magnitudes far below the mantissa width. Pure add/sub arithmetic,
    /// so hot loops using it stay branch- and instruction-set-neutral.
    fn round_shifted(self) -> Self;
}

impl Scalar for f32 {
    #[inline(always)]
    fn round_shifted(self) -> Self {
        const SHIFTER: f32 = 12_582_912.0; // 1.5 * 2^23
        (self + SHIFTER) - SHIFTER
    }
}

impl Scalar for f64 {
    #[inline(always)]
    fn round_shifted(self) -> Self {
        const SHIFTER: f64 = 6_755_399_441_055_744.0; // 1.5 * 2^52
        (self + SHIFTER) - SHIFTER
    }
}

/// Complex number over the generic scalar.
pub type Cplx<T> = Complex<T>;

/// Complex constant from `f64` parts.
#[inline]
pub fn cplx<T: Scalar>(re: f64, im: f64) -> Cplx<T> {
    Complex::new(T::of(re), T::of(im))
}

/// `i` over `T`.
#[inline]
pub fn imag_unit<T: Scalar>() -> Cplx<T> {
    Complex::new(T::zero(), T::one())
}

/// Branch-free `(sin x, cos x)` accurate to ~1e-15 absolute for `f64`.
///
/// Quadrant reduction against pi/2 (Cody-Waite split) followed by short
/// odd/even polynomials on [-pi/4, pi/4]. The point over the libm pair is
/// that it inlines and vectorizes inside the kernel matvec loops, which
/// dominate the large-M solves.
#[inline(always)]
pub fn sin_cos_kernel<T: Scalar>(x: T) -> (T, T) {
    // 2/pi and a three-part split of pi/2 (33 + 33 + rest bits).
    let two_over_pi = T::of(0.636_619_772_367_581_4);
    let p1 = T::of(1.570_796_326_734_125_61); // high part of pi/2
    let p2 = T::of(6.077_100_506_303_966e-11); // medium part
    let p3 = T::of(2.022_266_248_795_950_6e-21); // tail

    let n = (x * two_over_pi).round_shifted();
    let y = ((x - n * p1) - n * p2) - n * p3;
    let t = y * y;

    // sin(y) = y * s(t), cos(y) = c(t) on |y| <= pi/4.
    let s = T::one()
        + t * (T::of(-1.666_666_666_666_666_6e-1)
            + t * (T::of(8.333_333_333_333_333e-3)
                + t * (T::of(-1.984_126_984_126_984e-4)
                    + t * (T::of(2.755_731_922_398_589e-6)
                        + t * (T::of(-2.505_210_838_544_172e-8)
                            + t * (T::of(1.605_904_383_682_161e-10)
                                + t * T::of(-7.647_163_731_819_816e-13)))))));
    let c = T::one()
        + t * (T::of(-0.5)
            + t * (T::of(4.166_666_666_666_666_4e-2)
                + t * (T::of(-1.388_888_888_888_889e-3)
                    + t * (T::of(2.480_158_730_158_73e-5)
                        + t * (T::of(-2.755_731_922_398_589e-7)
                            + t * (T::of(2.087_675_698_786_81e-9)
                                + t * T::of(-1.147_074_559_772_972e-11)))))));
    let sin_y = y * s;
    let cos_y = c;

    // Branch-free quadrant selection: with (s_n, c_n) = (sin, cos)(n pi/2),
    // sin x = sin_y c_n + cos_y s_n and cos x = cos_y c_n - sin_y s_n.
    // Pure arithmetic (n is integer-valued, so floor(n/2) is a shifted
    // round of n/2 - 1/4) keeps the matvec loops vectorizable.
    let two = T::of(2.0);
    let quarter = T::of(0.25);
    let half_n = (n * T::of(0.5) - quarter).round_shifted();
    let q0 = n - two * half_n; // n mod 2 in {0, 1}
    let q1 = half_n - two * (half_n * T::of(0.5) - quarter).round_shifted(); // floor(n/2) mod 2
    let flip = T::one() - two * q1; // +1 for quadrants 0/1, -1 for 2/3
    let c_n = (T::one() - q0) * flip;
    let s_n = q0 * flip;
    (sin_y * c_n + cos_y * s_n, cos_y * c_n - sin_y * s_n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sin_cos_kernel_matches_libm() {
        let mut worst = 0.0f64;
        let mut x = -50.0f64;
        while x < 50.0 {
            let (s, c) = sin_cos_kernel(x);
            let (s0, c0) = x.sin_cos();
            worst = worst.max((s - s0).abs()).max((c - c0).abs());
            x += 0.000_37;
        }
        assert!(worst < 1e-14, "worst error {worst:e}");
    }

    #[test]
    fn sin_cos_kernel_f32() {
        let (s, c) = sin_cos_kernel(1.25f32);
        assert!((s - 1.25f32.sin()).abs() < 1e-6);
        assert!((c - 1.25f32.cos()).abs() < 1e-6);
    }
}
