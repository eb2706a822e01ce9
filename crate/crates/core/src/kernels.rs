//! Free-space Helmholtz kernel and the closed-form Newtonian potential of a
//! uniform ball, the two analytic ingredients of both solvers.

use crate::geom::{distance, dot, Point};
use crate::scalar::{imag_unit, sin_cos_kernel, Cplx, Scalar};

/// Volume of a ball of radius `a`.
#[inline]
pub fn ball_volume<T: Scalar>(a: T) -> T {
    let four_thirds = T::of(4.0 / 3.0);
    four_thirds * T::PI() * a * a * a
}

/// Inverse of `ball_volume`: radius of the ball with the given volume.
#[inline]
pub fn equal_volume_radius<T: Scalar>(volume: T) -> T {
    let three_over_4pi = T::of(3.0) / (T::of(4.0) * T::PI());
    (three_over_4pi * volume).powf(T::of(1.0 / 3.0))
}

/// Outgoing free-space kernel `exp(ik r) / (4 pi r)` at distance `r`.
#[inline]
pub fn green_scalar<T: Scalar>(k: T, r: T) -> Cplx<T> {
    let inv = T::one() / (T::of(4.0) * T::PI() * r);
    let (s, c) = sin_cos_kernel(k * r);
    Cplx::new(c * inv, s * inv)
}

/// Outgoing free-space kernel between two points.
#[inline]
pub fn green<T: Scalar>(k: T, x: Point<T>, y: Point<T>) -> Cplx<T> {
    green_scalar(k, distance(x, y))
}

/// Incident plane wave `exp(ik alpha . x)`.
#[inline]
pub fn plane_wave<T: Scalar>(k: T, alpha: Point<T>, x: Point<T>) -> Cplx<T> {
    let (s, c) = sin_cos_kernel(k * dot(alpha, x));
    Cplx::new(c, s)
}

/// `exp(-ik beta . y)`, the far-zone phase factor.
#[inline]
pub fn far_phase<T: Scalar>(k: T, beta: Point<T>, y: Point<T>) -> Cplx<T> {
    let (s, c) = sin_cos_kernel(-k * dot(beta, y));
    Cplx::new(c, s)
}

/// Newtonian potential of the unit-density ball:
/// `integral over |y - center| < a of dy / |x - y|`.
///
/// Piecewise closed form: `V(a) / r` outside (r >= a) and
/// `2 pi (a^2 - r^2 / 3)` inside (r <= a); the two branches agree at r = a.
#[inline]
pub fn ball_newtonian_potential<T: Scalar>(x: Point<T>, center: Point<T>, a: T) -> T {
    let r = distance(x, center);
    ball_newtonian_potential_radial(r, a)
}

/// Radial form of `ball_newtonian_potential`.
#[inline]
pub fn ball_newtonian_potential_radial<T: Scalar>(r: T, a: T) -> T {
    if r >= a {
        ball_volume(a) / r
    } else {
        let two_pi = T::of(2.0) * T::PI();
        let third = T::of(1.0 / 3.0);
        two_pi * (a * a - r * r * third)
    }
}

/// Kernel of the exact field representation: `exp(ik r)/(4 pi)` times the
/// ball potential. Reduces to `g(x, y) V(a)` for r >= a and stays finite
/// inside the ball.
#[inline]
pub fn ball_kernel<T: Scalar>(k: T, x: Point<T>, center: Point<T>, a: T) -> Cplx<T> {
    let r = distance(x, center);
    let (s, c) = sin_cos_kernel(k * r);
    let phase = Cplx::new(c, s);
    let inv_4pi = T::one() / (T::of(4.0) * T::PI());
    phase * (ball_newtonian_potential_radial(r, a) * inv_4pi)
}

/// Plane wave with an arbitrary complex amplitude, as a closure-friendly
/// helper for incident fields.
#[inline]
pub fn plane_wave_amp<T: Scalar>(
    k: T,
    alpha: Point<T>,
    amplitude: Cplx<T>,
    x: Point<T>,
) -> Cplx<T> {
    amplitude * plane_wave(k, alpha, x)
}

/// `exp(i z)` for real `z` over the generic scalar.
#[inline]
pub fn expi<T: Scalar>(z: T) -> Cplx<T> {
    let (s, c) = sin_cos_kernel(z);
    Cplx::new(c, s)
}

/// Guard that `i` really maps to the upper half plane in this build.
#[allow(dead_code)]
fn _imag_unit_sanity<T: Scalar>() -> Cplx<T> {
    imag_unit::<T>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn ball_potential_closed_form_values() {
        // a = 1, r = 2: V(1)/2 = 2 pi / 3.
        let v = ball_newtonian_potential::<f64>([2.0, 0.0, 0.0], [0.0; 3], 1.0);
        assert!((v - 2.0 * PI / 3.0).abs() < 1e-14);

        // Center value 2 pi a^2.
        let v0 = ball_newtonian_potential::<f64>([0.0; 3], [0.0; 3], 1.0);
        assert!((v0 - 2.0 * PI).abs() < 1e-14);

        // Both branches at r = a give 4 pi / 3.
        let vb = ball_newtonian_potential::<f64>([1.0, 0.0, 0.0], [0.0; 3], 1.0);
        assert!((vb - 4.0 * PI / 3.0).abs() < 1e-14);
    }

    #[test]
    fn ball_potential_branches_agree_at_boundary() {
        // One-sided limits at r = a: V(a)/a from outside, 2 pi (a^2 - a^2/3)
        // from inside.
        let mut rng = 0x2545F4914F6CDD1Du64;
        for _ in 0..100 {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = 0.05 + (rng >> 11) as f64 / (1u64 << 53) as f64;
            let outside = ball_volume(a) / a;
            let inside = 2.0 * PI * (a * a - a * a / 3.0);
            assert!(
                (outside - inside).abs() < 1e-12 * outside.max(1.0),
                "branch mismatch at a = {a}"
            );
        }
    }

    #[test]
    fn green_matches_direct_formula() {
        let k = 2.3;
        let x = [0.1, -0.4, 0.7];
        let y = [1.0, 0.2, -0.3];
        let r = distance(x, y);
        let expected = num_complex::Complex64::new(0.0, k * r).exp() / (4.0 * PI * r);
        let got = green(k, x, y);
        assert!((got - expected).norm() < 1e-14);
    }

    #[test]
    fn ball_kernel_reduces_to_green_times_volume_outside() {
        let k = 1.7;
        let a = 0.05;
        let x = [1.0, 0.0, 0.0];
        let c = [0.0; 3];
        let expected = green(k, x, c) * ball_volume(a);
        let got = ball_kernel(k, x, c, a);
        assert!((got - expected).norm() < 1e-14 * expected.norm());
    }
}
