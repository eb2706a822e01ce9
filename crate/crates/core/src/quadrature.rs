//! Gauss-Legendre rules and the product quadrature on the unit sphere.

use crate::error::{CoreError, Result};
use crate::geom::Point;
use crate::scalar::Scalar;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
///
/// Newton iteration on the Legendre recurrence, seeded with the Chebyshev
/// angle estimate; accurate to machine precision for the orders used here.
pub fn gauss_legendre<T: Scalar>(n: usize) -> (Vec<T>, Vec<T>) {
    assert!(n >= 1);
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    let nf = T::of_usize(n);
    for i in 0..(n + 1) / 2 {
        let theta = T::PI() * (T::of_usize(i) + T::of(0.75)) / (nf + T::of(0.5));
        let mut x = theta.cos();
        let mut dp;
        loop {
            // Legendre P_n and derivative at x by upward recurrence.
            let mut p0 = T::one();
            let mut p1 = x;
            for j in 2..=n {
                let jf = T::of_usize(j);
                let p2 = ((T::of(2.0) * jf - T::one()) * x * p1 - (jf - T::one()) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - T::one());
            let dx = p1 / dp;
            x = x - dx;
            if dx.abs() <= T::epsilon() * T::of(4.0) {
                break;
            }
        }
        let w = T::of(2.0) / ((T::one() - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n == 1 {
        nodes[0] = T::zero();
        weights[0] = T::of(2.0);
    }
    (nodes, weights)
}

/// Quadrature directions on the unit sphere with weights summing to `4 pi`.
///
/// Product rule: Gauss-Legendre in `cos(theta)` times a uniform periodic
/// rule in `phi`. Extra zero-weight directions can be appended when a value
/// is needed at a specific direction (e.g. the forward direction for the
/// optical theorem) without perturbing the quadrature.
#[derive(Debug, Clone)]
pub struct DirectionSet<T> {
    pub directions: Vec<Point<T>>,
    pub weights: Vec<T>,
    /// `theta, phi` per direction (radians), kept for the CSV writers.
    pub angles: Vec<(T, T)>,
}

impl<T: Scalar> DirectionSet<T> {
    /// Product Gauss-Legendre x uniform rule with `n_theta * n_phi` points.
    pub fn product(n_theta: usize, n_phi: usize) -> Self {
        let (mu, w_mu) = gauss_legendre::<T>(n_theta);
        let two_pi = T::of(2.0) * T::PI();
        let dphi = two_pi / T::of_usize(n_phi);
        let mut directions = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        let mut angles = Vec::with_capacity(n_theta * n_phi);
        for (m, wm) in mu.iter().zip(w_mu.iter()) {
            let sin_t = (T::one() - *m * *m).max(T::zero()).sqrt();
            let theta = m.acos();
            for j in 0..n_phi {
                let phi = dphi * T::of_usize(j);
                directions.push([sin_t * phi.cos(), sin_t * phi.sin(), *m]);
                weights.push(*wm * dphi);
                angles.push((theta, phi));
            }
        }
        Self {
            directions,
            weights,
            angles,
        }
    }

    /// Default resolution used by the far-field routines.
    pub fn default_sphere() -> Self {
        Self::product(16, 32)
    }

    /// Append a zero-weight direction unless an equal direction exists.
    pub fn with_direction(mut self, dir: Point<T>) -> Self {
        if self.find(dir).is_none() {
            let theta = dir[2].clamp(-T::one(), T::one()).acos();
            let phi_raw = dir[1].atan2(dir[0]);
            let phi = if phi_raw < T::zero() {
                phi_raw + T::of(2.0) * T::PI()
            } else {
                phi_raw
            };
            self.directions.push(dir);
            self.weights.push(T::zero());
            self.angles.push((theta, phi));
        }
        self
    }

    /// Index of a direction matching `dir` to ~1e-12.
    pub fn find(&self, dir: Point<T>) -> Option<usize> {
        let tol = T::of(1e-12);
        self.directions.iter().position(|d| {
            (d[0] - dir[0]).abs() <= tol
                && (d[1] - dir[1]).abs() <= tol
                && (d[2] - dir[2]).abs() <= tol
        })
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// Total quadrature weight; `4 pi` up to roundoff for product rules.
    pub fn total_weight(&self) -> T {
        self.weights.iter().fold(T::zero(), |a, w| a + *w)
    }
}

/// Midpoint-rule reference integrator over a box, used by tests and the
/// Lemma-type studies as the independent integral oracle.
pub fn midpoint_integral_3d<T, F>(lo: Point<T>, hi: Point<T>, n: usize, f: F) -> T
where
    T: Scalar,
    F: Fn(Point<T>) -> T,
{
    let nf = T::of_usize(n);
    let h = [
        (hi[0] - lo[0]) / nf,
        (hi[1] - lo[1]) / nf,
        (hi[2] - lo[2]) / nf,
    ];
    let vol = h[0] * h[1] * h[2];
    let half = T::of(0.5);
    let mut acc = T::zero();
    for i in 0..n {
        let x = lo[0] + h[0] * (T::of_usize(i) + half);
        for j in 0..n {
            let y = lo[1] + h[1] * (T::of_usize(j) + half);
            for l in 0..n {
                let z = lo[2] + h[2] * (T::of_usize(l) + half);
                acc += f([x, y, z]);
            }
        }
    }
    acc * vol
}

/// Complex-valued counterpart of `midpoint_integral_3d`.
pub fn midpoint_integral_3d_complex<T, F>(
    lo: Point<T>,
    hi: Point<T>,
    n: usize,
    f: F,
) -> crate::scalar::Cplx<T>
where
    T: Scalar,
    F: Fn(Point<T>) -> crate::scalar::Cplx<T>,
{
    let re = |x: Point<T>| f(x).re;
    let im = |x: Point<T>| f(x).im;
    num_complex::Complex::new(
        midpoint_integral_3d(lo, hi, n, re),
        midpoint_integral_3d(lo, hi, n, im),
    )
}

/// Adaptive Simpson integration on an interval, with absolute tolerance.
pub fn adaptive_simpson<T, F>(f: &F, a: T, b: T, tol: T, max_depth: usize) -> T
where
    T: Scalar,
    F: Fn(T) -> T,
{
    let half = T::of(0.5);
    let sixth = T::of(1.0 / 6.0);
    let c = (a + b) * half;
    let fa = f(a);
    let fb = f(b);
    let fc = f(c);
    let whole = (b - a) * sixth * (fa + T::of(4.0) * fc + fb);
    simpson_rec(f, a, b, c, fa, fb, fc, whole, tol, max_depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<T, F>(
    f: &F,
    a: T,
    b: T,
    c: T,
    fa: T,
    fb: T,
    fc: T,
    whole: T,
    tol: T,
    depth: usize,
) -> T
where
    T: Scalar,
    F: Fn(T) -> T,
{
    let half = T::of(0.5);
    let sixth = T::of(1.0 / 6.0);
    let d = (a + c) * half;
    let e = (c + b) * half;
    let fd = f(d);
    let fe = f(e);
    let left = (c - a) * sixth * (fa + T::of(4.0) * fd + fc);
    let right = (b - c) * sixth * (fc + T::of(4.0) * fe + fb);
    let err = left + right - whole;
    if depth == 0 || err.abs() <= T::of(15.0) * tol {
        return left + right + err / T::of(15.0);
    }
    let half_tol = tol * half;
    simpson_rec(f, a, c, d, fa, fc, fd, left, half_tol, depth - 1)
        + simpson_rec(f, c, b, e, fc, fb, fe, right, half_tol, depth - 1)
}

/// Deterministic, roughly uniform set of points on the unit sphere
/// (golden-angle spiral); handy for probe layouts.
pub fn fibonacci_sphere<T: Scalar>(n: usize) -> Vec<Point<T>> {
    let golden = T::of(std::f64::consts::PI * (3.0 - 5.0f64.sqrt()));
    (0..n)
        .map(|i| {
            let z = T::one() - T::of(2.0) * (T::of_usize(i) + T::of(0.5)) / T::of_usize(n);
            let r = (T::one() - z * z).max(T::zero()).sqrt();
            let phi = golden * T::of_usize(i);
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

/// Validate a direction-set against its invariants.
pub fn validate_direction_set<T: Scalar>(set: &DirectionSet<T>) -> Result<()> {
    let four_pi = T::of(4.0) * T::PI();
    if (set.total_weight() - four_pi).abs() > T::of(1e-8) {
        return Err(CoreError::InvalidInput(format!(
            "sphere quadrature weights sum to {} instead of 4 pi",
            set.total_weight()
        )));
    }
    for d in &set.directions {
        let n2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
        if (n2.sqrt() - T::one()).abs() > T::of(1e-12) {
            return Err(CoreError::InvalidInput(
                "direction is not a unit vector".into(),
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre::<f64>(8);
        // Degree 15 is exact for 8 nodes.
        let integral: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(14)).sum();
        assert!((integral - 2.0 / 15.0).abs() < 1e-14);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn sphere_weights_sum_to_4pi() {
        let set = DirectionSet::<f64>::product(16, 32);
        assert!((set.total_weight() - 4.0 * PI).abs() < 1e-10);
        validate_direction_set(&set).unwrap();
    }

    #[test]
    fn sphere_quadrature_integrates_harmonics() {
        let set = DirectionSet::<f64>::product(16, 32);
        // integral of z^2 over S^2 = 4 pi / 3.
        let got: f64 = set
            .directions
            .iter()
            .zip(&set.weights)
            .map(|(d, w)| w * d[2] * d[2])
            .sum();
        assert!((got - 4.0 * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn with_direction_appends_zero_weight() {
        let set = DirectionSet::<f64>::product(4, 8).with_direction([0.0, 0.0, 1.0]);
        let idx = set.find([0.0, 0.0, 1.0]).unwrap();
        assert_eq!(set.weights[idx], 0.0);
        assert!((set.total_weight() - 4.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn adaptive_simpson_handles_sqrt_kink() {
        let f = |x: f64| x.abs().sqrt();
        let got = adaptive_simpson(&f, -1.0, 1.0, 1e-10, 40);
        assert!((got - 4.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn midpoint_integral_constant() {
        let v = midpoint_integral_3d([0.0f64; 3], [1.0, 2.0, 0.5], 8, |_| 3.0);
        assert!((v - 3.0).abs() < 1e-13);
    }
}
