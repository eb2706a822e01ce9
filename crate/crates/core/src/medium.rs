//! Potentials, refraction coefficients and the design map that factors a
//! target potential into an amplitude function and a number density.

use std::sync::Arc;

use num_complex::Complex;

use crate::error::{CoreError, Result};
use crate::geom::{unit, Domain, Point};
use crate::kernels::plane_wave_amp;
use crate::scalar::{Cplx, Scalar};

/// Complex-valued pure sampler of position. Samplers are cheap to clone and
/// safe to evaluate concurrently.
pub type CSampler<T> = Arc<dyn Fn(Point<T>) -> Cplx<T> + Send + Sync>;

/// Real-valued pure sampler of position.
pub type RSampler<T> = Arc<dyn Fn(Point<T>) -> T + Send + Sync>;

/// Constant complex sampler.
pub fn constant_c<T: Scalar>(v: Cplx<T>) -> CSampler<T> {
    Arc::new(move |_| v)
}

/// Constant real sampler.
pub fn constant_r<T: Scalar>(v: T) -> RSampler<T> {
    Arc::new(move |_| v)
}

/// Restrict a complex sampler to a box, returning `outside` beyond it.
pub fn restrict_c<T: Scalar>(f: CSampler<T>, domain: &Domain<T>, outside: Cplx<T>) -> CSampler<T> {
    let bb = domain.bounding_box();
    Arc::new(move |x| if bb.contains(x) { f(x) } else { outside })
}

/// Restrict a real sampler to a box, returning zero beyond it.
pub fn restrict_r<T: Scalar>(f: RSampler<T>, domain: &Domain<T>) -> RSampler<T> {
    let bb = domain.bounding_box();
    Arc::new(move |x| if bb.contains(x) { f(x) } else { T::zero() })
}

/// Incident plane wave: wavenumber, direction and complex amplitude.
#[derive(Debug, Clone, Copy)]
pub struct WaveContext<T> {
    pub k: T,
    pub alpha: Point<T>,
    pub amplitude: Cplx<T>,
}

impl<T: Scalar> WaveContext<T> {
    pub fn new(k: T, alpha: Point<T>) -> Result<Self> {
        Self::with_amplitude(k, alpha, Complex::new(T::one(), T::zero()))
    }

    pub fn with_amplitude(k: T, alpha: Point<T>, amplitude: Cplx<T>) -> Result<Self> {
        if !(k > T::zero()) || !k.is_finite() {
            return Err(CoreError::InvalidWaveContext(format!(
                "wavenumber must be positive, got {k}"
            )));
        }
        let alpha = unit(alpha).ok_or_else(|| {
            CoreError::InvalidWaveContext("incident direction must be nonzero".into())
        })?;
        Ok(Self {
            k,
            alpha,
            amplitude,
        })
    }

    /// Incident field `u0(x) = amplitude * exp(ik alpha . x)`.
    #[inline]
    pub fn incident(&self, x: Point<T>) -> Cplx<T> {
        plane_wave_amp(self.k, self.alpha, self.amplitude, x)
    }
}

/// Default maximum sphere-packing volume fraction (conjectured optimal
/// packing constant, configurable because it is a conjecture).
pub const DEFAULT_P_MAX: f64 = 0.74;

/// Bound on the admissible number-density `N(x)`.
#[derive(Debug, Clone, Copy)]
pub struct PackingBound<T> {
    pub p_max: T,
}

impl<T: Scalar> Default for PackingBound<T> {
    fn default() -> Self {
        Self {
            p_max: T::of(DEFAULT_P_MAX),
        }
    }
}

impl<T: Scalar> PackingBound<T> {
    pub fn new(p_max: T) -> Result<Self> {
        if !(p_max > T::zero() && p_max < T::one()) {
            return Err(CoreError::InvalidInput(format!(
                "p_max must lie in (0, 1), got {p_max}"
            )));
        }
        Ok(Self { p_max })
    }
}

/// Medium description on a bounded domain: potential `q`, refraction
/// coefficient `n^2 = 1 - q / k^2`, number density `N` and, once designed,
/// the amplitude function `A` with `q = A N`.
#[derive(Clone)]
pub struct MediumSpec<T> {
    pub domain: Domain<T>,
    pub k: T,
    pub packing: PackingBound<T>,
    q: CSampler<T>,
    n2: CSampler<T>,
    density: Option<RSampler<T>>,
    amplitude: Option<CSampler<T>>,
}

impl<T: Scalar> MediumSpec<T> {
    /// Build from the potential; the refraction coefficient is derived.
    pub fn from_potential(
        domain: Domain<T>,
        k: T,
        q: CSampler<T>,
        packing: PackingBound<T>,
    ) -> Result<Self> {
        if !(k > T::zero()) {
            return Err(CoreError::InvalidWaveContext(
                "wavenumber must be positive".into(),
            ));
        }
        let q = restrict_c(q, &domain, Complex::new(T::zero(), T::zero()));
        let n2 = refraction_from_potential(q.clone(), k);
        Ok(Self {
            domain,
            k,
            packing,
            q,
            n2,
            density: None,
            amplitude: None,
        })
    }

    /// Build from the refraction coefficient; the potential is derived.
    pub fn from_refraction(
        domain: Domain<T>,
        k: T,
        n2: CSampler<T>,
        packing: PackingBound<T>,
    ) -> Result<Self> {
        if !(k > T::zero()) {
            return Err(CoreError::InvalidWaveContext(
                "wavenumber must be positive".into(),
            ));
        }
        // n^2 = 1 outside D so that q = k^2 (1 - n^2) vanishes there.
        let n2 = restrict_c(n2, &domain, Complex::new(T::one(), T::zero()));
        let q = potential_from_refraction(n2.clone(), k);
        Ok(Self {
            domain,
            k,
            packing,
            q,
            n2,
            density: None,
            amplitude: None,
        })
    }

    pub fn with_density(mut self, density: RSampler<T>) -> Self {
        self.density = Some(restrict_r(density, &self.domain));
        self
    }

    pub fn q(&self) -> CSampler<T> {
        self.q.clone()
    }

    pub fn n2(&self) -> CSampler<T> {
        self.n2.clone()
    }

    pub fn density(&self) -> Option<RSampler<T>> {
        self.density.clone()
    }

    pub fn amplitude(&self) -> Option<CSampler<T>> {
        self.amplitude.clone()
    }

    /// Run the design map on this medium: requires a density choice.
    pub fn design(&mut self) -> Result<()> {
        let n_choice = self.density.clone().ok_or_else(|| {
            CoreError::InvalidInput("design requires a number-density sampler N".into())
        })?;
        let (a, n) = recipe_i_design(&self.q, &n_choice, self.packing.p_max, &self.domain)?;
        self.amplitude = Some(a);
        self.density = Some(n);
        Ok(())
    }
}

/// `q(x) = k^2 (1 - n^2(x))`.
pub fn potential_from_refraction<T: Scalar>(n2: CSampler<T>, k: T) -> CSampler<T> {
    let k2 = k * k;
    Arc::new(move |x| {
        let one = Complex::new(T::one(), T::zero());
        (one - n2(x)) * k2
    })
}

/// `n^2(x) = 1 - q(x) / k^2`, the inverse of `potential_from_refraction`.
pub fn refraction_from_potential<T: Scalar>(q: CSampler<T>, k: T) -> CSampler<T> {
    let inv_k2 = T::one() / (k * k);
    Arc::new(move |x| {
        let one = Complex::new(T::one(), T::zero());
        one - q(x) * inv_k2
    })
}

/// Density floor below which the support is treated as empty.
fn support_floor<T: Scalar>() -> T {
    T::of(1e-300).max(T::min_positive_value())
}

/// Factor a target potential as `q = A N`: given the density choice `N`,
/// returns the amplitude sampler `A = q / N` (zero off the support) and the
/// validated density.
///
/// Validation samples both functions at the voxel centers of `domain`:
/// any point with `N >= p_max` fails the packing bound, and any point with
/// `q != 0` but `N = 0` has no scatterers to carry the potential.
pub fn recipe_i_design<T: Scalar>(
    q_target: &CSampler<T>,
    n_choice: &RSampler<T>,
    p_max: T,
    domain: &Domain<T>,
) -> Result<(CSampler<T>, RSampler<T>)> {
    let floor = support_floor::<T>();
    for flat in 0..domain.n_voxels() {
        let x = domain.voxel_center(domain.unflatten(flat));
        let n = n_choice(x);
        if n < T::zero() {
            return Err(CoreError::InvalidDensity {
                x: x[0].to_f64_lossy(),
                y: x[1].to_f64_lossy(),
                z: x[2].to_f64_lossy(),
                value: n.to_f64_lossy(),
            });
        }
        if n >= p_max {
            return Err(CoreError::PackingViolation {
                x: x[0].to_f64_lossy(),
                y: x[1].to_f64_lossy(),
                z: x[2].to_f64_lossy(),
                value: n.to_f64_lossy(),
                p_max: p_max.to_f64_lossy(),
            });
        }
        let qv = q_target(x);
        if n <= floor && qv.norm_sqr() > T::zero() {
            return Err(CoreError::DivisionByZeroSupport {
                x: x[0].to_f64_lossy(),
                y: x[1].to_f64_lossy(),
                z: x[2].to_f64_lossy(),
                q_abs: qv.norm_sqr().sqrt().to_f64_lossy(),
            });
        }
    }

    let q = q_target.clone();
    let n = n_choice.clone();
    let amplitude: CSampler<T> = Arc::new(move |x| {
        let nv = n(x);
        if nv > support_floor::<T>() {
            q(x) / nv
        } else {
            Complex::new(T::zero(), T::zero())
        }
    });
    Ok((amplitude, n_choice.clone()))
}

/// Passivity tolerance: `Im q <= tol` with `tol = 1e-12 k^2`.
pub fn passivity_tolerance<T: Scalar>(k: T) -> T {
    T::of(1e-12) * k * k
}

/// Scan the grid for points where the medium has gain (`Im q > tol`,
/// equivalently `Im n^2 < 0`). Empty output means a passive medium.
pub fn passivity_check<T: Scalar>(q: &CSampler<T>, grid: &Domain<T>, k: T) -> Vec<Point<T>> {
    let tol = passivity_tolerance(k);
    let mut out = Vec::new();
    for flat in 0..grid.n_voxels() {
        let x = grid.voxel_center(grid.unflatten(flat));
        if q(x).im > tol {
            out.push(x);
        }
    }
    out
}
