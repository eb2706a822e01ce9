//! Scattering amplitudes and the physics sanity checks built on them.
//!
//! The far-zone expansion of the outgoing kernel turns both solved field
//! representations into the amplitude
//! `A(beta) = -(1/4pi) sum_m exp(-ik beta . y_m) w_m u_m`,
//! where the weights `w_m` are `A_m V(a)` for the M-body field and
//! `q_m h^3` for the voxel field.

use num_complex::Complex;

use crate::discrete::CenterField;
use crate::effective::{ComplexGridField, EffectiveSystem};
use crate::error::{CoreError, Result};
use crate::geom::{scale, Point};
use crate::kernels::far_phase;
use crate::medium::{CSampler, WaveContext};
use crate::placement::ScattererConfig;
use crate::quadrature::DirectionSet;
use crate::scalar::{Cplx, Scalar};

/// Scattering amplitude sampled on a set of observation directions.
#[derive(Debug, Clone)]
pub struct FarFieldPattern<T> {
    pub k: T,
    pub alpha: Point<T>,
    pub set: DirectionSet<T>,
    pub values: Vec<Cplx<T>>,
}

impl<T: Scalar> FarFieldPattern<T> {
    /// Value at the forward direction `beta = alpha`, if sampled.
    pub fn forward_value(&self) -> Option<Cplx<T>> {
        self.set.find(self.alpha).map(|i| self.values[i])
    }

    /// Weighted L2 norm over the sphere quadrature.
    pub fn l2_norm(&self) -> T {
        self.values
            .iter()
            .zip(self.set.weights.iter())
            .fold(T::zero(), |acc, (v, w)| acc + *w * v.norm_sqr())
            .sqrt()
    }
}

/// Amplitude from an arbitrary weighted point cloud.
pub fn far_field_points<T: Scalar>(
    k: T,
    alpha: Point<T>,
    points: &[Point<T>],
    weights: &[Cplx<T>],
    field: &[Cplx<T>],
    set: &DirectionSet<T>,
) -> FarFieldPattern<T> {
    let minus_inv_4pi = -T::one() / (T::of(4.0) * T::PI());
    let values = set
        .directions
        .iter()
        .map(|&beta| {
            let mut acc = Complex::new(T::zero(), T::zero());
            for ((y, w), u) in points.iter().zip(weights.iter()).zip(field.iter()) {
                acc = acc + far_phase(k, beta, *y) * *w * *u;
            }
            acc * minus_inv_4pi
        })
        .collect();
    FarFieldPattern {
        k,
        alpha,
        set: set.clone(),
        values,
    }
}

/// Amplitude of the solved M-body field.
pub fn far_field_discrete<T: Scalar>(
    config: &ScattererConfig<T>,
    field: &CenterField<T>,
    ctx: &WaveContext<T>,
    set: &DirectionSet<T>,
) -> FarFieldPattern<T> {
    let v_a = config.v_a();
    let weights: Vec<Cplx<T>> = config.amplitudes.iter().map(|a| *a * v_a).collect();
    far_field_points(
        ctx.k,
        ctx.alpha,
        &config.centers,
        &weights,
        &field.values,
        set,
    )
}

/// Amplitude of the solved voxel field.
pub fn far_field_effective<T: Scalar>(
    system: &EffectiveSystem<T>,
    field: &ComplexGridField<T>,
    ctx: &WaveContext<T>,
    set: &DirectionSet<T>,
) -> FarFieldPattern<T> {
    let h3 = system.grid.voxel_volume();
    let centers = system.grid.centers();
    let weights: Vec<Cplx<T>> = system.q_values.iter().map(|q| *q * h3).collect();
    far_field_points(ctx.k, ctx.alpha, &centers, &weights, &field.values, set)
}

/// Single-direction amplitude (no quadrature needed).
pub fn far_field_value<T: Scalar>(
    k: T,
    points: &[Point<T>],
    weights: &[Cplx<T>],
    field: &[Cplx<T>],
    beta: Point<T>,
) -> Cplx<T> {
    let minus_inv_4pi = -T::one() / (T::of(4.0) * T::PI());
    let mut acc = Complex::new(T::zero(), T::zero());
    for ((y, w), u) in points.iter().zip(weights.iter()).zip(field.iter()) {
        acc = acc + far_phase(k, beta, *y) * *w * *u;
    }
    acc * minus_inv_4pi
}

/// Whether the medium is expected to conserve or absorb energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MediumLoss {
    /// Real potential: the optical theorem holds with equality.
    Lossless,
    /// `Im q <= 0` somewhere: forward absorption exceeds total scattering.
    Absorbing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpticalVerdict {
    EqualityOk,
    InequalityOk,
    Violated,
}

#[derive(Debug, Clone, Copy)]
pub struct OpticalTheoremReport<T> {
    /// `Im A(alpha, alpha)`.
    pub lhs: T,
    /// `(k / 4 pi) integral over S^2 of |A|^2`.
    pub rhs: T,
    pub verdict: OpticalVerdict,
    /// Relative scale used for the comparison.
    pub scale: T,
}

/// Unitarity check: forward-amplitude imaginary part against total
/// scattered power. Equality for lossless media, `lhs >= rhs` with
/// absorption.
pub fn optical_theorem_check<T: Scalar>(
    pattern: &FarFieldPattern<T>,
    loss: MediumLoss,
    tol: T,
) -> Result<OpticalTheoremReport<T>> {
    let forward = pattern
        .forward_value()
        .ok_or(CoreError::MissingForwardDirection)?;
    let lhs = forward.im;
    let k_over_4pi = pattern.k / (T::of(4.0) * T::PI());
    let integral = pattern
        .values
        .iter()
        .zip(pattern.set.weights.iter())
        .fold(T::zero(), |acc, (v, w)| acc + *w * v.norm_sqr());
    let rhs = k_over_4pi * integral;
    let scale = lhs.abs().max(rhs.abs()).max(T::of(1e-14));
    let verdict = match loss {
        MediumLoss::Lossless => {
            if (lhs - rhs).abs() <= tol * scale {
                OpticalVerdict::EqualityOk
            } else {
                OpticalVerdict::Violated
            }
        }
        MediumLoss::Absorbing => {
            if lhs >= rhs - tol * scale {
                OpticalVerdict::InequalityOk
            } else {
                OpticalVerdict::Violated
            }
        }
    };
    Ok(OpticalTheoremReport {
        lhs,
        rhs,
        verdict,
        scale,
    })
}

/// Default relative tolerance for the optical-theorem equality; set by the
/// sphere-quadrature resolution, not by the solver.
pub fn default_ot_tol<T: Scalar>() -> T {
    T::of(1e-2)
}

/// Reciprocity: `A(beta, alpha) = A(-alpha, -beta)`. Returns the largest
/// relative discrepancy over the given direction pairs (two forward solves
/// per pair).
pub fn reciprocity_check<T: Scalar>(
    q: &CSampler<T>,
    grid: &crate::geom::Domain<T>,
    k: T,
    pairs: &[(Point<T>, Point<T>)],
) -> Result<T> {
    use crate::effective::{assemble_ls_system, solve_effective};
    let mut worst = T::zero();
    for &(alpha, beta) in pairs {
        let ctx_fwd = WaveContext::new(k, alpha)?;
        let mut sys_fwd = assemble_ls_system(q, grid, &ctx_fwd)?;
        let sol_fwd = solve_effective(&mut sys_fwd)?;
        let h3 = grid.voxel_volume();
        let centers = grid.centers();
        let weights: Vec<Cplx<T>> = sys_fwd.q_values.iter().map(|qv| *qv * h3).collect();
        let a_fwd = far_field_value(k, &centers, &weights, &sol_fwd.field.values, beta);

        let ctx_rev = WaveContext::new(k, scale(beta, -T::one()))?;
        let mut sys_rev = assemble_ls_system(q, grid, &ctx_rev)?;
        let sol_rev = solve_effective(&mut sys_rev)?;
        let a_rev = far_field_value(
            k,
            &centers,
            &weights,
            &sol_rev.field.values,
            scale(alpha, -T::one()),
        );

        let denom = a_fwd.norm_sqr().sqrt().max(a_rev.norm_sqr().sqrt()).max(T::of(1e-14));
        let rel = (a_fwd - a_rev).norm_sqr().sqrt() / denom;
        worst = worst.max(rel);
    }
    Ok(worst)
}
