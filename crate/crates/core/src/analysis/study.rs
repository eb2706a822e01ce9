//! The central convergence experiment: as the ball radius shrinks with the
//! count law fixed, the M-body field approaches the solution of the
//! limiting integral equation. Also the particle-count comparison between
//! the volume-law recipe and the surface-impedance recipe.

use std::time::Instant;

use crate::discrete::{assemble_discrete_system_with, solve_discrete_with, SolveOptions, StorageMode};
use crate::effective::{assemble_ls_system, evaluate_field_effective, solve_effective_with};
use crate::error::{CoreError, Result};
use crate::geom::{add, scale, Domain, Point};
use crate::kernels::ball_volume;
use crate::medium::{recipe_i_design, CSampler, RSampler, WaveContext};
use crate::placement::{place_inhomogeneities_with, PlacementMode, PlacementOptions};
use crate::quadrature::fibonacci_sphere;
use crate::scalar::Scalar;

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_loglog_slope<T: Scalar>(xs: &[T], ys: &[T]) -> T {
    assert_eq!(xs.len(), ys.len());
    let n = T::of_usize(xs.len());
    let (mut sx, mut sy, mut sxx, mut sxy) = (T::zero(), T::zero(), T::zero(), T::zero());
    for (x, y) in xs.iter().zip(ys.iter()) {
        let lx = x.ln();
        let ly = y.max(T::of(1e-300)).ln();
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Probe ring outside the domain at distance >= 1/k from its boundary.
pub fn standard_probes<T: Scalar>(domain: &Domain<T>, k: T, count: usize) -> Vec<Point<T>> {
    let lo = domain.lo();
    let hi = domain.hi();
    let center = scale(add(lo, hi), T::of(0.5));
    let e = domain.edge_lengths();
    let half_diag = (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt() * T::of(0.5);
    let radius = half_diag * T::of(1.05) + T::of(1.25) / k;
    fibonacci_sphere(count)
        .into_iter()
        .map(|d| add(center, scale(d, radius)))
        .collect()
}

#[derive(Clone)]
pub struct ConvergenceStudyConfig<T> {
    pub q: CSampler<T>,
    pub density: RSampler<T>,
    pub p_max: T,
    pub ctx: WaveContext<T>,
    pub domain: Domain<T>,
    /// Strictly decreasing ball radii.
    pub a_sequence: Vec<T>,
    /// Observation points; empty selects the standard outside ring.
    pub probes: Vec<Point<T>>,
    /// Voxel resolution for the limiting-equation reference solve.
    pub effective_nvox: [usize; 3],
    pub self_term: bool,
    pub placement: PlacementMode,
    pub solve: SolveOptions<T>,
}

impl<T: Scalar> ConvergenceStudyConfig<T> {
    pub fn new(
        q: CSampler<T>,
        density: RSampler<T>,
        ctx: WaveContext<T>,
        domain: Domain<T>,
        a_sequence: Vec<T>,
    ) -> Self {
        Self {
            q,
            density,
            p_max: T::of(crate::medium::DEFAULT_P_MAX),
            ctx,
            domain,
            a_sequence,
            probes: Vec::new(),
            effective_nvox: [16, 16, 16],
            self_term: false,
            placement: PlacementMode::CenteredPrefix,
            solve: SolveOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConvergenceRow<T> {
    pub a: T,
    pub m: usize,
    /// Sup over probes of |u_M - u_e|.
    pub sup_err: T,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport<T> {
    pub rows: Vec<ConvergenceRow<T>>,
    /// Fitted log-log slope of the discrepancy against the radius.
    pub slope: T,
    /// Scattered-field scale `max over probes |u_e - u0|` used for
    /// relative statements about the final discrepancy.
    pub err_scale: T,
    pub probes: Vec<Point<T>>,
}

impl<T: Scalar> ConvergenceReport<T> {
    pub fn final_relative_error(&self) -> T {
        match self.rows.last() {
            Some(row) if self.err_scale > T::zero() => row.sup_err / self.err_scale,
            _ => T::zero(),
        }
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].sup_err < w[0].sup_err)
    }
}

/// Run the study: design the material once, solve the limiting equation
/// once, then sweep the radius sequence.
pub fn convergence_study<T: Scalar>(
    cfg: &ConvergenceStudyConfig<T>,
) -> Result<ConvergenceReport<T>> {
    if cfg.a_sequence.is_empty() {
        return Err(CoreError::InvalidInput("empty radius sequence".into()));
    }
    for w in cfg.a_sequence.windows(2) {
        if !(w[1] < w[0]) {
            return Err(CoreError::InvalidInput(
                "radius sequence must be strictly decreasing".into(),
            ));
        }
    }
    let (amplitude, density) =
        recipe_i_design(&cfg.q, &cfg.density, cfg.p_max, &cfg.domain)?;

    let probes = if cfg.probes.is_empty() {
        standard_probes(&cfg.domain, cfg.ctx.k, 26)
    } else {
        cfg.probes.clone()
    };

    // Reference: the limiting field on the voxel grid, evaluated at probes
    // through the integral representation.
    let eff_grid = cfg.domain.with_nvox(cfg.effective_nvox)?;
    let mut eff_sys = assemble_ls_system(&cfg.q, &eff_grid, &cfg.ctx)?;
    let eff_sol = solve_effective_with(&mut eff_sys, &cfg.solve)?;
    let u_e: Vec<_> = probes
        .iter()
        .map(|&x| evaluate_field_effective(x, &eff_sys, &eff_sol.field, &cfg.ctx))
        .collect();
    let err_scale = probes
        .iter()
        .zip(u_e.iter())
        .map(|(&x, ue)| (*ue - cfg.ctx.incident(x)).norm_sqr())
        .fold(T::zero(), |m, s| m.max(s))
        .sqrt();

    let placement_opts = PlacementOptions {
        p_max: cfg.p_max,
        mode: cfg.placement,
    };
    let mut rows = Vec::with_capacity(cfg.a_sequence.len());
    for &a in &cfg.a_sequence {
        let start = Instant::now();
        let config = place_inhomogeneities_with(&density, a, &cfg.domain, &placement_opts)?
            .with_amplitudes_from(&amplitude);
        let mut system =
            assemble_discrete_system_with(&config, &cfg.ctx, cfg.self_term, StorageMode::Auto)?;
        let sol = solve_discrete_with(&mut system, &cfg.solve)?;
        let sup_err = probes
            .iter()
            .zip(u_e.iter())
            .map(|(&x, ue)| {
                let um = crate::discrete::evaluate_field_discrete(x, &config, &sol, &cfg.ctx);
                (um - *ue).norm_sqr()
            })
            .fold(T::zero(), |m, s| m.max(s))
            .sqrt();
        rows.push(ConvergenceRow {
            a,
            m: config.len(),
            sup_err,
            seconds: start.elapsed().as_secs_f64(),
        });
    }

    let slope = if rows.len() >= 2 {
        let xs: Vec<T> = rows.iter().map(|r| r.a).collect();
        let ys: Vec<T> = rows.iter().map(|r| r.sup_err).collect();
        fit_loglog_slope(&xs, &ys)
    } else {
        T::zero()
    };
    Ok(ConvergenceReport {
        rows,
        slope,
        err_scale,
        probes,
    })
}

/// Count comparison between the two material recipes at radius `a`:
/// `M1 = N |D| / V(a)` small-ball inhomogeneities against
/// `M2 = N |D| / a^(2 - kappa)` impedance particles.
#[derive(Debug, Clone, Copy)]
pub struct CountComparison<T> {
    pub m1: T,
    pub m2: T,
    pub ratio: T,
}

pub fn recipe_count_compare<T: Scalar>(
    a: T,
    kappa: T,
    n_level: T,
    domain: &Domain<T>,
) -> Result<CountComparison<T>> {
    if !(kappa > T::zero() && kappa <= T::one()) {
        return Err(CoreError::InvalidKappa {
            kappa: kappa.to_f64_lossy(),
        });
    }
    if !(a > T::zero()) {
        return Err(CoreError::InvalidInput("radius must be positive".into()));
    }
    let volume = domain.volume();
    let m1 = n_level * volume / ball_volume(a);
    let m2 = n_level * volume / a.powf(T::of(2.0) - kappa);
    Ok(CountComparison {
        m1,
        m2,
        ratio: m1 / m2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::medium::{constant_c, constant_r};
    use num_complex::Complex;

    #[test]
    fn count_comparison_example_values() {
        let d = Domain::<f64>::unit_cube(1);
        let c = recipe_count_compare(0.1, 1.0, 0.3, &d).unwrap();
        assert!((c.m1 - 0.3 / ball_volume(0.1)).abs() < 1e-9);
        assert!((c.m1 - 71.6197).abs() < 1e-3);
        assert!((c.m2 - 3.0).abs() < 1e-12);
        assert!((c.ratio - 23.8732).abs() < 1e-3);
    }

    #[test]
    fn count_ratio_grows_by_power_of_two_under_halving() {
        let d = Domain::<f64>::unit_cube(1);
        for kappa in [0.5, 1.0] {
            let r1 = recipe_count_compare(0.1, kappa, 0.3, &d).unwrap().ratio;
            let r2 = recipe_count_compare(0.05, kappa, 0.3, &d).unwrap().ratio;
            let expected = 2.0f64.powf(1.0 + kappa);
            assert!(
                ((r2 / r1) / expected - 1.0).abs() < 1e-12,
                "kappa {kappa}: growth {}",
                r2 / r1
            );
        }
    }

    #[test]
    fn count_comparison_at_unit_radius() {
        // ratio = 3 / (4 pi a^(1 + kappa)); at a = 1, kappa = 1 this is
        // below one: the asymptotic advantage only sets in as a shrinks.
        let d = Domain::<f64>::unit_cube(1);
        let c = recipe_count_compare(1.0, 1.0, 0.3, &d).unwrap();
        assert!((c.ratio - 3.0 / (4.0 * std::f64::consts::PI)).abs() < 1e-12);
        assert!(c.ratio < 1.0);
    }

    #[test]
    fn invalid_kappa_rejected() {
        let d = Domain::<f64>::unit_cube(1);
        assert!(matches!(
            recipe_count_compare(0.1, 0.0, 0.3, &d),
            Err(CoreError::InvalidKappa { .. })
        ));
        assert!(matches!(
            recipe_count_compare(0.1, 1.5, 0.3, &d),
            Err(CoreError::InvalidKappa { .. })
        ));
    }

    #[test]
    fn loglog_slope_of_power_law() {
        let xs = [0.04, 0.02, 0.01];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x * x).collect();
        let slope = fit_loglog_slope(&xs, &ys);
        assert!((slope - 2.0).abs() < 1e-12);
    }

    #[test]
    fn probes_sit_outside_at_wavelength_distance() {
        let d = Domain::<f64>::unit_cube(4);
        let probes = standard_probes(&d, 1.0, 26);
        assert_eq!(probes.len(), 26);
        for p in &probes {
            assert!(!d.contains(*p));
            // Distance to the box is at least 1/k.
            let mut dist2 = 0.0f64;
            for i in 0..3 {
                let lo = d.lo()[i];
                let hi = d.hi()[i];
                let c = p[i].clamp(lo, hi);
                dist2 += (p[i] - c) * (p[i] - c);
            }
            assert!(dist2.sqrt() >= 1.0, "probe too close: {p:?}");
        }
    }

    #[test]
    fn zero_potential_study_has_zero_discrepancy() {
        let domain = Domain::<f64>::unit_cube(4);
        let ctx = WaveContext::new(1.0, [0.0, 0.0, 1.0]).unwrap();
        let cfg = ConvergenceStudyConfig {
            effective_nvox: [4, 4, 4],
            ..ConvergenceStudyConfig::new(
                constant_c(Complex::new(0.0, 0.0)),
                constant_r(0.1),
                ctx,
                domain,
                vec![0.05, 0.04],
            )
        };
        let report = convergence_study(&cfg).unwrap();
        for row in &report.rows {
            assert!(row.sup_err < 1e-12, "a = {}: err {}", row.a, row.sup_err);
        }
        assert!(report.err_scale < 1e-12);
    }

    #[test]
    fn radius_sequence_must_decrease() {
        let domain = Domain::<f64>::unit_cube(4);
        let ctx = WaveContext::new(1.0, [0.0, 0.0, 1.0]).unwrap();
        let cfg = ConvergenceStudyConfig::new(
            constant_c(Complex::new(0.1, 0.0)),
            constant_r(0.1),
            ctx,
            domain,
            vec![0.02, 0.04],
        );
        assert!(convergence_study(&cfg).is_err());
    }
}
