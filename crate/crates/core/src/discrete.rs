//! The exact M-body system: the field at the scatterer centers solves
//! `u_j + sum_{m != j} g_jm A_m V(a) u_m [+ self-term] = u0(x_j)`,
//! and the field anywhere in space follows from the center values through
//! the ball-kernel representation.

use num_complex::Complex;

use crate::error::{CoreError, Result};
use crate::geom::Point;
use crate::kernels::{ball_kernel, ball_volume};
use crate::linalg::{solve_dense, solve_iterative, DenseMatrix, LinOp, SolveReport};
use crate::medium::WaveContext;
use crate::operator::PointOperator;
use crate::placement::ScattererConfig;
use crate::scalar::{Cplx, Scalar};

/// Hard cap on dense storage; larger systems must go matrix-free.
pub const DENSE_HARD_CAP: usize = 20_000;
/// Auto policy switches to the matrix-free iterative path above this size.
pub const DENSE_AUTO_LIMIT: usize = 2_500;

/// `ka` above which assembly refuses outright.
pub const KA_REFUSE: f64 = 0.5;
/// `ka` above which assembly warns that the small-scatterer reduction is
/// getting strained.
pub const KA_WARN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StorageMode {
    Auto,
    Dense,
    MatrixFree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    Auto,
    DenseLu,
    Iterative,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions<T> {
    pub method: SolveMethod,
    pub tol_rel: T,
    pub max_iter: usize,
}

impl<T: Scalar> Default for SolveOptions<T> {
    fn default() -> Self {
        Self {
            method: SolveMethod::Auto,
            tol_rel: T::of(1e-10),
            max_iter: 2000,
        }
    }
}

/// Assembled M-body collocation system.
pub struct DiscreteSystem<T> {
    pub op: PointOperator<T>,
    pub rhs: Vec<Cplx<T>>,
    pub k: T,
    pub a: T,
    pub v_a: T,
    pub self_term: bool,
    dense: Option<DenseMatrix<T>>,
}

impl<T: Scalar> DiscreteSystem<T> {
    pub fn len(&self) -> usize {
        self.op.len()
    }

    pub fn is_empty(&self) -> bool {
        self.op.is_empty()
    }

    pub fn dense(&self) -> Option<&DenseMatrix<T>> {
        self.dense.as_ref()
    }

    /// Materialize the dense matrix (subject to the hard cap).
    pub fn ensure_dense(&mut self) -> Result<&DenseMatrix<T>> {
        if self.dense.is_none() {
            if self.len() > DENSE_HARD_CAP {
                return Err(CoreError::InvalidInput(format!(
                    "dense storage refused for M = {} > {}",
                    self.len(),
                    DENSE_HARD_CAP
                )));
            }
            self.dense = Some(self.op.to_dense());
        }
        Ok(self.dense.as_ref().unwrap())
    }
}

/// Field values at the scatterer centers, with solve diagnostics.
#[derive(Debug, Clone)]
pub struct CenterField<T> {
    pub values: Vec<Cplx<T>>,
    pub residual_inf: T,
    pub iterations: usize,
    pub method: &'static str,
    pub cond_estimate: Option<f64>,
}

/// Assemble the M-body system.
///
/// The diagonal is 1 without the self term; with it, `1 + A_j a^2 / 2`,
/// which is the ball's own Newtonian potential at its center divided by
/// `4 pi`. Off-diagonal entries are `g_jm A_m V(a)`.
pub fn assemble_discrete_system<T: Scalar>(
    config: &ScattererConfig<T>,
    ctx: &WaveContext<T>,
    self_term: bool,
) -> Result<DiscreteSystem<T>> {
    assemble_discrete_system_with(config, ctx, self_term, StorageMode::Auto)
}

pub fn assemble_discrete_system_with<T: Scalar>(
    config: &ScattererConfig<T>,
    ctx: &WaveContext<T>,
    self_term: bool,
    storage: StorageMode,
) -> Result<DiscreteSystem<T>> {
    let ka = (ctx.k * config.a).to_f64_lossy();
    if ka >= KA_REFUSE {
        return Err(CoreError::KaTooLarge { ka });
    }
    if ka >= KA_WARN {
        log::warn!("ka = {ka:.3} is large for the small-scatterer reduction (silent below {KA_WARN})");
    }
    config.verify_separation()?;

    let m = config.len();
    let v_a = ball_volume(config.a);
    let half = T::of(0.5);
    let weights: Vec<Cplx<T>> = config.amplitudes.iter().map(|a_m| *a_m * v_a).collect();
    let diag: Vec<Cplx<T>> = if self_term {
        config
            .amplitudes
            .iter()
            .map(|a_m| Complex::new(T::one(), T::zero()) + *a_m * (config.a * config.a * half))
            .collect()
    } else {
        vec![Complex::new(T::one(), T::zero()); m]
    };
    let op = PointOperator::new(ctx.k, &config.centers, weights, diag);
    let rhs: Vec<Cplx<T>> = config.centers.iter().map(|&x| ctx.incident(x)).collect();

    let mut system = DiscreteSystem {
        op,
        rhs,
        k: ctx.k,
        a: config.a,
        v_a,
        self_term,
        dense: None,
    };
    let want_dense = match storage {
        StorageMode::Dense => true,
        StorageMode::MatrixFree => false,
        StorageMode::Auto => m <= DENSE_AUTO_LIMIT,
    };
    if want_dense {
        system.ensure_dense()?;
    }
    Ok(system)
}

/// Solve the assembled system to the residual contract
/// `||A u - b||_inf <= tol ||b||_inf`.
pub fn solve_discrete<T: Scalar>(system: &mut DiscreteSystem<T>) -> Result<CenterField<T>> {
    solve_discrete_with(system, &SolveOptions::default())
}

pub fn solve_discrete_with<T: Scalar>(
    system: &mut DiscreteSystem<T>,
    opts: &SolveOptions<T>,
) -> Result<CenterField<T>> {
    if system.is_empty() {
        return Ok(CenterField {
            values: Vec::new(),
            residual_inf: T::zero(),
            iterations: 0,
            method: "empty",
            cond_estimate: None,
        });
    }
    let use_dense = match opts.method {
        SolveMethod::DenseLu => true,
        SolveMethod::Iterative => false,
        SolveMethod::Auto => system.len() <= DENSE_AUTO_LIMIT,
    };
    let report: SolveReport<T> = if use_dense {
        let matrix = system.ensure_dense()?.clone();
        let rhs = system.rhs.clone();
        solve_dense(matrix, &system.op, &rhs, opts.tol_rel)?
    } else {
        // Prefer the stored dense matrix for matvec speed when present.
        let rhs = system.rhs.clone();
        match system.dense() {
            Some(d) => solve_iterative(d as &dyn LinOp<T>, &rhs, opts.tol_rel, opts.max_iter)?,
            None => solve_iterative(&system.op, &rhs, opts.tol_rel, opts.max_iter)?,
        }
    };
    Ok(CenterField {
        values: report.solution,
        residual_inf: report.residual_inf,
        iterations: report.iterations,
        method: report.method,
        cond_estimate: report.cond_estimate,
    })
}

/// Evaluate the M-body field anywhere in space:
/// `u(x) = u0(x) - sum_m exp(ik|x - x_m|)/(4 pi) A_m u_m P(x, x_m, a)`
/// with `P` the ball Newtonian potential, whose interior branch makes the
/// expression valid inside the balls as well.
pub fn evaluate_field_discrete<T: Scalar>(
    x: Point<T>,
    config: &ScattererConfig<T>,
    field: &CenterField<T>,
    ctx: &WaveContext<T>,
) -> Cplx<T> {
    let mut acc = ctx.incident(x);
    for ((center, amp), u_m) in config
        .centers
        .iter()
        .zip(config.amplitudes.iter())
        .zip(field.values.iter())
    {
        acc = acc - ball_kernel(ctx.k, x, *center, config.a) * *amp * *u_m;
    }
    acc
}

/// Triangle-inequality bound on the scattered part at `x`:
/// `sum_m |A_m u_m| V(a) / (4 pi dist_m)`.
pub fn scattered_field_bound<T: Scalar>(
    x: Point<T>,
    config: &ScattererConfig<T>,
    field: &CenterField<T>,
) -> T {
    let inv_4pi = T::one() / (T::of(4.0) * T::PI());
    let v_a = config.v_a();
    let mut acc = T::zero();
    for ((center, amp), u_m) in config
        .centers
        .iter()
        .zip(config.amplitudes.iter())
        .zip(field.values.iter())
    {
        let dist = crate::geom::distance(x, *center);
        acc += (*amp * *u_m).norm_sqr().sqrt() * v_a * inv_4pi / dist.max(config.a);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Domain;
    use crate::linalg::inf_norm;
    use crate::medium::{constant_c, constant_r};
    use crate::placement::place_inhomogeneities;

    fn ctx(k: f64) -> WaveContext<f64> {
        WaveContext::new(k, [0.0, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn empty_config_gives_empty_system() {
        let cfg = ScattererConfig::<f64>::new(0.01, vec![], vec![]).unwrap();
        let mut sys = assemble_discrete_system(&cfg, &ctx(1.0), false).unwrap();
        let sol = solve_discrete(&mut sys).unwrap();
        assert!(sol.values.is_empty());
    }

    #[test]
    fn single_scatterer_without_self_term() {
        let cfg =
            ScattererConfig::new(0.05, vec![[0.2, 0.3, 0.4]], vec![Complex::new(2.0, 0.5)])
                .unwrap();
        let c = ctx(1.0);
        let mut sys = assemble_discrete_system(&cfg, &c, false).unwrap();
        let sol = solve_discrete(&mut sys).unwrap();
        let expected = c.incident([0.2, 0.3, 0.4]);
        assert!((sol.values[0] - expected).norm() < 1e-13);
    }

    #[test]
    fn single_scatterer_with_self_term() {
        // A = 1, a = 0.1: u = u0 / (1 + a^2/2) = u0 / 1.005.
        let cfg =
            ScattererConfig::new(0.1, vec![[0.0, 0.0, 0.0]], vec![Complex::new(1.0, 0.0)])
                .unwrap();
        let c = ctx(1.0);
        let mut sys = assemble_discrete_system(&cfg, &c, true).unwrap();
        let sol = solve_discrete(&mut sys).unwrap();
        let expected = c.incident([0.0; 3]) / Complex::new(1.005, 0.0);
        assert!((sol.values[0] - expected).norm() < 1e-13);
    }

    #[test]
    fn zero_amplitudes_reproduce_incident_field() {
        let d = Domain::<f64>::unit_cube(4);
        let cfg = place_inhomogeneities(&constant_r(0.1), 0.05, &d)
            .unwrap()
            .with_amplitudes_from(&constant_c(Complex::new(0.0, 0.0)));
        let c = ctx(1.0);
        let mut sys = assemble_discrete_system(&cfg, &c, false).unwrap();
        let sol = solve_discrete(&mut sys).unwrap();
        for (center, u) in cfg.centers.iter().zip(sol.values.iter()) {
            assert!((u - c.incident(*center)).norm() < 1e-12);
        }
        // Away from everything the field is exactly incident.
        let far = evaluate_field_discrete([5.0, 5.0, 5.0], &cfg, &sol, &c);
        assert!((far - c.incident([5.0, 5.0, 5.0])).norm() < 1e-12);
    }

    #[test]
    fn symmetric_pair_matches_explicit_2x2_solve() {
        // Equal scatterers straddling the plane alpha . x = 0.
        let amp = Complex::new(1.5, 0.2);
        let cfg = ScattererConfig::new(
            0.02,
            vec![[0.1, -0.2, -0.3], [0.1, -0.2, 0.3]],
            vec![amp; 2],
        )
        .unwrap();
        let c = ctx(1.3);
        let mut sys = assemble_discrete_system(&cfg, &c, false).unwrap();
        let sol = solve_discrete(&mut sys).unwrap();

        // Explicit 2x2 elimination.
        let g = crate::kernels::green(c.k, cfg.centers[0], cfg.centers[1]);
        let w = amp * cfg.v_a();
        let b0 = c.incident(cfg.centers[0]);
        let b1 = c.incident(cfg.centers[1]);
        let det = Complex::new(1.0, 0.0) - g * w * g * w;
        let u0 = (b0 - g * w * b1) / det;
        let u1 = (b1 - g * w * b0) / det;
        assert!((sol.values[0] - u0).norm() < 1e-12);
        assert!((sol.values[1] - u1).norm() < 1e-12);

        // The magnitudes agree up to the O(|w g|) phase asymmetry of the
        // outgoing kernel; the weak-coupling bound makes that tiny.
        let coupling = (g * w).norm();
        assert!(
            (sol.values[0].norm() - sol.values[1].norm()).abs() < 4.0 * coupling,
            "|u1| = {}, |u2| = {}",
            sol.values[0].norm(),
            sol.values[1].norm()
        );
    }

    #[test]
    fn transverse_symmetric_pair_is_exactly_equal() {
        // Mirror symmetry transverse to alpha maps the problem to itself,
        // so the two center values coincide exactly.
        let amp = Complex::new(1.5, 0.2);
        let cfg = ScattererConfig::new(
            0.02,
            vec![[-0.3, -0.2, 0.1], [0.3, -0.2, 0.1]],
            vec![amp; 2],
        )
        .unwrap();
        let c = ctx(1.3);
        let mut sys = assemble_discrete_system(&cfg, &c, false).unwrap();
        let sol = solve_discrete(&mut sys).unwrap();
        assert!((sol.values[0] - sol.values[1]).norm() < 1e-13);
    }

    #[test]
    fn residual_contract_and_solver_agreement() {
        let d = Domain::<f64>::unit_cube(4);
        let cfg = place_inhomogeneities(&constant_r(0.2), 0.06, &d)
            .unwrap()
            .with_amplitudes_from(&constant_c(Complex::new(0.8, -0.1)));
        let c = ctx(1.0);
        let mut sys = assemble_discrete_system(&cfg, &c, true).unwrap();
        let dense_sol = solve_discrete_with(
            &mut sys,
            &SolveOptions {
                method: SolveMethod::DenseLu,
                ..Default::default()
            },
        )
        .unwrap();
        let iter_sol = solve_discrete_with(
            &mut sys,
            &SolveOptions {
                method: SolveMethod::Iterative,
                ..Default::default()
            },
        )
        .unwrap();
        let b_norm = inf_norm(&sys.rhs);
        assert!(dense_sol.residual_inf <= 1e-10 * b_norm);
        assert!(iter_sol.residual_inf <= 1e-10 * b_norm);
        let mut worst: f64 = 0.0;
        for (a, b) in dense_sol.values.iter().zip(iter_sol.values.iter()) {
            worst = worst.max((a - b).norm() / a.norm().max(1e-30));
        }
        assert!(worst < 1e-8, "solver disagreement {worst:e}");
    }

    #[test]
    fn evaluation_at_center_consistent_with_solution() {
        let d = Domain::<f64>::unit_cube(4);
        let cfg = place_inhomogeneities(&constant_r(0.1), 0.05, &d)
            .unwrap()
            .with_amplitudes_from(&constant_c(Complex::new(1.0, 0.0)));
        let c = ctx(1.0);
        let mut sys = assemble_discrete_system(&cfg, &c, true).unwrap();
        let sol = solve_discrete(&mut sys).unwrap();
        // With the self term on, evaluating at a center reproduces the
        // center value: the m = j term is exactly the self-term.
        for j in [0usize, cfg.len() / 2, cfg.len() - 1] {
            let u = evaluate_field_discrete(cfg.centers[j], &cfg, &sol, &c);
            let rel = (u - sol.values[j]).norm() / sol.values[j].norm();
            assert!(rel < 1e-8, "center {j} rel err {rel:e}");
        }
    }

    #[test]
    fn far_field_bounded_by_triangle_inequality() {
        let d = Domain::<f64>::unit_cube(4);
        let cfg = place_inhomogeneities(&constant_r(0.1), 0.05, &d)
            .unwrap()
            .with_amplitudes_from(&constant_c(Complex::new(1.0, 0.0)));
        let c = ctx(1.0);
        let mut sys = assemble_discrete_system(&cfg, &c, false).unwrap();
        let sol = solve_discrete(&mut sys).unwrap();
        for x in [[3.0, 0.5, 0.5], [0.5, -2.0, 0.5], [0.5, 0.5, 4.0]] {
            let u = evaluate_field_discrete(x, &cfg, &sol, &c);
            let scattered = (u - c.incident(x)).norm();
            let bound = scattered_field_bound(x, &cfg, &sol);
            assert!(
                scattered <= bound * (1.0 + 1e-12),
                "|v| = {scattered}, bound = {bound}"
            );
        }
    }

    #[test]
    fn overlapping_centers_rejected_at_assembly() {
        let cfg = ScattererConfig {
            a: 0.05,
            centers: vec![[0.0; 3], [0.05, 0.0, 0.0]],
            amplitudes: vec![Complex::new(1.0, 0.0); 2],
        };
        assert!(matches!(
            assemble_discrete_system(&cfg, &ctx(1.0), false),
            Err(CoreError::OverlapError { .. })
        ));
    }

    #[test]
    fn large_ka_rejected() {
        let cfg =
            ScattererConfig::new(0.3, vec![[0.0; 3]], vec![Complex::new(1.0, 0.0)]).unwrap();
        assert!(matches!(
            assemble_discrete_system(&cfg, &ctx(2.0), false),
            Err(CoreError::KaTooLarge { .. })
        ));
    }

    #[test]
    fn self_term_perturbation_scales_quadratically() {
        // Fixed centers; the on/off field difference must scale like a^2.
        let d = Domain::<f64>::unit_cube(4);
        let base = place_inhomogeneities(&constant_r(0.1), 0.05, &d)
            .unwrap()
            .with_amplitudes_from(&constant_c(Complex::new(1.0, 0.0)));
        let c = ctx(1.0);
        let mut diffs = Vec::new();
        let mut radii = Vec::new();
        for factor in [1.0, 0.5, 0.25] {
            let a = 0.05 * factor;
            let cfg = ScattererConfig {
                a,
                centers: base.centers.clone(),
                amplitudes: base.amplitudes.clone(),
            };
            let mut off = assemble_discrete_system(&cfg, &c, false).unwrap();
            let mut on = assemble_discrete_system(&cfg, &c, true).unwrap();
            let sol_off = solve_discrete(&mut off).unwrap();
            let sol_on = solve_discrete(&mut on).unwrap();
            let diff = sol_off
                .values
                .iter()
                .zip(sol_on.values.iter())
                .map(|(x, y)| (x - y).norm())
                .fold(0.0f64, f64::max);
            diffs.push(diff);
            radii.push(a);
        }
        let slope = ((diffs[0] / diffs[2]).ln()) / ((radii[0] / radii[2]).ln());
        assert!(
            (1.7..=2.3).contains(&slope),
            "self-term slope {slope}, diffs {diffs:?}"
        );
    }
}
