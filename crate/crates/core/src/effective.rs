//! Collocation solver for the limiting volume integral equation
//! `u(x) = u0(x) - integral over D of g(x, y) q(y) u(y) dy`
//! on the voxel grid, plus the truncated Neumann (Born) series used as an
//! independent oracle for weak potentials.

use num_complex::Complex;

use crate::discrete::{SolveMethod, SolveOptions, DENSE_AUTO_LIMIT, DENSE_HARD_CAP};
use crate::error::{CoreError, Result};
use crate::geom::{Domain, Point};
use crate::kernels::{ball_kernel, equal_volume_radius};
use crate::linalg::{solve_dense, solve_iterative, DenseMatrix, LinOp};
use crate::medium::{CSampler, WaveContext};
use crate::operator::PointOperator;
use crate::scalar::{Cplx, Scalar};

/// `kh` at which assembly refuses; the voxel grid cannot represent the
/// oscillation at all beyond this.
pub const KH_REFUSE: f64 = 1.0;
/// `kh` above which a resolution warning is logged.
pub const KH_WARN: f64 = 0.5;

/// Complex field sampled at the voxel centers of a grid.
#[derive(Debug, Clone)]
pub struct ComplexGridField<T> {
    pub grid: Domain<T>,
    pub values: Vec<Cplx<T>>,
}

impl<T: Scalar> ComplexGridField<T> {
    pub fn new(grid: Domain<T>, values: Vec<Cplx<T>>) -> Result<Self> {
        if values.len() != grid.n_voxels() {
            return Err(CoreError::InvalidInput(format!(
                "field length {} does not match voxel count {}",
                values.len(),
                grid.n_voxels()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn sup_norm(&self) -> T {
        self.values
            .iter()
            .map(|z| z.norm_sqr())
            .fold(T::zero(), |m, s| m.max(s))
            .sqrt()
    }
}

/// Assembled collocation system for the limiting equation.
pub struct EffectiveSystem<T> {
    pub grid: Domain<T>,
    pub q_values: Vec<Cplx<T>>,
    pub k: T,
    /// Radius of the ball with the voxel's volume; the singular diagonal
    /// uses its exact interior Newtonian potential.
    pub a_cell: T,
    /// Diagonal self-interaction weight `a_cell^2 / 2`.
    pub w_diag: T,
    pub op: PointOperator<T>,
    pub rhs: Vec<Cplx<T>>,
    dense: Option<DenseMatrix<T>>,
}

impl<T: Scalar> EffectiveSystem<T> {
    pub fn n(&self) -> usize {
        self.op.len()
    }

    pub fn dense(&self) -> Option<&DenseMatrix<T>> {
        self.dense.as_ref()
    }

    pub fn ensure_dense(&mut self) -> Result<&DenseMatrix<T>> {
        if self.dense.is_none() {
            if self.n() > DENSE_HARD_CAP {
                return Err(CoreError::InvalidInput(format!(
                    "dense storage refused for n = {} > {}",
                    self.n(),
                    DENSE_HARD_CAP
                )));
            }
            self.dense = Some(self.op.to_dense());
        }
        Ok(self.dense.as_ref().unwrap())
    }
}

/// Solution of the effective equation with solve diagnostics.
#[derive(Debug, Clone)]
pub struct EffectiveSolution<T> {
    pub field: ComplexGridField<T>,
    pub residual_inf: T,
    pub iterations: usize,
    pub method: &'static str,
    pub cond_estimate: Option<f64>,
}

/// Collocate the integral equation at the voxel centers: off-diagonal
/// entries `g_jm q_m h^3`, diagonal `1 + q_j a_cell^2 / 2` from replacing
/// the voxel by the equal-volume ball and using the exact interior value
/// of its Newtonian potential.
pub fn assemble_ls_system<T: Scalar>(
    q: &CSampler<T>,
    grid: &Domain<T>,
    ctx: &WaveContext<T>,
) -> Result<EffectiveSystem<T>> {
    let kh = (ctx.k * grid.max_voxel_edge()).to_f64_lossy();
    if kh >= KH_REFUSE {
        return Err(CoreError::ResolutionError { kh });
    }
    if kh >= KH_WARN {
        log::warn!("kh = {kh:.3} resolves the wavelength marginally; expect degraded accuracy");
    }
    let centers = grid.centers();
    let h3 = grid.voxel_volume();
    let a_cell = equal_volume_radius(h3);
    let w_diag = a_cell * a_cell * T::of(0.5);

    let q_values: Vec<Cplx<T>> = centers.iter().map(|&x| q(x)).collect();
    let weights: Vec<Cplx<T>> = q_values.iter().map(|qv| *qv * h3).collect();
    let one = Complex::new(T::one(), T::zero());
    let diag: Vec<Cplx<T>> = q_values.iter().map(|qv| one + *qv * w_diag).collect();
    let rhs: Vec<Cplx<T>> = centers.iter().map(|&x| ctx.incident(x)).collect();
    let op = PointOperator::new(ctx.k, &centers, weights, diag);

    Ok(EffectiveSystem {
        grid: grid.clone(),
        q_values,
        k: ctx.k,
        a_cell,
        w_diag,
        op,
        rhs,
        dense: None,
    })
}

/// Solve to the residual contract `||A u - b||_inf <= tol ||b||_inf`.
pub fn solve_effective<T: Scalar>(system: &mut EffectiveSystem<T>) -> Result<EffectiveSolution<T>> {
    solve_effective_with(system, &SolveOptions::default())
}

pub fn solve_effective_with<T: Scalar>(
    system: &mut EffectiveSystem<T>,
    opts: &SolveOptions<T>,
) -> Result<EffectiveSolution<T>> {
    let use_dense = match opts.method {
        SolveMethod::DenseLu => true,
        SolveMethod::Iterative => false,
        SolveMethod::Auto => system.n() <= DENSE_AUTO_LIMIT,
    };
    let report = if use_dense {
        let matrix = system.ensure_dense()?.clone();
        let rhs = system.rhs.clone();
        solve_dense(matrix, &system.op, &rhs, opts.tol_rel)?
    } else {
        let rhs = system.rhs.clone();
        match system.dense() {
            Some(d) => solve_iterative(d as &dyn LinOp<T>, &rhs, opts.tol_rel, opts.max_iter)?,
            None => solve_iterative(&system.op, &rhs, opts.tol_rel, opts.max_iter)?,
        }
    };
    Ok(EffectiveSolution {
        field: ComplexGridField::new(system.grid.clone(), report.solution)?,
        residual_inf: report.residual_inf,
        iterations: report.iterations,
        method: report.method,
        cond_estimate: report.cond_estimate,
    })
}

/// Truncated Neumann series for the integral equation.
#[derive(Debug, Clone)]
pub struct BornOutcome<T> {
    pub field: ComplexGridField<T>,
    /// Infinity-norm bound on the coupling operator; a value at or above
    /// one means the series may diverge (logged as a warning).
    pub coupling_norm: T,
    pub diverging: bool,
}

/// `u = sum_{j < n_terms} (-G q)^j u0`; one term returns the incident
/// field. The coupling-norm heuristic flags likely divergence.
pub fn born_series<T: Scalar>(
    q: &CSampler<T>,
    grid: &Domain<T>,
    ctx: &WaveContext<T>,
    n_terms: usize,
) -> Result<BornOutcome<T>> {
    if n_terms == 0 {
        return Err(CoreError::InvalidInput(
            "born_series needs at least one term".into(),
        ));
    }
    let system = assemble_ls_system(q, grid, ctx)?;
    let coupling = system.op.coupling_norm();
    let diverging = coupling >= T::one();
    if diverging {
        log::warn!(
            "born series coupling norm {coupling} >= 1: truncated series may diverge"
        );
    }
    let n = system.n();
    let mut u = system.rhs.clone();
    let mut au = vec![Complex::new(T::zero(), T::zero()); n];
    for _ in 1..n_terms {
        // u_{next} = u0 - (A - I) u = u0 - G q u.
        system.op.apply(&u, &mut au);
        for i in 0..n {
            u[i] = system.rhs[i] - (au[i] - u[i]);
        }
    }
    Ok(BornOutcome {
        field: ComplexGridField::new(system.grid.clone(), u)?,
        coupling_norm: coupling,
        diverging,
    })
}

/// Pointwise PDE residual diagnostic: max over interior voxels of
/// `|Laplacian_h u + k^2 u - q u|` with the 7-point finite-difference
/// Laplacian. Reported, not thresholded: it carries both the O(h^2)
/// truncation error and the collocation error of the field itself.
pub fn residual_check<T: Scalar>(
    field: &ComplexGridField<T>,
    q: &CSampler<T>,
    ctx: &WaveContext<T>,
) -> Result<T> {
    let grid = &field.grid;
    let n = grid.nvox();
    if n.iter().any(|&c| c < 3) {
        return Err(CoreError::GridTooSmall { needed: 3, got: n });
    }
    let h = grid.voxel_size();
    let inv_h2 = [
        T::one() / (h[0] * h[0]),
        T::one() / (h[1] * h[1]),
        T::one() / (h[2] * h[2]),
    ];
    let k2 = ctx.k * ctx.k;
    let mut worst = T::zero();
    for i in 1..n[0] - 1 {
        for j in 1..n[1] - 1 {
            for l in 1..n[2] - 1 {
                let c = field.values[grid.flat_index([i, j, l])];
                let mut lap = Complex::new(T::zero(), T::zero());
                let neighbors = [
                    ([i - 1, j, l], [i + 1, j, l], inv_h2[0]),
                    ([i, j - 1, l], [i, j + 1, l], inv_h2[1]),
                    ([i, j, l - 1], [i, j, l + 1], inv_h2[2]),
                ];
                for (lo, hi, w) in neighbors {
                    let ul = field.values[grid.flat_index(lo)];
                    let uh = field.values[grid.flat_index(hi)];
                    lap = lap + (ul + uh - c - c) * w;
                }
                let x = grid.voxel_center([i, j, l]);
                let res = lap + c * k2 - q(x) * c;
                worst = worst.max(res.norm_sqr());
            }
        }
    }
    Ok(worst.sqrt())
}

/// Evaluate the effective field anywhere through its integral
/// representation; voxels are replaced by equal-volume balls so the
/// expression stays finite arbitrarily close to (and inside) voxels.
pub fn evaluate_field_effective<T: Scalar>(
    x: Point<T>,
    system: &EffectiveSystem<T>,
    field: &ComplexGridField<T>,
    ctx: &WaveContext<T>,
) -> Cplx<T> {
    let centers = field.grid.centers();
    let mut acc = ctx.incident(x);
    for ((center, qv), u) in centers
        .iter()
        .zip(system.q_values.iter())
        .zip(field.values.iter())
    {
        acc = acc - ball_kernel(system.k, x, *center, system.a_cell) * *qv * *u;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::medium::constant_c;

    fn ctx(k: f64) -> WaveContext<f64> {
        WaveContext::new(k, [0.0, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn zero_potential_gives_identity_and_incident_field() {
        let grid = Domain::<f64>::unit_cube(4);
        let q = constant_c(Complex::new(0.0, 0.0));
        let c = ctx(1.0);
        let mut sys = assemble_ls_system(&q, &grid, &c).unwrap();
        let n = sys.n();
        let dense = sys.ensure_dense().unwrap();
        for i in 0..n {
            for j in 0..n {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((dense.get(i, j) - Complex::new(expected, 0.0)).norm() < 1e-15);
            }
        }
        let sol = solve_effective(&mut sys).unwrap();
        for (center, u) in grid.centers().iter().zip(sol.field.values.iter()) {
            assert!((u - c.incident(*center)).norm() < 1e-14);
        }
    }

    #[test]
    fn single_voxel_scalar_system() {
        let grid = Domain::<f64>::new([0.0; 3], [0.5; 3], [1, 1, 1]).unwrap();
        let qv = Complex::new(0.3, -0.05);
        let q = constant_c(qv);
        let c = ctx(1.0);
        let mut sys = assemble_ls_system(&q, &grid, &c).unwrap();
        let sol = solve_effective(&mut sys).unwrap();
        let a_cell = equal_volume_radius(0.125f64);
        let denom = Complex::new(1.0, 0.0) + qv * (a_cell * a_cell / 2.0);
        let expected = c.incident([0.25; 3]) / denom;
        assert!((sol.field.values[0] - expected).norm() < 1e-13);
    }

    #[test]
    fn two_voxel_entries_match_hand_formula() {
        let grid = Domain::<f64>::new([0.0; 3], [0.2, 0.2, 0.4], [1, 1, 2]).unwrap();
        let qv = Complex::new(0.4, 0.0);
        let q = constant_c(qv);
        let c = ctx(1.0);
        let mut sys = assemble_ls_system(&q, &grid, &c).unwrap();
        let dense = sys.ensure_dense().unwrap();
        let h3 = 0.2 * 0.2 * 0.2;
        let centers = grid.centers();
        let g = crate::kernels::green(1.0, centers[0], centers[1]);
        let expected = g * qv * h3;
        assert!((dense.get(0, 1) - expected).norm() < 1e-15);
        assert!((dense.get(1, 0) - expected).norm() < 1e-15);
        let a_cell = equal_volume_radius(h3);
        let d = Complex::new(1.0, 0.0) + qv * (a_cell * a_cell / 2.0);
        assert!((dense.get(0, 0) - d).norm() < 1e-15);
    }

    #[test]
    fn born_one_term_is_incident() {
        let grid = Domain::<f64>::unit_cube(3);
        let q = constant_c(Complex::new(0.5, 0.0));
        let c = ctx(1.0);
        let out = born_series(&q, &grid, &c, 1).unwrap();
        for (center, u) in grid.centers().iter().zip(out.field.values.iter()) {
            assert!((u - c.incident(*center)).norm() < 1e-15);
        }
        assert!(!out.diverging);
    }

    #[test]
    fn born_zero_potential_any_terms() {
        let grid = Domain::<f64>::unit_cube(3);
        let q = constant_c(Complex::new(0.0, 0.0));
        let c = ctx(1.0);
        let out = born_series(&q, &grid, &c, 5).unwrap();
        for (center, u) in grid.centers().iter().zip(out.field.values.iter()) {
            assert!((u - c.incident(*center)).norm() < 1e-14);
        }
    }

    #[test]
    fn resolution_error_at_coarse_grid() {
        let grid = Domain::<f64>::new([0.0; 3], [10.0; 3], [2, 2, 2]).unwrap();
        let q = constant_c(Complex::new(0.1, 0.0));
        assert!(matches!(
            assemble_ls_system(&q, &grid, &ctx(1.0)),
            Err(CoreError::ResolutionError { .. })
        ));
    }

    #[test]
    fn residual_check_needs_three_voxels() {
        let grid = Domain::<f64>::unit_cube(2);
        let q = constant_c(Complex::new(0.0, 0.0));
        let c = ctx(1.0);
        let field = ComplexGridField::new(
            grid.clone(),
            grid.centers().iter().map(|&x| c.incident(x)).collect(),
        )
        .unwrap();
        assert!(matches!(
            residual_check(&field, &q, &c),
            Err(CoreError::GridTooSmall { .. })
        ));
    }

    #[test]
    fn residual_of_incident_field_matches_fd_truncation() {
        // For u = exp(ik alpha . x) and q = 0 the residual is purely the
        // finite-difference truncation of the Laplacian, computable in
        // closed form: |k^2 - sum_d 2 (1 - cos(k alpha_d h)) / h^2|.
        let grid = Domain::<f64>::unit_cube(8);
        let q = constant_c(Complex::new(0.0, 0.0));
        let c = ctx(1.2);
        let field = ComplexGridField::new(
            grid.clone(),
            grid.centers().iter().map(|&x| c.incident(x)).collect(),
        )
        .unwrap();
        let got = residual_check(&field, &q, &c).unwrap();
        let h = grid.voxel_size()[0];
        let analytic = (c.k * c.k - 2.0 * (1.0 - (c.k * h).cos()) / (h * h)).abs();
        assert!(
            got >= analytic / 2.0 && got <= analytic * 2.0,
            "got {got}, analytic {analytic}"
        );
    }

    #[test]
    fn linearity_in_incident_amplitude() {
        let grid = Domain::<f64>::unit_cube(4);
        let q = constant_c(Complex::new(0.4, -0.1));
        let base = ctx(1.0);
        let scaled = WaveContext::with_amplitude(1.0, [0.0, 0.0, 1.0], Complex::new(1.7, -0.4))
            .unwrap();
        let mut sys1 = assemble_ls_system(&q, &grid, &base).unwrap();
        let mut sys2 = assemble_ls_system(&q, &grid, &scaled).unwrap();
        let sol1 = solve_effective(&mut sys1).unwrap();
        let sol2 = solve_effective(&mut sys2).unwrap();
        let factor = Complex::new(1.7, -0.4);
        for (u1, u2) in sol1.field.values.iter().zip(sol2.field.values.iter()) {
            assert!((u1 * factor - u2).norm() <= 1e-12 * u2.norm().max(1e-30));
        }
    }

    #[test]
    fn passive_random_potentials_solve_cleanly() {
        let grid = Domain::<f64>::unit_cube(5);
        let mut state = 0xABCDEF12345u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..3 {
            let re = 2.0 * next() - 1.0;
            let im = -next();
            let q = constant_c(Complex::new(re, im));
            let mut sys = assemble_ls_system(&q, &grid, &ctx(1.0)).unwrap();
            let sol = solve_effective(&mut sys).unwrap();
            assert!(sol.residual_inf.is_finite());
            if let Some(cond) = sol.cond_estimate {
                assert!(cond.is_finite());
            }
        }
    }
}
