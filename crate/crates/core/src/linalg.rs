//! Dense complex linear algebra and matrix-free iterative solvers.
//!
//! Both collocation systems are identity-plus-compact, so a stationary
//! (Neumann) iteration usually converges in a handful of sweeps; BiCGStab
//! backs it up for stronger contrasts, and pivoted LU handles anything
//! small enough to store. All reductions run in a fixed order so results
//! do not depend on the thread count.

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::scalar::{Cplx, Scalar};

/// Anything that can apply `y = A x` for a square complex system.
pub trait LinOp<T: Scalar>: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[Cplx<T>], y: &mut [Cplx<T>]);
}

/// Row-major dense complex matrix.
#[derive(Debug, Clone)]
pub struct DenseMatrix<T> {
    n: usize,
    data: Vec<Cplx<T>>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Complex::new(T::zero(), T::zero()); n * n],
        }
    }

    pub fn from_rows(n: usize, data: Vec<Cplx<T>>) -> Self {
        assert_eq!(data.len(), n * n);
        Self { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Cplx<T> {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Cplx<T>) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Cplx<T>] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn data(&self) -> &[Cplx<T>] {
        &self.data
    }

    /// Fill row-by-row in parallel; each row is produced sequentially.
    pub fn fill_rows<F>(n: usize, f: F) -> Self
    where
        F: Fn(usize, &mut [Cplx<T>]) + Sync,
    {
        if n == 0 {
            return Self::zeros(0);
        }
        let mut data = vec![Complex::new(T::zero(), T::zero()); n * n];
        data.par_chunks_mut(n)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
        Self { n, data }
    }
}

impl<T: Scalar> LinOp<T> for DenseMatrix<T> {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[Cplx<T>], y: &mut [Cplx<T>]) {
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let row = &self.data[i * self.n..(i + 1) * self.n];
            let mut acc = Complex::new(T::zero(), T::zero());
            for (a, b) in row.iter().zip(x.iter()) {
                acc = acc + *a * *b;
            }
            *yi = acc;
        });
    }
}

/// Pivoted LU factorization of a dense complex matrix, stored in place.
pub struct LuFactors<T> {
    lu: DenseMatrix<T>,
    pivots: Vec<usize>,
    /// Ratio of the largest to smallest pivot magnitude: a crude
    /// condition indicator, reported with singular-system errors.
    pub cond_estimate: f64,
}

/// Factor `a` (consumed) with partial pivoting.
pub fn lu_factor<T: Scalar>(mut a: DenseMatrix<T>) -> Result<LuFactors<T>> {
    let n = a.n;
    let mut pivots = vec![0usize; n];
    let mut max_piv = T::zero();
    let mut min_piv = T::infinity();

    for col in 0..n {
        // Pivot search on |.|^2.
        let mut best = col;
        let mut best_mag = a.get(col, col).norm_sqr();
        for r in (col + 1)..n {
            let m = a.get(r, col).norm_sqr();
            if m > best_mag {
                best_mag = m;
                best = r;
            }
        }
        pivots[col] = best;
        if best != col {
            for j in 0..n {
                let t = a.get(col, j);
                a.set(col, j, a.get(best, j));
                a.set(best, j, t);
            }
        }
        let piv = a.get(col, col);
        let piv_mag = piv.norm_sqr().sqrt();
        max_piv = max_piv.max(piv_mag);
        min_piv = min_piv.min(piv_mag);
        if piv_mag == T::zero() {
            return Err(CoreError::SingularSystem { cond: f64::INFINITY });
        }

        // Multipliers and trailing update; rows are independent.
        let inv = Complex::new(T::one(), T::zero()) / piv;
        let (done, rest) = a.data.split_at_mut((col + 1) * n);
        let pivot_row = &done[col * n..col * n + n];
        rest.par_chunks_mut(n).for_each(|row| {
            let l = row[col] * inv;
            row[col] = l;
            if l.norm_sqr() != T::zero() {
                for j in (col + 1)..n {
                    row[j] = row[j] - l * pivot_row[j];
                }
            }
        });
    }

    let cond_estimate = (max_piv / min_piv).to_f64_lossy();
    Ok(LuFactors {
        lu: a,
        pivots,
        cond_estimate,
    })
}

impl<T: Scalar> LuFactors<T> {
    /// Solve `A x = b` from the stored factors.
    pub fn solve(&self, b: &[Cplx<T>]) -> Vec<Cplx<T>> {
        let n = self.lu.n;
        let mut x = b.to_vec();
        for i in 0..n {
            x.swap(i, self.pivots[i]);
        }
        // Forward substitution (unit lower triangle).
        for i in 1..n {
            let row = self.lu.row(i);
            let mut acc = x[i];
            for j in 0..i {
                acc = acc - row[j] * x[j];
            }
            x[i] = acc;
        }
        // Back substitution.
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let mut acc = x[i];
            for j in (i + 1)..n {
                acc = acc - row[j] * x[j];
            }
            x[i] = acc / row[i];
        }
        x
    }
}

/// Max norm of a complex vector.
pub fn inf_norm<T: Scalar>(v: &[Cplx<T>]) -> T {
    v.iter()
        .map(|z| z.norm_sqr())
        .fold(T::zero(), |m, s| m.max(s))
        .sqrt()
}

/// Residual `||A x - b||_inf`.
pub fn residual_inf<T: Scalar>(op: &dyn LinOp<T>, x: &[Cplx<T>], b: &[Cplx<T>]) -> T {
    let mut ax = vec![Complex::new(T::zero(), T::zero()); b.len()];
    op.apply(x, &mut ax);
    ax.iter()
        .zip(b.iter())
        .map(|(l, r)| (*l - *r).norm_sqr())
        .fold(T::zero(), |m, s| m.max(s))
        .sqrt()
}

/// Outcome of an iterative or direct solve.
#[derive(Debug, Clone)]
pub struct SolveReport<T> {
    pub solution: Vec<Cplx<T>>,
    pub residual_inf: T,
    pub iterations: usize,
    pub method: &'static str,
    pub cond_estimate: Option<f64>,
}

/// Direct dense solve with iterative refinement against `op` (which may be
/// the exact operator when the dense matrix is a discretization of it).
pub fn solve_dense<T: Scalar>(
    matrix: DenseMatrix<T>,
    op: &dyn LinOp<T>,
    b: &[Cplx<T>],
    tol_rel: T,
) -> Result<SolveReport<T>> {
    let factors = lu_factor(matrix)?;
    let mut x = factors.solve(b);
    let b_norm = inf_norm(b);
    let target = tol_rel * b_norm;
    let mut res = residual_inf(op, &x, b);
    let mut refinements = 0usize;
    while res > target && refinements < 4 {
        // One refinement sweep: x += A^{-1} (b - A x).
        let mut ax = vec![Complex::new(T::zero(), T::zero()); b.len()];
        op.apply(&x, &mut ax);
        let r: Vec<Cplx<T>> = b.iter().zip(ax.iter()).map(|(l, r)| *l - *r).collect();
        let dx = factors.solve(&r);
        for (xi, di) in x.iter_mut().zip(dx.iter()) {
            *xi = *xi + *di;
        }
        res = residual_inf(op, &x, b);
        refinements += 1;
    }
    if !(res <= target) && b_norm > T::zero() {
        return Err(CoreError::SingularSystem {
            cond: factors.cond_estimate,
        });
    }
    Ok(SolveReport {
        solution: x,
        residual_inf: res,
        iterations: refinements,
        method: "dense-lu",
        cond_estimate: Some(factors.cond_estimate),
    })
}

/// Stationary (Neumann) iteration for `A = I + K`:
/// `x_{n+1} = b - K x_n`, with the free residual `x_{n+1} - x_n`.
///
/// Converges iff the spectral radius of `K` is below one, which holds in
/// the weak-coupling regime both collocation systems live in. Returns
/// `None` if the residual stops contracting.
pub fn neumann_iteration<T: Scalar>(
    op: &dyn LinOp<T>,
    b: &[Cplx<T>],
    tol_rel: T,
    max_iter: usize,
) -> Option<SolveReport<T>> {
    let n = b.len();
    let b_norm = inf_norm(b);
    if b_norm == T::zero() {
        return Some(SolveReport {
            solution: vec![Complex::new(T::zero(), T::zero()); n],
            residual_inf: T::zero(),
            iterations: 0,
            method: "neumann",
            cond_estimate: None,
        });
    }
    let target = tol_rel * b_norm;
    let mut x = b.to_vec();
    let mut ax = vec![Complex::new(T::zero(), T::zero()); n];
    let mut prev_res = T::infinity();
    for iter in 1..=max_iter {
        op.apply(&x, &mut ax);
        // next = b - K x = b - (A x - x); residual = next - x = b - A x.
        let mut res_sq = T::zero();
        for i in 0..n {
            let next = b[i] - (ax[i] - x[i]);
            let d = next - x[i];
            res_sq = res_sq.max(d.norm_sqr());
            x[i] = next;
        }
        let res = res_sq.sqrt();
        if res <= target {
            // The reported solution satisfies the bound only up to one more
            // application; verify for the contract.
            let final_res = residual_inf(op, &x, b);
            if final_res <= target {
                return Some(SolveReport {
                    solution: x,
                    residual_inf: final_res,
                    iterations: iter,
                    method: "neumann",
                    cond_estimate: None,
                });
            }
        }
        if res >= prev_res * T::of(0.98) {
            return None; // stagnation or divergence
        }
        prev_res = res;
    }
    None
}

fn dot_conj<T: Scalar>(a: &[Cplx<T>], b: &[Cplx<T>]) -> Cplx<T> {
    let mut acc = Complex::new(T::zero(), T::zero());
    for (x, y) in a.iter().zip(b.iter()) {
        acc = acc + x.conj() * *y;
    }
    acc
}

/// Matrix-free BiCGStab with a fixed, thread-count-independent reduction
/// order. Used when the stationary iteration stalls.
pub fn bicgstab<T: Scalar>(
    op: &dyn LinOp<T>,
    b: &[Cplx<T>],
    tol_rel: T,
    max_iter: usize,
) -> Option<SolveReport<T>> {
    let n = b.len();
    let zero = Complex::new(T::zero(), T::zero());
    let b_norm = inf_norm(b);
    if b_norm == T::zero() {
        return Some(SolveReport {
            solution: vec![zero; n],
            residual_inf: T::zero(),
            iterations: 0,
            method: "bicgstab",
            cond_estimate: None,
        });
    }
    let target = tol_rel * b_norm;

    let mut x = vec![zero; n];
    let mut r = b.to_vec();
    let r0 = r.clone();
    let mut rho = Complex::new(T::one(), T::zero());
    let mut alpha = Complex::new(T::one(), T::zero());
    let mut omega = Complex::new(T::one(), T::zero());
    let mut v = vec![zero; n];
    let mut p = vec![zero; n];
    let mut t = vec![zero; n];
    let mut s = vec![zero; n];

    for iter in 1..=max_iter {
        let rho_new = dot_conj(&r0, &r);
        if rho_new.norm_sqr() == T::zero() {
            return None;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        op.apply(&p, &mut v);
        let denom = dot_conj(&r0, &v);
        if denom.norm_sqr() == T::zero() {
            return None;
        }
        alpha = rho / denom;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if inf_norm(&s) <= target {
            for i in 0..n {
                x[i] = x[i] + alpha * p[i];
            }
            let final_res = residual_inf(op, &x, b);
            if final_res <= target {
                return Some(SolveReport {
                    solution: x,
                    residual_inf: final_res,
                    iterations: iter,
                    method: "bicgstab",
                    cond_estimate: None,
                });
            }
            for i in 0..n {
                x[i] = x[i] - alpha * p[i];
            }
        }
        op.apply(&s, &mut t);
        let tt = dot_conj(&t, &t);
        if tt.norm_sqr() == T::zero() {
            return None;
        }
        omega = dot_conj(&t, &s) / tt;
        for i in 0..n {
            x[i] = x[i] + alpha * p[i] + omega * s[i];
            r[i] = s[i] - omega * t[i];
        }
        if inf_norm(&r) <= target {
            let final_res = residual_inf(op, &x, b);
            if final_res <= target {
                return Some(SolveReport {
                    solution: x,
                    residual_inf: final_res,
                    iterations: iter,
                    method: "bicgstab",
                    cond_estimate: None,
                });
            }
        }
        if omega.norm_sqr() == T::zero() {
            return None;
        }
    }
    None
}

/// Iterative solve: stationary sweep first, BiCGStab on stall.
pub fn solve_iterative<T: Scalar>(
    op: &dyn LinOp<T>,
    b: &[Cplx<T>],
    tol_rel: T,
    max_iter: usize,
) -> Result<SolveReport<T>> {
    if let Some(rep) = neumann_iteration(op, b, tol_rel, max_iter) {
        return Ok(rep);
    }
    if let Some(rep) = bicgstab(op, b, tol_rel, max_iter) {
        return Ok(rep);
    }
    Err(CoreError::SingularSystem { cond: f64::INFINITY })
}
