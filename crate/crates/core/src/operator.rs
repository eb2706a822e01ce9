//! The shared point-cloud Helmholtz operator behind both collocation
//! systems: `(A u)_j = d_j u_j + sum_{m != j} g(x_j, x_m) w_m u_m` with
//! `g` the outgoing free-space kernel.
//!
//! The discrete M-body system uses scatterer centers with weights
//! `A_m V(a)`; the voxel collocation of the limiting integral equation
//! uses voxel centers with weights `q_m h^3`. Keeping one implementation
//! keeps the two systems numerically consistent and concentrates the
//! performance work: the row loop below is branch-free over structure-of-
//! arrays coordinates so it vectorizes, which is what makes the matrix-free
//! solves at M ~ 1e5 feasible.

use num_complex::Complex;
use rayon::prelude::*;

use crate::geom::Point;
use crate::linalg::{DenseMatrix, LinOp};
use crate::scalar::{sin_cos_kernel, Cplx, Scalar};

#[derive(Debug, Clone)]
pub struct PointOperator<T> {
    k: T,
    xs: Vec<T>,
    ys: Vec<T>,
    zs: Vec<T>,
    /// Interaction weights, already including the quadrature volume.
    weights: Vec<Cplx<T>>,
    /// Diagonal entries of the full system matrix.
    diag: Vec<Cplx<T>>,
}

impl<T: Scalar> PointOperator<T> {
    pub fn new(k: T, points: &[Point<T>], weights: Vec<Cplx<T>>, diag: Vec<Cplx<T>>) -> Self {
        assert_eq!(points.len(), weights.len());
        assert_eq!(points.len(), diag.len());
        Self {
            k,
            xs: points.iter().map(|p| p[0]).collect(),
            ys: points.iter().map(|p| p[1]).collect(),
            zs: points.iter().map(|p| p[2]).collect(),
            weights,
            diag,
        }
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn k(&self) -> T {
        self.k
    }

    pub fn point(&self, m: usize) -> Point<T> {
        [self.xs[m], self.ys[m], self.zs[m]]
    }

    pub fn weights(&self) -> &[Cplx<T>] {
        &self.weights
    }

    pub fn diag(&self) -> &[Cplx<T>] {
        &self.diag
    }

    /// Row sum of `g(x_j, x_m) v_m` over `m != j`.
    ///
    /// Block-pass structure: fixed 256-point blocks go through separate
    /// elementwise passes (distances, reciprocal phase, accumulation), each
    /// a straight-line arithmetic loop that vectorizes. The summation
    /// order is a function of the row alone, never the thread count or the
    /// instruction set. This loop carries the entire cost of the large
    /// matrix-free solves.
    #[inline]
    fn row_sum(&self, j: usize, vr: &[T], vi: &[T]) -> (T, T) {
        const BLOCK: usize = 256;
        const LANES: usize = 8;
        let xj = self.xs[j];
        let yj = self.ys[j];
        let zj = self.zs[j];
        let k = self.k;
        let mut buf_r = [T::zero(); BLOCK];
        let mut buf_s = [T::zero(); BLOCK];
        let mut buf_c = [T::zero(); BLOCK];
        let mut acc_re = [T::zero(); LANES];
        let mut acc_im = [T::zero(); LANES];
        let mut range_sum = |lo: usize, hi: usize| {
            let mut start = lo;
            while start < hi {
                let len = BLOCK.min(hi - start);
                let xs = &self.xs[start..start + len];
                let ys = &self.ys[start..start + len];
                let zs = &self.zs[start..start + len];
                let wr = &vr[start..start + len];
                let wi = &vi[start..start + len];
                // Pass 1: inverse distances.
                for i in 0..len {
                    let dx = xs[i] - xj;
                    let dy = ys[i] - yj;
                    let dz = zs[i] - zj;
                    buf_r[i] = (dx * dx + dy * dy + dz * dz).sqrt();
                }
                // Pass 2: outgoing phase at k r.
                for i in 0..len {
                    let (s, c) = sin_cos_kernel(k * buf_r[i]);
                    buf_s[i] = s;
                    buf_c[i] = c;
                }
                // Pass 3: accumulate (c + i s) v / r in fixed lanes.
                let main = len - len % LANES;
                let mut i = 0;
                while i < main {
                    for l in 0..LANES {
                        let inv_r = T::one() / buf_r[i + l];
                        acc_re[l] += (buf_c[i + l] * wr[i + l] - buf_s[i + l] * wi[i + l]) * inv_r;
                        acc_im[l] += (buf_c[i + l] * wi[i + l] + buf_s[i + l] * wr[i + l]) * inv_r;
                    }
                    i += LANES;
                }
                for i in main..len {
                    let inv_r = T::one() / buf_r[i];
                    acc_re[0] += (buf_c[i] * wr[i] - buf_s[i] * wi[i]) * inv_r;
                    acc_im[0] += (buf_c[i] * wi[i] + buf_s[i] * wr[i]) * inv_r;
                }
                start += len;
            }
        };
        range_sum(0, j);
        range_sum(j + 1, self.xs.len());
        let mut re = T::zero();
        let mut im = T::zero();
        for l in 0..LANES {
            re += acc_re[l];
            im += acc_im[l];
        }
        (re, im)
    }

    /// Dense matrix of this operator (entries `g_jm w_m`, diagonal `d_j`).
    pub fn to_dense(&self) -> DenseMatrix<T> {
        let n = self.len();
        let inv_4pi = T::one() / (T::of(4.0) * T::PI());
        DenseMatrix::fill_rows(n, |j, row| {
            let xj = self.point(j);
            for m in 0..n {
                if m == j {
                    row[m] = self.diag[j];
                } else {
                    let xm = self.point(m);
                    let dx = xm[0] - xj[0];
                    let dy = xm[1] - xj[1];
                    let dz = xm[2] - xj[2];
                    let r = (dx * dx + dy * dy + dz * dz).sqrt();
                    let (s, c) = sin_cos_kernel(self.k * r);
                    let g = Complex::new(c, s) * (inv_4pi / r);
                    row[m] = g * self.weights[m];
                }
            }
        })
    }

    /// Infinity-norm bound of the off-diagonal part plus diagonal excess:
    /// `max_j ( |d_j - 1| + sum_{m != j} |g_jm w_m| )`. This bounds the
    /// spectral radius of `A - I` and drives the series-divergence warning.
    pub fn coupling_norm(&self) -> T {
        let n = self.len();
        let inv_4pi = T::one() / (T::of(4.0) * T::PI());
        (0..n)
            .into_par_iter()
            .map(|j| {
                let xj = self.point(j);
                let mut acc = (self.diag[j] - Complex::new(T::one(), T::zero()))
                    .norm_sqr()
                    .sqrt();
                for m in 0..n {
                    if m == j {
                        continue;
                    }
                    let xm = self.point(m);
                    let dx = xm[0] - xj[0];
                    let dy = xm[1] - xj[1];
                    let dz = xm[2] - xj[2];
                    let r = (dx * dx + dy * dy + dz * dz).sqrt();
                    acc += self.weights[m].norm_sqr().sqrt() * inv_4pi / r;
                }
                acc
            })
            .reduce(T::zero, |a, b| a.max(b))
    }
}

impl<T: Scalar> LinOp<T> for PointOperator<T> {
    fn dim(&self) -> usize {
        self.len()
    }

    fn apply(&self, x: &[Cplx<T>], y: &mut [Cplx<T>]) {
        let n = self.len();
        let inv_4pi = T::one() / (T::of(4.0) * T::PI());
        // Premultiplied source vector v_m = w_m x_m / (4 pi), split into
        // planar arrays for the vectorized row loop.
        let mut vr = vec![T::zero(); n];
        let mut vi = vec![T::zero(); n];
        for m in 0..n {
            let v = self.weights[m] * x[m] * inv_4pi;
            vr[m] = v.re;
            vi[m] = v.im;
        }
        y.par_iter_mut().enumerate().for_each(|(j, yj)| {
            let (re, im) = self.row_sum(j, &vr, &vi);
            *yj = self.diag[j] * x[j] + Complex::new(re, im);
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::green;

    fn demo_operator() -> PointOperator<f64> {
        let pts = vec![
            [0.0, 0.0, 0.0],
            [0.3, 0.1, -0.2],
            [-0.4, 0.5, 0.6],
            [0.2, -0.7, 0.1],
        ];
        let weights = vec![
            Complex::new(0.5, 0.1),
            Complex::new(-0.3, 0.0),
            Complex::new(0.2, -0.4),
            Complex::new(0.1, 0.2),
        ];
        let diag = vec![
            Complex::new(1.0, 0.0),
            Complex::new(1.1, 0.02),
            Complex::new(0.9, -0.01),
            Complex::new(1.0, 0.0),
        ];
        PointOperator::new(1.7, &pts, weights, diag)
    }

    #[test]
    fn apply_matches_dense() {
        let op = demo_operator();
        let dense = op.to_dense();
        let x: Vec<Cplx<f64>> = (0..op.len())
            .map(|i| Complex::new(0.3 + i as f64, 0.1 * i as f64))
            .collect();
        let mut y_fast = vec![Complex::new(0.0, 0.0); op.len()];
        let mut y_dense = vec![Complex::new(0.0, 0.0); op.len()];
        op.apply(&x, &mut y_fast);
        dense.apply(&x, &mut y_dense);
        for (a, b) in y_fast.iter().zip(y_dense.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn dense_entries_match_kernel() {
        let op = demo_operator();
        let dense = op.to_dense();
        let g = green(1.7, op.point(0), op.point(2)) * op.weights()[2];
        assert!((dense.get(0, 2) - g).norm() < 1e-13 * g.norm());
        assert_eq!(dense.get(1, 1), op.diag()[1]);
    }

    #[test]
    fn coupling_norm_bounds_row_sums() {
        let op = demo_operator();
        let dense = op.to_dense();
        let mut worst: f64 = 0.0;
        for j in 0..op.len() {
            let mut acc = (dense.get(j, j) - Complex::new(1.0, 0.0)).norm();
            for m in 0..op.len() {
                if m != j {
                    acc += dense.get(j, m).norm();
                }
            }
            worst = worst.max(acc);
        }
        assert!((op.coupling_norm() - worst).abs() < 1e-12);
    }
}
