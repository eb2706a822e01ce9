//! Points, boxes and the voxelized computational domain.

use crate::error::CoreError;
use crate::scalar::Scalar;

/// 3-vector over the generic scalar.
pub type Point<T> = [T; 3];

#[inline]
pub fn sub<T: Scalar>(a: Point<T>, b: Point<T>) -> Point<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add<T: Scalar>(a: Point<T>, b: Point<T>) -> Point<T> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale<T: Scalar>(a: Point<T>, s: T) -> Point<T> {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot<T: Scalar>(a: Point<T>, b: Point<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm<T: Scalar>(a: Point<T>) -> T {
    dot(a, a).sqrt()
}

#[inline]
pub fn distance<T: Scalar>(a: Point<T>, b: Point<T>) -> T {
    norm(sub(a, b))
}

/// Normalize to unit length; returns `None` for the zero vector.
pub fn unit<T: Scalar>(a: Point<T>) -> Option<Point<T>> {
    let n = norm(a);
    if n <= T::zero() {
        None
    } else {
        Some(scale(a, T::one() / n))
    }
}

/// Axis-aligned box, used for regions and piecewise-constant samplers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxRegion<T> {
    pub lo: Point<T>,
    pub hi: Point<T>,
}

impl<T: Scalar> BoxRegion<T> {
    pub fn new(lo: Point<T>, hi: Point<T>) -> Self {
        Self { lo, hi }
    }

    /// Half-open membership test: `lo <= x < hi` componentwise.
    #[inline]
    pub fn contains(&self, x: Point<T>) -> bool {
        (0..3).all(|d| x[d] >= self.lo[d] && x[d] < self.hi[d])
    }

    pub fn volume(&self) -> T {
        (0..3).fold(T::one(), |v, d| v * (self.hi[d] - self.lo[d]))
    }

    pub fn is_inside(&self, outer: &BoxRegion<T>) -> bool {
        (0..3).all(|d| self.lo[d] >= outer.lo[d] && self.hi[d] <= outer.hi[d])
    }
}

/// Bounded voxelized domain D: an axis-aligned box with a regular grid.
///
/// Voxel centers are ordered with the x index slowest and the z index
/// fastest: `flat = (i * ny + j) * nz + l`.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain<T> {
    lo: Point<T>,
    hi: Point<T>,
    nvox: [usize; 3],
}

impl<T: Scalar> Domain<T> {
    pub fn new(lo: Point<T>, hi: Point<T>, nvox: [usize; 3]) -> Result<Self, CoreError> {
        for d in 0..3 {
            if !(hi[d] > lo[d]) || !hi[d].is_finite() || !lo[d].is_finite() {
                return Err(CoreError::InvalidDomain(format!(
                    "upper corner must exceed lower corner on axis {d}"
                )));
            }
            if nvox[d] < 1 {
                return Err(CoreError::InvalidDomain(format!(
                    "voxel count must be >= 1 on axis {d}"
                )));
            }
        }
        Ok(Self { lo, hi, nvox })
    }

    /// Unit cube `[0,1]^3` with an isotropic grid, a common test domain.
    pub fn unit_cube(n: usize) -> Self {
        Self::new(
            [T::zero(); 3],
            [T::one(); 3],
            [n, n, n],
        )
        .expect("unit cube is valid")
    }

    pub fn lo(&self) -> Point<T> {
        self.lo
    }

    pub fn hi(&self) -> Point<T> {
        self.hi
    }

    pub fn nvox(&self) -> [usize; 3] {
        self.nvox
    }

    pub fn bounding_box(&self) -> BoxRegion<T> {
        BoxRegion::new(self.lo, self.hi)
    }

    pub fn edge_lengths(&self) -> Point<T> {
        sub(self.hi, self.lo)
    }

    pub fn volume(&self) -> T {
        let e = self.edge_lengths();
        e[0] * e[1] * e[2]
    }

    /// Per-axis voxel sizes.
    pub fn voxel_size(&self) -> Point<T> {
        let e = self.edge_lengths();
        [
            e[0] / T::of_usize(self.nvox[0]),
            e[1] / T::of_usize(self.nvox[1]),
            e[2] / T::of_usize(self.nvox[2]),
        ]
    }

    pub fn voxel_volume(&self) -> T {
        let h = self.voxel_size();
        h[0] * h[1] * h[2]
    }

    /// Largest voxel edge, the resolution used in `k·h` admissibility checks.
    pub fn max_voxel_edge(&self) -> T {
        let h = self.voxel_size();
        h[0].max(h[1]).max(h[2])
    }

    pub fn n_voxels(&self) -> usize {
        self.nvox[0] * self.nvox[1] * self.nvox[2]
    }

    #[inline]
    pub fn voxel_center(&self, idx: [usize; 3]) -> Point<T> {
        let h = self.voxel_size();
        let half = T::of(0.5);
        [
            self.lo[0] + h[0] * (T::of_usize(idx[0]) + half),
            self.lo[1] + h[1] * (T::of_usize(idx[1]) + half),
            self.lo[2] + h[2] * (T::of_usize(idx[2]) + half),
        ]
    }

    #[inline]
    pub fn flat_index(&self, idx: [usize; 3]) -> usize {
        (idx[0] * self.nvox[1] + idx[1]) * self.nvox[2] + idx[2]
    }

    #[inline]
    pub fn unflatten(&self, flat: usize) -> [usize; 3] {
        let nz = self.nvox[2];
        let ny = self.nvox[1];
        let l = flat % nz;
        let j = (flat / nz) % ny;
        let i = flat / (nz * ny);
        [i, j, l]
    }

    /// All voxel centers in flat order.
    pub fn centers(&self) -> Vec<Point<T>> {
        let mut out = Vec::with_capacity(self.n_voxels());
        for i in 0..self.nvox[0] {
            for j in 0..self.nvox[1] {
                for l in 0..self.nvox[2] {
                    out.push(self.voxel_center([i, j, l]));
                }
            }
        }
        out
    }

    /// Half-open membership test, consistent with voxel tiling.
    #[inline]
    pub fn contains(&self, x: Point<T>) -> bool {
        self.bounding_box().contains(x)
    }

    /// Same box, different resolution.
    pub fn with_nvox(&self, nvox: [usize; 3]) -> Result<Self, CoreError> {
        Self::new(self.lo, self.hi, nvox)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_rejects_degenerate_boxes() {
        assert!(Domain::<f64>::new([0.0; 3], [1.0, 0.0, 1.0], [2, 2, 2]).is_err());
        assert!(Domain::<f64>::new([0.0; 3], [1.0; 3], [2, 0, 2]).is_err());
    }

    #[test]
    fn voxel_centers_use_midpoints() {
        let d = Domain::<f64>::unit_cube(2);
        assert_eq!(d.voxel_center([0, 0, 0]), [0.25, 0.25, 0.25]);
        assert_eq!(d.voxel_center([1, 1, 1]), [0.75, 0.75, 0.75]);
        assert_eq!(d.n_voxels(), 8);
        assert!((d.voxel_volume() - 0.125).abs() < 1e-15);
    }

    #[test]
    fn flat_index_roundtrip() {
        let d = Domain::<f64>::new([0.0; 3], [1.0, 2.0, 3.0], [3, 4, 5]).unwrap();
        for flat in 0..d.n_voxels() {
            assert_eq!(d.flat_index(d.unflatten(flat)), flat);
        }
    }
}
