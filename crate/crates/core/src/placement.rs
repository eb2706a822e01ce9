//! Deterministic generation of scatterer centers following the prescribed
//! count law: the number of centers in any region approximates
//! `integral of N over the region / V(a)`.
//!
//! Centers live on a global face-centered-cubic lattice whose nearest
//! neighbor distance is `2a`, so non-overlap holds by construction and the
//! achievable volume fraction reaches the sphere-packing bound rather than
//! the much smaller simple-cubic one. The domain is partitioned into cells;
//! each cell receives a quota from the midpoint rule with a running
//! rounding carry, and activates that many lattice sites, nearest to the
//! cell center first. The carry absorbs per-cell rounding so regional
//! counts track the integral even when single cells are misaligned with
//! the lattice.

use num_complex::Complex;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::geom::{BoxRegion, Domain, Point};
use crate::kernels::ball_volume;
use crate::medium::{CSampler, RSampler, DEFAULT_P_MAX};
use crate::quadrature::midpoint_integral_3d;
use crate::scalar::{Cplx, Scalar};

/// Relative slack applied to the lattice pitch so that roundoff can never
/// push a generated pair below the exact `2a` separation.
const PITCH_SLACK: f64 = 1e-9;

/// How the per-cell quota picks its lattice sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlacementMode {
    /// Sites nearest the cell center first; fully deterministic.
    CenteredPrefix,
    /// Seeded random subset of the cell's sites (still non-overlapping).
    Random { seed: u64 },
}

#[derive(Debug, Clone, Copy)]
pub struct PlacementOptions<T> {
    pub p_max: T,
    pub mode: PlacementMode,
}

impl<T: Scalar> Default for PlacementOptions<T> {
    fn default() -> Self {
        Self {
            p_max: T::of(DEFAULT_P_MAX),
            mode: PlacementMode::CenteredPrefix,
        }
    }
}

/// A concrete set of small balls: radius, centers and per-ball amplitudes.
#[derive(Debug, Clone)]
pub struct ScattererConfig<T> {
    pub a: T,
    pub centers: Vec<Point<T>>,
    pub amplitudes: Vec<Cplx<T>>,
}

impl<T: Scalar> ScattererConfig<T> {
    /// Build from explicit data, verifying the pairwise separation.
    pub fn new(a: T, centers: Vec<Point<T>>, amplitudes: Vec<Cplx<T>>) -> Result<Self> {
        if centers.len() != amplitudes.len() {
            return Err(CoreError::InvalidInput(format!(
                "centers ({}) and amplitudes ({}) length mismatch",
                centers.len(),
                amplitudes.len()
            )));
        }
        let cfg = Self {
            a,
            centers,
            amplitudes,
        };
        cfg.verify_separation()?;
        Ok(cfg)
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Ball volume `V(a)`.
    pub fn v_a(&self) -> T {
        ball_volume(self.a)
    }

    /// Assign amplitudes by sampling `A` at the centers.
    pub fn with_amplitudes_from(mut self, amplitude: &CSampler<T>) -> Self {
        self.amplitudes = self.centers.iter().map(|&x| amplitude(x)).collect();
        self
    }

    /// Check all pairwise distances are at least `2a` (up to a 1e-9
    /// relative roundoff allowance) with a hash-grid sweep.
    pub fn verify_separation(&self) -> Result<()> {
        let m = self.centers.len();
        if m < 2 {
            return Ok(());
        }
        let min_dist = T::of(2.0) * self.a * T::of(1.0 - 1e-9);
        let min_sq = min_dist * min_dist;
        let cell = (T::of(2.0) * self.a).to_f64_lossy();
        if cell <= 0.0 {
            return Err(CoreError::InvalidInput("radius must be positive".into()));
        }
        use std::collections::HashMap;
        let key = |p: &Point<T>| -> (i64, i64, i64) {
            (
                (p[0].to_f64_lossy() / cell).floor() as i64,
                (p[1].to_f64_lossy() / cell).floor() as i64,
                (p[2].to_f64_lossy() / cell).floor() as i64,
            )
        };
        let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
        for (idx, p) in self.centers.iter().enumerate() {
            let (kx, ky, kz) = key(p);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        if let Some(neighbors) = grid.get(&(kx + dx, ky + dy, kz + dz)) {
                            for &j in neighbors {
                                let q = self.centers[j];
                                let d = [p[0] - q[0], p[1] - q[1], p[2] - q[2]];
                                let dist_sq = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
                                if dist_sq < min_sq {
                                    return Err(CoreError::OverlapError {
                                        i: j,
                                        j: idx,
                                        dist: dist_sq.sqrt().to_f64_lossy(),
                                        min_dist: (T::of(2.0) * self.a).to_f64_lossy(),
                                    });
                                }
                            }
                        }
                    }
                }
            }
            grid.entry((kx, ky, kz)).or_default().push(idx);
        }
        Ok(())
    }
}

/// The placement cell grid: near-cubic cells that tile the domain exactly.
struct CellGrid<T> {
    counts: [usize; 3],
    sizes: Point<T>,
    lo: Point<T>,
}

impl<T: Scalar> CellGrid<T> {
    fn build(domain: &Domain<T>, a: T) -> Result<Self> {
        let edges = domain.edge_lengths();
        let mut counts = [1usize; 3];
        let mut sizes = [T::zero(); 3];
        for d in 0..3 {
            // Target cell size: max(4a, edge/16), then rounded so that an
            // integer number of cells tiles the edge exactly.
            let target = (T::of(4.0) * a).max(edges[d] / T::of(16.0));
            let n = (edges[d] / target)
                .to_f64_lossy()
                .round_ties_even()
                .max(1.0) as usize;
            counts[d] = n;
            sizes[d] = edges[d] / T::of_usize(n);
            if T::of(2.0) * a > sizes[d] {
                return Err(CoreError::InvalidRadius {
                    two_a: (T::of(2.0) * a).to_f64_lossy(),
                    h_cell: sizes[d].to_f64_lossy(),
                });
            }
        }
        Ok(Self {
            counts,
            sizes,
            lo: domain.lo(),
        })
    }

    fn n_cells(&self) -> usize {
        self.counts[0] * self.counts[1] * self.counts[2]
    }

    fn cell_box(&self, idx: [usize; 3]) -> BoxRegion<T> {
        let lo = [
            self.lo[0] + self.sizes[0] * T::of_usize(idx[0]),
            self.lo[1] + self.sizes[1] * T::of_usize(idx[1]),
            self.lo[2] + self.sizes[2] * T::of_usize(idx[2]),
        ];
        let hi = [lo[0] + self.sizes[0], lo[1] + self.sizes[1], lo[2] + self.sizes[2]];
        BoxRegion::new(lo, hi)
    }

    fn unflatten(&self, flat: usize) -> [usize; 3] {
        let nz = self.counts[2];
        let ny = self.counts[1];
        [flat / (ny * nz), (flat / nz) % ny, flat % nz]
    }
}

/// FCC lattice with nearest-neighbor distance `2a (1 + slack)`, anchored at
/// `anchor`. Conventional cubic cell of side `2 sqrt(2) a`; four-site basis.
struct FccLattice<T> {
    pitch: T,
    anchor: Point<T>,
}

const FCC_BASIS: [[f64; 3]; 4] = [
    [0.0, 0.0, 0.0],
    [0.0, 0.5, 0.5],
    [0.5, 0.0, 0.5],
    [0.5, 0.5, 0.0],
];

impl<T: Scalar> FccLattice<T> {
    fn new(a: T, anchor: Point<T>) -> Self {
        let pitch = T::of(2.0) * T::SQRT_2() * a * T::of(1.0 + PITCH_SLACK);
        Self { pitch, anchor }
    }

    /// All lattice sites inside the half-open box, in basis/index order.
    fn sites_in(&self, bb: &BoxRegion<T>, out: &mut Vec<Point<T>>) {
        out.clear();
        for basis in FCC_BASIS {
            let off = [
                self.anchor[0] + self.pitch * T::of(basis[0]),
                self.anchor[1] + self.pitch * T::of(basis[1]),
                self.anchor[2] + self.pitch * T::of(basis[2]),
            ];
            let mut ranges = [(0i64, -1i64); 3];
            for d in 0..3 {
                let lo_i = ((bb.lo[d] - off[d]) / self.pitch).to_f64_lossy().floor() as i64 - 1;
                let hi_i = ((bb.hi[d] - off[d]) / self.pitch).to_f64_lossy().ceil() as i64 + 1;
                ranges[d] = (lo_i, hi_i);
            }
            for i in ranges[0].0..=ranges[0].1 {
                let x = off[0] + self.pitch * T::of(i as f64);
                if x < bb.lo[0] || x >= bb.hi[0] {
                    continue;
                }
                for j in ranges[1].0..=ranges[1].1 {
                    let y = off[1] + self.pitch * T::of(j as f64);
                    if y < bb.lo[1] || y >= bb.hi[1] {
                        continue;
                    }
                    for l in ranges[2].0..=ranges[2].1 {
                        let z = off[2] + self.pitch * T::of(l as f64);
                        if z < bb.lo[2] || z >= bb.hi[2] {
                            continue;
                        }
                        out.push([x, y, z]);
                    }
                }
            }
        }
    }
}

fn lex_less<T: Scalar>(a: &Point<T>, b: &Point<T>) -> std::cmp::Ordering {
    for d in 0..3 {
        match a[d].partial_cmp(&b[d]).expect("finite coordinates") {
            std::cmp::Ordering::Equal => continue,
            ord => return ord,
        }
    }
    std::cmp::Ordering::Equal
}

/// Generate centers for the given density and radius. Amplitudes are left
/// at zero; sample them afterwards with `with_amplitudes_from`.
pub fn place_inhomogeneities<T: Scalar>(
    density: &RSampler<T>,
    a: T,
    domain: &Domain<T>,
) -> Result<ScattererConfig<T>> {
    place_inhomogeneities_with(density, a, domain, &PlacementOptions::default())
}

pub fn place_inhomogeneities_with<T: Scalar>(
    density: &RSampler<T>,
    a: T,
    domain: &Domain<T>,
    opts: &PlacementOptions<T>,
) -> Result<ScattererConfig<T>> {
    if !(a > T::zero()) || !a.is_finite() {
        return Err(CoreError::InvalidInput(format!(
            "radius must be positive and finite, got {a}"
        )));
    }
    let cells = CellGrid::build(domain, a)?;
    let lattice = FccLattice::new(a, domain.lo());
    let v_a = ball_volume(a);

    let mut centers: Vec<Point<T>> = Vec::new();
    let mut carry = 0.0f64;
    let mut sites: Vec<Point<T>> = Vec::new();
    let mut worst_deficit: Option<([usize; 3], usize, usize)> = None;

    for flat in 0..cells.n_cells() {
        let idx = cells.unflatten(flat);
        let bb = cells.cell_box(idx);
        let center = [
            (bb.lo[0] + bb.hi[0]) * T::of(0.5),
            (bb.lo[1] + bb.hi[1]) * T::of(0.5),
            (bb.lo[2] + bb.hi[2]) * T::of(0.5),
        ];
        let n_val = density(center);
        if n_val < T::zero() {
            return Err(CoreError::InvalidDensity {
                x: center[0].to_f64_lossy(),
                y: center[1].to_f64_lossy(),
                z: center[2].to_f64_lossy(),
                value: n_val.to_f64_lossy(),
            });
        }
        if n_val >= opts.p_max {
            return Err(CoreError::PackingViolation {
                x: center[0].to_f64_lossy(),
                y: center[1].to_f64_lossy(),
                z: center[2].to_f64_lossy(),
                value: n_val.to_f64_lossy(),
                p_max: opts.p_max.to_f64_lossy(),
            });
        }
        let n_integral = cell_density_integral(density, &bb, center);
        if n_integral == T::zero() {
            // No support in this cell; the carry must not leak scatterers
            // into regions where the density vanishes.
            continue;
        }

        // Per-cell quota with running rounding carry.
        let ratio = (n_integral / v_a).to_f64_lossy() + carry;
        let quota = ratio.round_ties_even().max(0.0) as usize;

        lattice.sites_in(&bb, &mut sites);
        order_sites(&mut sites, center, idx, &opts.mode);

        let placed = quota.min(sites.len());
        if placed < quota {
            let deficit = quota - placed;
            if worst_deficit.map(|(_, d, _)| deficit > d).unwrap_or(true) {
                worst_deficit = Some((idx, deficit, sites.len()));
            }
        }
        select_sites(&sites, density, placed, &mut centers);
        carry = ratio - placed as f64;
    }

    // The carry tracks everything still owed after the sweep. A residual of
    // a couple of balls is rounding; anything larger means the density is
    // too close to the packing bound for this radius.
    if carry >= (2.0f64).max(1e-3 * centers.len() as f64) {
        let (cell, needed, available) = worst_deficit.unwrap_or(([0; 3], carry as usize, 0));
        return Err(CoreError::CellOverflow {
            cell,
            needed: needed.max(carry as usize),
            available,
            a: a.to_f64_lossy(),
        });
    }

    centers.sort_by(lex_less);
    let m = centers.len();
    let config = ScattererConfig {
        a,
        centers,
        amplitudes: vec![Complex::new(T::zero(), T::zero()); m],
    };
    // The lattice guarantees separation; verify explicitly at sizes where
    // the sweep is cheap.
    if m <= 200_000 {
        config.verify_separation()?;
    }
    Ok(config)
}

/// Integral of the density over one placement cell: midpoint rule on the
/// 2x2x2 half-cell subdivision. The refinement over a single midpoint
/// matters once the cell size stops shrinking with `a`: the quota bias it
/// removes would otherwise put a floor under the Riemann-sum convergence.
fn cell_density_integral<T: Scalar>(
    density: &RSampler<T>,
    bb: &BoxRegion<T>,
    center: Point<T>,
) -> T {
    let quarter = T::of(0.25);
    let off = [
        (bb.hi[0] - bb.lo[0]) * quarter,
        (bb.hi[1] - bb.lo[1]) * quarter,
        (bb.hi[2] - bb.lo[2]) * quarter,
    ];
    let mut acc = T::zero();
    for sx in [-T::one(), T::one()] {
        for sy in [-T::one(), T::one()] {
            for sz in [-T::one(), T::one()] {
                acc += density([
                    center[0] + sx * off[0],
                    center[1] + sy * off[1],
                    center[2] + sz * off[2],
                ]);
            }
        }
    }
    acc * bb.volume() * T::of(0.125)
}

/// Pick `count` sites out of the ordered candidates by density-weighted
/// systematic sampling: walking the center-out order, a site is taken each
/// time the cumulative density weight crosses the next of `count` evenly
/// spaced thresholds. Selected sites follow the density variation inside
/// the cell instead of clustering at the low end of the order, which is
/// what keeps the Riemann sums converging once the cell size has bottomed
/// out at its domain-scale floor.
fn select_sites<T: Scalar>(
    sites: &[Point<T>],
    density: &RSampler<T>,
    count: usize,
    out: &mut Vec<Point<T>>,
) {
    if count == 0 {
        return;
    }
    if count >= sites.len() {
        out.extend_from_slice(sites);
        return;
    }
    let weights: Vec<f64> = sites
        .iter()
        .map(|&x| density(x).to_f64_lossy().max(0.0))
        .collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        // Density vanishes at every site but not in the cell average; fall
        // back to the plain prefix.
        out.extend_from_slice(&sites[..count]);
        return;
    }
    let stride = total / count as f64;
    let mut next_threshold = 0.5 * stride;
    let mut cum = 0.0;
    let mut taken = 0usize;
    let mut selected = vec![false; sites.len()];
    for (i, w) in weights.iter().enumerate() {
        cum += w;
        if taken < count && cum > next_threshold {
            selected[i] = true;
            taken += 1;
            // Absorb multiple crossings; a site is taken at most once.
            while cum > next_threshold {
                next_threshold += stride;
            }
        }
        if taken == count {
            break;
        }
    }
    // Fill any shortfall (concentrated weights or float drift) with the
    // earliest unselected sites.
    for i in 0..sites.len() {
        if taken == count {
            break;
        }
        if !selected[i] {
            selected[i] = true;
            taken += 1;
        }
    }
    for (site, take) in sites.iter().zip(selected.iter()) {
        if *take {
            out.push(*site);
        }
    }
}

fn order_sites<T: Scalar>(
    sites: &mut [Point<T>],
    cell_center: Point<T>,
    cell_idx: [usize; 3],
    mode: &PlacementMode,
) {
    // Canonical deterministic base order first.
    sites.sort_by(lex_less);
    match mode {
        PlacementMode::CenteredPrefix => {
            // Nearest-to-center first: prefixes stay balanced around the
            // cell center, which keeps the Riemann sums unbiased when a
            // quota fills the cell only partially.
            sites.sort_by(|p, q| {
                let dp = dist_sq(*p, cell_center);
                let dq = dist_sq(*q, cell_center);
                dp.partial_cmp(&dq)
                    .expect("finite distances")
                    .then_with(|| lex_less(p, q))
            });
        }
        PlacementMode::Random { seed } => {
            let cell_hash = (cell_idx[0] as u64)
                .wrapping_mul(0x9E3779B97F4A7C15)
                .wrapping_add(cell_idx[1] as u64)
                .wrapping_mul(0x85EBCA77C2B2AE63)
                .wrapping_add(cell_idx[2] as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(cell_hash));
            sites.shuffle(&mut rng);
        }
    }
}

#[inline]
fn dist_sq<T: Scalar>(p: Point<T>, q: Point<T>) -> T {
    let d = [p[0] - q[0], p[1] - q[1], p[2] - q[2]];
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

/// Predicted total count `integral of N over D / V(a)` (midpoint rule on
/// the placement cells), without generating anything. Used by dry runs.
pub fn predicted_count<T: Scalar>(density: &RSampler<T>, a: T, domain: &Domain<T>) -> Result<T> {
    let cells = CellGrid::build(domain, a)?;
    let mut integral = T::zero();
    for flat in 0..cells.n_cells() {
        let idx = cells.unflatten(flat);
        let bb = cells.cell_box(idx);
        let center = [
            (bb.lo[0] + bb.hi[0]) * T::of(0.5),
            (bb.lo[1] + bb.hi[1]) * T::of(0.5),
            (bb.lo[2] + bb.hi[2]) * T::of(0.5),
        ];
        integral += cell_density_integral(density, &bb, center);
    }
    Ok(integral / ball_volume(a))
}

/// Riemann sum `sum_m f(x_m) V(a)` over the configuration.
pub fn riemann_sum<T: Scalar, F>(f: F, config: &ScattererConfig<T>) -> Cplx<T>
where
    F: Fn(Point<T>) -> Cplx<T>,
{
    let v_a = config.v_a();
    let mut acc = Complex::new(T::zero(), T::zero());
    for &x in &config.centers {
        acc = acc + f(x);
    }
    acc * v_a
}

/// Riemann sum skipping centers inside the excision ball `B(y, delta)`;
/// the improper-integral variant used for singular integrands.
pub fn riemann_sum_excised<T: Scalar, F>(
    f: F,
    config: &ScattererConfig<T>,
    y: Point<T>,
    delta: T,
) -> Cplx<T>
where
    F: Fn(Point<T>) -> Cplx<T>,
{
    let v_a = config.v_a();
    let d2 = delta * delta;
    let mut acc = Complex::new(T::zero(), T::zero());
    for &x in &config.centers {
        if dist_sq(x, y) >= d2 {
            acc = acc + f(x);
        }
    }
    acc * v_a
}

/// Count the centers inside an axis-aligned region (half-open), together
/// with the predicted count `integral of N over region / V(a)`.
pub fn count_in_region<T: Scalar>(
    config: &ScattererConfig<T>,
    region: &BoxRegion<T>,
    density: &RSampler<T>,
    domain: &Domain<T>,
) -> Result<(usize, T)> {
    if !region.is_inside(&domain.bounding_box()) {
        return Err(CoreError::RegionOutsideDomain);
    }
    let actual = config
        .centers
        .iter()
        .filter(|&&x| region.contains(x))
        .count();
    let integral = midpoint_integral_3d(region.lo, region.hi, 48, |x| density(x));
    Ok((actual, integral / config.v_a()))
}
