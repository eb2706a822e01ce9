//! Error type shared by all modules.

use thiserror::Error;

/// Errors raised by the medium design, placement, solver and analysis layers.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("packing violation: density N = {value} >= p_max = {p_max} at ({x}, {y}, {z})")]
    PackingViolation {
        x: f64,
        y: f64,
        z: f64,
        value: f64,
        p_max: f64,
    },

    #[error("negative density N = {value} at ({x}, {y}, {z})")]
    InvalidDensity { x: f64, y: f64, z: f64, value: f64 },

    #[error(
        "potential is nonzero (|q| = {q_abs}) where the density vanishes, at ({x}, {y}, {z})"
    )]
    DivisionByZeroSupport { x: f64, y: f64, z: f64, q_abs: f64 },

    #[error(
        "cell {cell:?} cannot hold {needed} centers at separation 2a (capacity {available}); \
         density too close to the packing bound for radius a = {a}"
    )]
    CellOverflow {
        cell: [usize; 3],
        needed: usize,
        available: usize,
        a: f64,
    },

    #[error("ball diameter 2a = {two_a} exceeds the placement cell size {h_cell}")]
    InvalidRadius { two_a: f64, h_cell: f64 },

    #[error("region lies outside the domain")]
    RegionOutsideDomain,

    #[error("centers {i} and {j} overlap: distance {dist} < 2a = {min_dist}")]
    OverlapError {
        i: usize,
        j: usize,
        dist: f64,
        min_dist: f64,
    },

    #[error("ka = {ka} is outside the small-scatterer regime (require ka < 0.5)")]
    KaTooLarge { ka: f64 },

    #[error("linear system is singular or not solvable to tolerance (condition estimate {cond:e})")]
    SingularSystem { cond: f64 },

    #[error("grid resolution too coarse: kh = {kh} (require kh < 1)")]
    ResolutionError { kh: f64 },

    #[error("grid too small: need at least {needed} voxels per axis, got {got:?}")]
    GridTooSmall { needed: usize, got: [usize; 3] },

    #[error("singular dispersion: |n + omega dn/domega| vanishes at omega = {omega}")]
    SingularDispersion { omega: f64 },

    #[error("kappa = {kappa} outside (0, 1]")]
    InvalidKappa { kappa: f64 },

    #[error("far-field pattern does not include the forward direction beta = alpha")]
    MissingForwardDirection,

    #[error("normal system is numerically singular without regularization (condition estimate {cond:e})")]
    IllConditioned { cond: f64 },

    #[error("invalid wave context: {0}")]
    InvalidWaveContext(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
