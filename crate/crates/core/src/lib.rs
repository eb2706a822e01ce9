//! Scalar wave scattering by many small inhomogeneities.
//!
//! The crate solves the exact M-body collocation system for a cloud of
//! small balls, solves the limiting volume integral equation on a voxel
//! grid, designs materials with a prescribed refraction coefficient by
//! factoring the target potential into amplitudes and a number density,
//! and provides the far-field, dispersion and focusing analyses on top.
//!
//! All numerics are generic over the scalar type (`f32`/`f64`, see
//! [`scalar::Scalar`]); the `*64` aliases at the crate root pin the default
//! double-precision instantiations used by the CLI and the test suites.

pub mod analysis;
pub mod discrete;
pub mod effective;
pub mod error;
pub mod geom;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod medium;
pub mod operator;
pub mod placement;
pub mod quadrature;
pub mod scalar;

pub use error::{CoreError, Result};
pub use scalar::Scalar;

/// Default real scalar.
pub type Real = f64;
/// Default complex scalar.
pub type Cplx64 = num_complex::Complex<f64>;

pub type Domain64 = geom::Domain<f64>;
pub type BoxRegion64 = geom::BoxRegion<f64>;
pub type WaveContext64 = medium::WaveContext<f64>;
pub type MediumSpec64 = medium::MediumSpec<f64>;
pub type PackingBound64 = medium::PackingBound<f64>;
pub type ScattererConfig64 = placement::ScattererConfig<f64>;
pub type DirectionSet64 = quadrature::DirectionSet<f64>;
pub type DiscreteSystem64 = discrete::DiscreteSystem<f64>;
pub type CenterField64 = discrete::CenterField<f64>;
pub type EffectiveSystem64 = effective::EffectiveSystem<f64>;
pub type ComplexGridField64 = effective::ComplexGridField<f64>;
pub type FarFieldPattern64 = analysis::FarFieldPattern<f64>;
pub type ConvergenceReport64 = analysis::ConvergenceReport<f64>;
pub type DispersionSamples64 = analysis::DispersionSamples<f64>;
