//! Far-field physics checks, the radius-convergence experiment, the
//! negative-refraction criterion, recipe count comparison, and the
//! wave-focusing designer.

pub mod dispersion;
pub mod farfield;
pub mod focusing;
pub mod study;

pub use dispersion::{group_velocity, negative_refraction_bands, DispersionSamples};
pub use farfield::{
    default_ot_tol, far_field_discrete, far_field_effective, far_field_points, far_field_value,
    optical_theorem_check, reciprocity_check, FarFieldPattern, MediumLoss, OpticalTheoremReport,
    OpticalVerdict,
};
pub use focusing::{
    born_focusing_design, nearest_voxel_sampler, solid_angle_target, FocusingDesign,
};
pub use study::{
    convergence_study, fit_loglog_slope, recipe_count_compare, standard_probes, ConvergenceReport,
    ConvergenceRow, ConvergenceStudyConfig, CountComparison,
};
