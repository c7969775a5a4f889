//! Admissibility classification, exact Gaussian increment variances,
//! structure-function Hölder estimates and moment tables.

mod admissibility;
mod holder;
mod increments;
mod moments;
mod spectral;

pub use admissibility::{
    admissibility, classify, AdmissibilityOptions, AdmissibilityReport, CutoffPoint, GrowthRate,
    Verdict,
};
pub use holder::{
    default_window, fbm_self_test, fit_structure_function, fractional_brownian_motion,
    holder_estimate, holder_streaming, spatial_increment_mean, Axis, HolderOptions, HolderReport,
    StructureAccumulator,
};
pub use increments::{continuum_increment_variance, exact_increment_variance};
pub use moments::{
    moment_accumulator, moment_table, moments_streaming, MomentAccumulator, MomentRow, MomentTable,
    MomentTrend, PointStats,
};
