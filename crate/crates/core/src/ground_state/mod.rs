//! Constrained minimization on mass spheres, threshold masses and the
//! closed-form relations between them.

mod closed_form;
mod minimize;
mod scaling;
mod shape;
mod threshold;

pub use closed_form::{
    big_f_of_x, cond_aqp, cond_aqp_bound, f_from_deltas, f_of_a, lambda_reduction, ordering_check, ordering_via_f,
    OrderingReport,
};
pub use minimize::{
    ansatz_width, minimize_on_sphere, Classification, GridPolicy, MinimizeOptions, MinimizeResult, SeedRun, ShapeSeed,
};
pub use scaling::{rescale, Rescaled, ScaleFactors};
pub use shape::{
    amgm_constant, best_dilation, default_shape_grid, energy_dilation, optimal_shape, threshold_from_quotient,
    threshold_quotient, threshold_quotient_of, OptimalShape,
};
pub use threshold::{
    default_a_grid, named_thresholds, threshold_mass, NamedThreshold, NamedThresholds, ProbeClass, ProbeRecord,
    ThresholdOptions, ThresholdResult, DEFAULT_EPS_GRID,
};
