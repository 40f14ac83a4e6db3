//! Post-hoc analysis of evolution runs and re-evaluations.

mod pareto;
mod stats;
mod surfaces;
mod trajectory;

pub use pareto::{
    hypervolume_2d, hypervolume_convergence, mean_confidence_series, pareto_front, pareto_indices,
    FrontPoint, FrontSnapshot, IntervalPoint, HV_REFERENCE,
};
pub use stats::{
    holm_bonferroni, mann_whitney_u, midranks, parameter_significance, HolmResult, MannWhitney,
    StatResult, EXACT_MAX_N, SIGNIFICANCE_ALPHA,
};
pub use surfaces::{
    distance_from_means, distance_matrix, mean_pair_distance, DistanceMatrix, SurfaceSample,
};
pub use trajectory::{
    kde_scott, knot_side_view, mean_spline, mean_spline_default, scott_factor, Kde2d, KdeGrid,
    DENSITY_KNOTS,
};
