//! The perturbed operator `P(z)` discretized on a grid of `S^{d-1} × A`.

mod function;
mod grid;
mod operator;
mod probes;
mod resolvent;
mod spectral;

pub use function::{holder_seminorm, isotypic_split, random_probe, t_norm, GridFunction, HolderNorm};
pub use grid::StateGrid;
pub use operator::{build_operator, build_operator_eta, DiscretizedOperator, ETA};
pub use probes::{
    cocycle_bounds, contraction_coefficients, doeblin_fortet_fit, dolgopyat_probe, drift_check, regular_points, t_norm_iterate_ratio, weighted_words,
    CocycleBounds, DoeblinFortet, DolgopyatResult, DriftBound, DriftTable,
};
pub use resolvent::{
    class_drifts, neumann_series, resolvent_apply, resolvent_norm_estimate, resolvent_scan, resolvent_scan_with, Resolvent, ResolventScan, ScanPoint,
    UOperator, DEFAULT_POWER_STEPS, DEFAULT_PROBES, RESIDUAL_TOL, SINGULAR_TOL, ZERO_STEP,
};
pub use spectral::{analyze_stochastic, spectral_data, spectral_radius_bound, SpectralData, StochasticAnalysis, GAP_TOL, MAX_CLASSES};
