//! Fine-scale two-field heat model: parameters, source term and solver.

pub mod params;
pub mod solver;

pub use params::{
    DimGroups, DimensionalScales, PiVariant, ReferenceValues, ScenarioConfig, SourceParams, dimensional_scales,
    dimensionless_groups, pi_coefficients, pi_source, pi_source_prime,
};
pub use solver::{FineConfig, FineSolver, FineState, RowTrace, SourceMode, StepStats};
