//! Scaling, blow-up monitors and the experiment runner.

pub mod experiment;
pub mod monitors;
pub mod rescale;

pub use experiment::{execute, run_experiment, DataRecipe, ExperimentConfig, ExperimentReport, GridSpec, RunOutcome, SolverChoice};
pub use monitors::{
    dyadic_scales, energy_slack, leray_monitor, vanishing_test, DiagnosticSet, DiagnosticsReport, EnergySlack, PairingPoint, Series,
};
pub use rescale::{critical_norm_series, dyadic_exponent, rescale_field, rescale_trajectory};
