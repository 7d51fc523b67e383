//! Impedance matching, parameter sweeps and fitting.
//!
//! Every objective here is the simulated first-echo efficiency from
//! [`crate::time::run_echo_experiment`]; the analytic estimates are carried
//! alongside for comparison only.

mod compare;
mod fit;
mod golden;
mod matching;
mod sweep;

pub use compare::{compare_matched_open, Comparison, VariantSummary};
pub use fit::{fit_device, fit_device_with, FitOptions, FitParam, FitResult, KappaMode};
pub use golden::{golden_section_max, GoldenResult};
pub use matching::{
    default_kappa_bounds, optimize_kappa, optimize_kappa_with, scan_kappa, KappaScan, MatchOptions, MatchResult,
};
pub use sweep::{sweep_detuning, sweep_detuning_with, CombScaling, SweepOptions, SweepRecord, SweepResult};
