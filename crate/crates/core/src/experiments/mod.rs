//! End-to-end experiment harnesses: comparison-problem checks, slicing
//! inequalities, counterexample search, and the profile runs behind the CLI.
//!
//! Every experiment is driven by a serializable config carrying an explicit
//! seed, runs its quadratures in fixed reduction order, and emits an
//! [`report::ExperimentReport`] that is byte-identical across re-runs
//! regardless of thread count.

mod comparison;
mod counterexample;
mod grids;
mod profiles;
mod report;
mod slicing;

pub use comparison::{
    run_affirmative_chain, run_p1_monotonicity, verify_affirmative_chain,
    verify_p1_monotonicity, AffirmativeConfig, P1Config,
};
pub use counterexample::{run_search_counterexample, search_counterexample, CounterexampleConfig};
pub use grids::{build_grassmann_fn, BaseConfig, GridConfig};
pub use profiles::{run_cap_profile, run_decay_profile, CapProfileConfig, DecayProfileConfig};
pub use report::{assemble, ExperimentCore, ExperimentReport, Profile, RunOutput, Verdict};
pub use slicing::{
    run_general_slicing, run_pinched_gaussian_slicing, run_solmon_ratio, solmon_ratio,
    verify_general_slicing, verify_pinched_gaussian_slicing, GeneralSlicingConfig, PinchedConfig,
    SolmonConfig,
};

/// Stable, sorted catalog of runnable experiments with one-line descriptions.
pub fn experiment_catalog() -> &'static [(&'static str, &'static str)] {
    &[
        (
            "cap_profile",
            "cap-measure curve with bounds, order check and Haar Monte Carlo cross-check",
        ),
        (
            "decay_profile",
            "decay exponent of the dual transform of a compactly supported function",
        ),
        (
            "search_counterexample",
            "search for a comparison-problem counterexample g = h - eps f",
        ),
        (
            "solmon_ratio",
            "mixed-norm ratio for the dual transform (reported, not asserted)",
        ),
        (
            "verify_affirmative_chain",
            "admissible-class comparison chain for p > 1, link by link",
        ),
        (
            "verify_general_slicing",
            "general weighted slicing inequality with the distance estimate",
        ),
        (
            "verify_p1_monotonicity",
            "p = 1 comparison: mollified differences and the L1 limit",
        ),
        (
            "verify_pinched_gaussian_slicing",
            "pinched-Gaussian slicing with the explicit band factor",
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_is_sorted_and_complete() {
        let names: Vec<&str> = experiment_catalog().iter().map(|(n, _)| *n).collect();
        let mut sorted = names.clone();
        sorted.sort_unstable();
        assert_eq!(names, sorted);
        assert!(names.contains(&"verify_p1_monotonicity"));
        assert!(names.contains(&"search_counterexample"));
        assert_eq!(names.len(), 8);
    }
}
