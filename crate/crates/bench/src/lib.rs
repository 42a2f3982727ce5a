//! Shared fixtures for the benchmarks.

use charflow::scenario::preset;
use charflow::{GridFunction, Scenario};

/// Desk-scale scenario built from a preset.
pub fn scenario(name: &str) -> Scenario {
    Scenario::build(&preset(name).expect("preset")).expect("scenario")
}

pub fn initial(sc: &Scenario) -> GridFunction {
    sc.initial().expect("initial data")
}
