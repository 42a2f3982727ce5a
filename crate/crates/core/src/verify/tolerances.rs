//! Tolerance manifest: a base tolerance at the reference step `ds = 1e-3`
//! and the convergence order used to relax it on coarser grids.

pub const REFERENCE_DS: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub base: f64,
    pub order: i32,
}

const MANIFEST: &[(&str, Tolerance)] = &[
    ("flow_group_law", Tolerance { base: 1e-9, order: 0 }),
    ("exit_time_consistency", Tolerance { base: 0.0, order: 0 }),
    ("flow_shift", Tolerance { base: 1e-9, order: 0 }),
    ("measure_invariance", Tolerance { base: 1e-6, order: 0 }),
    ("disintegration", Tolerance { base: 1e-2, order: 0 }),
    ("mild_formulation", Tolerance { base: 1e-4, order: 2 }),
    ("trace_inequality", Tolerance { base: 1e-6, order: 0 }),
    ("mollifier_contraction", Tolerance { base: 1e-10, order: 0 }),
    ("mollifier_convergence", Tolerance { base: 1e-3, order: 1 }),
    ("mollifier_commutation", Tolerance { base: 1e-3, order: 1 }),
    ("chain_rule", Tolerance { base: 1e-3, order: 2 }),
    ("green_formula", Tolerance { base: 1e-4, order: 2 }),
    ("lift_trace", Tolerance { base: 1e-5, order: 2 }),
    ("lift_norm_bound", Tolerance { base: 1e-6, order: 0 }),
    ("trace_lifting_inverse", Tolerance { base: 1e-5, order: 2 }),
    ("norm_bound_realized", Tolerance { base: 1e-12, order: 0 }),
    ("truncation_monotone", Tolerance { base: 1e-12, order: 0 }),
    ("hm_lambda_bound", Tolerance { base: 1e-10, order: 0 }),
    ("contraction", Tolerance { base: 1e-10, order: 0 }),
    ("growth_bound", Tolerance { base: 1e-10, order: 0 }),
    ("free_norm_balance", Tolerance { base: 1e-3, order: 1 }),
    ("trace_accumulation", Tolerance { base: 1e-3, order: 1 }),
    ("free_semigroup_law", Tolerance { base: 1e-14, order: 0 }),
    ("binomial_convolution", Tolerance { base: 1e-8, order: 0 }),
    ("iterate_commutation", Tolerance { base: 1e-3, order: 2 }),
    ("iterate_trace_bound", Tolerance { base: 1e-3, order: 1 }),
    ("truncated_norm_bound", Tolerance { base: 1e-10, order: 0 }),
    ("series_equals_march", Tolerance { base: 1e-10, order: 0 }),
    ("isometry", Tolerance { base: 1e-12, order: 0 }),
    ("resolvent_identity", Tolerance { base: 1e-3, order: 1 }),
    ("resolvent_boundary_condition", Tolerance { base: 1e-8, order: 0 }),
    ("g_lambda_energy", Tolerance { base: 1e-4, order: 2 }),
    ("g_lambda_range", Tolerance { base: 1e-8, order: 0 }),
    ("m_lambda_contraction", Tolerance { base: 1e-12, order: 0 }),
    ("resolvent_norm_bound", Tolerance { base: 1e-8, order: 0 }),
    ("pure_xi_green", Tolerance { base: 1e-4, order: 2 }),
    ("dyson_laplace", Tolerance { base: 1e-4, order: 2 }),
    ("a_priori_estimate", Tolerance { base: 1e-6, order: 0 }),
];

/// Every check name known to the manifest.
pub fn check_names() -> impl Iterator<Item = &'static str> {
    MANIFEST.iter().map(|(n, _)| *n)
}

pub fn lookup(name: &str) -> Option<Tolerance> {
    MANIFEST.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Tolerance of `name` at grid step `ds`. Finer grids keep the reference
/// value; coarser grids relax it by `(ds / REFERENCE_DS)^order`.
pub fn tolerance(name: &str, ds: f64) -> f64 {
    let t = lookup(name).unwrap_or_else(|| panic!("no tolerance registered for `{name}`"));
    t.base * (ds / REFERENCE_DS).max(1.0).powi(t.order)
}
