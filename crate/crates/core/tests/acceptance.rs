//! Acceptance run: one line per criterion, nonzero exit if any fails.

mod common;

use std::f64::consts::PI;
use std::process::ExitCode;

use charflow::boundary::{growth_bound, truncated_norms};
use charflow::flow::{check_measure_invariance, BoundingBox};
use charflow::grid::mollify;
use charflow::resolvent::resolvent_apply;
use charflow::scenario::{preset, PairingRule, Scenario};
use charflow::semigroup::{dyson_run, evolve_full, series_evolve, Marcher, Mode};
use charflow::verify::{chain_rule_residual, green_residual};
use charflow::{GridFunction, Side, TraceSpace};
use common::{preset_with_alpha, ray_trace, slab, slab_closed_form, Trig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TOL_CLOSED_FORM: f64 = 1e-8;
const TOL_SERIES: f64 = 1e-10;
const TOL_CONTRACTION_STEP: f64 = 1e-10;
const TOL_GROWTH_INTEGER: f64 = 1e-8;
const TOL_RESOLVENT_L2: f64 = 1e-6;
const TOL_RESOLVENT_RESIDUAL: f64 = 1e-3;
const TOL_LAPLACE: f64 = 1e-4;
const TOL_GREEN_SLAB: f64 = 1e-4;
const TOL_GREEN_DISK: f64 = 1e-3;
const TOL_CHAIN_RULE: f64 = 1e-3;
const TOL_TRACE_SLACK: f64 = 1e-6;
const TOL_MOLLIFIER_CONTRACTION: f64 = 1e-10;
const TOL_MOLLIFIER_CONVERGENCE: f64 = 1e-3;
const TOL_BINOMIAL: f64 = 1e-8;
const TOL_ISOMETRY: f64 = 1e-12;
const LINEAR_DISTORTION_REL: f64 = 0.02;

struct Line {
    id: u32,
    name: &'static str,
    passed: bool,
    detail: String,
}

fn line(id: u32, name: &'static str, passed: bool, detail: String) -> Line {
    Line { id, name, passed, detail }
}

fn sin_pi(x: f64) -> f64 {
    (PI * x).sin()
}

fn closed_form_semigroup() -> Line {
    let alpha = 0.5;
    let sc = slab(alpha);
    let f = GridFunction::from_fn(sc.grid.clone(), 2.0, |x| sin_pi(x[0])).unwrap();
    let mut worst = 0.0f64;
    let mut ray_gap = 0.0f64;
    for t in [0.5, 1.5, 2.5] {
        let u = evolve_full(&f, t, &sc.boundary, Mode::ExactShift).unwrap();
        let xs = sc.grid.positions();
        let oracle: Vec<f64> = xs.iter().map(|x| slab_closed_form(sin_pi, alpha, t, x[0])).collect();
        for (x, o) in xs.iter().zip(&oracle) {
            let r = ray_trace(&sc.flow, [1.0, 0.0], *x, t, alpha, |y| sin_pi(y[0]));
            ray_gap = ray_gap.max((r - o).abs());
        }
        worst = worst.max(u.sub(&u.with_values(oracle)).lp_norm());
    }
    line(
        1,
        "closed_form_semigroup",
        worst <= TOL_CLOSED_FORM && ray_gap <= 1e-9,
        format!("L2 error {worst:.3e} (tol {TOL_CLOSED_FORM:e}); ray tracing vs closed form {ray_gap:.3e}"),
    )
}

fn series_equals_direct() -> Line {
    let sc = slab(0.5);
    let f = GridFunction::from_fn(sc.grid.clone(), 2.0, |x| sin_pi(x[0])).unwrap();
    let mut worst = 0.0f64;
    for t in [0.5f64, 1.5, 2.5] {
        let k = t.ceil() as usize + 1;
        let s = series_evolve(&f, t, &sc.boundary, Some(k)).unwrap();
        let d = evolve_full(&f, t, &sc.boundary, Mode::ExactShift).unwrap();
        worst = worst.max(s.sub(&d).lp_norm());
    }
    line(2, "series_equals_direct", worst <= TOL_SERIES, format!("L2 gap {worst:.3e} (tol {TOL_SERIES:e})"))
}

fn contraction() -> Line {
    let cases = [
        ("slab alpha=0.5", preset_with_alpha("slab1d", 0.5, PairingRule::Identity)),
        ("slab alpha=1", preset_with_alpha("slab1d", 1.0, PairingRule::Identity)),
        ("triangle cyclic alpha=1", preset("triangle_graph").unwrap()),
    ];
    let mut worst = f64::NEG_INFINITY;
    let mut norms = Vec::new();
    for (label, cfg) in cases {
        let sc = Scenario::build(&cfg).unwrap();
        let a = sc.boundary.operator_norm(&sc.grid, 2.0).unwrap().value;
        norms.push(format!("{label}: |||H||| = {a}"));
        let f = GridFunction::from_fn(sc.grid.clone(), 2.0, |x| sin_pi(x[0]) + 0.3 * x[1]).unwrap();
        let mut m = Marcher::new(&f, &sc.boundary).unwrap();
        let mut prev = f.lp_norm();
        for _ in 0..300 {
            m.step();
            let n = m.state().lp_norm();
            worst = worst.max(n - prev);
            prev = n;
        }
    }
    line(
        3,
        "contraction",
        worst <= TOL_CONTRACTION_STEP,
        format!("max per-step increase {worst:.3e} (tol {TOL_CONTRACTION_STEP:e}); {}", norms.join(", ")),
    )
}

fn growth() -> Line {
    let alpha = 2.0;
    let delta = 0.99;
    let sc = slab(alpha);
    let a = sc.boundary.operator_norm(&sc.grid, 2.0).unwrap().value;
    let (_, c) = truncated_norms(&sc.boundary, &sc.grid, 2.0, &[delta]).unwrap();
    let g = growth_bound(a, c, delta).unwrap();
    let constants_ok = (g.m - 4.0).abs() <= 1e-12 && (g.omega - 2f64.ln() / 0.99).abs() <= 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut excess = f64::NEG_INFINITY;
    let mut integer_gap = 0.0f64;
    let ds = sc.grid.ds();
    for _ in 0..20 {
        let r = Trig::sample(&mut rng, 6.0);
        let (r0, r1) = (r.eval([0.0, 0.0]), r.eval([1.0, 0.0]));
        // Shift by a linear term so that f(0) = alpha f(1).
        let kappa = alpha * r1 - r0;
        let f = GridFunction::from_fn(sc.grid.clone(), 2.0, |x| r.eval(x) + kappa * (1.0 - x[0])).unwrap();
        let norm = f.lp_norm();
        let mut m = Marcher::new(&f, &sc.boundary).unwrap();
        for n in 1..=5000usize {
            m.step();
            if n % 10 != 0 {
                continue;
            }
            let t = n as f64 * ds;
            let ratio = m.state().lp_norm() / norm;
            excess = excess.max(ratio - g.m * (g.omega * t).exp());
            if n % 1000 == 0 {
                integer_gap = integer_gap.max((ratio - 2f64.powi((n / 1000) as i32)).abs());
            }
        }
    }
    line(
        4,
        "growth_bound",
        constants_ok && excess <= 0.0 && integer_gap <= TOL_GROWTH_INTEGER,
        format!(
            "(M, omega) = ({}, {}); max ratio - M e^(omega t) = {excess:.3e}; integer-time gap {integer_gap:.3e} (tol {TOL_GROWTH_INTEGER:e})",
            g.m, g.omega
        ),
    )
}

fn resolvent() -> Line {
    let alpha = 0.5;
    let sc = slab(alpha);
    let g = GridFunction::from_fn(sc.grid.clone(), 2.0, |_| 1.0).unwrap();
    let (f, report) = resolvent_apply(&g, 1.0, &sc.boundary, 1e-14).unwrap();
    let e = (-1.0f64).exp();
    let beta = alpha * (1.0 - e) / (1.0 - alpha * e);
    let exact = f.with_values(sc.grid.positions().iter().map(|x| 1.0 - (-x[0]).exp() + beta * (-x[0]).exp()).collect());
    let err = f.sub(&exact).lp_norm();
    line(
        5,
        "resolvent_closed_form",
        err <= TOL_RESOLVENT_L2 && report.residual <= TOL_RESOLVENT_RESIDUAL,
        format!(
            "L2 error {err:.3e} (tol {TOL_RESOLVENT_L2:e}); identity residual {:.3e} (tol {TOL_RESOLVENT_RESIDUAL:e}); beta = {beta:.6}",
            report.residual
        ),
    )
}

fn laplace_gap(sc: &Scenario, g: &GridFunction, lambda: f64) -> f64 {
    let (r, _) = resolvent_apply(g, lambda, &sc.boundary, 1e-14).unwrap();
    let ds = sc.grid.ds();
    let steps = 20_000;
    let mut acc = g.scaled(0.5 * ds);
    let mut m = Marcher::new(g, &sc.boundary).unwrap();
    for n in 1..=steps {
        m.step();
        let w = if n == steps { 0.5 } else { 1.0 } * ds * (-lambda * n as f64 * ds).exp();
        acc.add_scaled(w, &m.state());
    }
    acc.sub(&r).lp_norm()
}

fn laplace() -> Line {
    let sc = slab(0.5);
    let lambda = 2.0;
    // sin(pi x) satisfies g(0) = alpha g(1), so t -> U_H(t) g has no jumps
    // and the trapezoid rule in time is second order. g = 1 does not; its
    // O(ds) gap is reported alongside.
    let smooth = GridFunction::from_fn(sc.grid.clone(), 2.0, |x| sin_pi(x[0])).unwrap();
    let gap = laplace_gap(&sc, &smooth, lambda);
    let one = GridFunction::from_fn(sc.grid.clone(), 2.0, |_| 1.0).unwrap();
    let gap_one = laplace_gap(&sc, &one, lambda);
    line(
        6,
        "laplace_cross_check",
        gap <= TOL_LAPLACE,
        format!("L2 gap {gap:.3e} for g = sin(pi x) (tol {TOL_LAPLACE:e}); incompatible g = 1 gives {gap_one:.3e}"),
    )
}

fn green() -> Line {
    let sc = slab(0.5);
    let f = GridFunction::from_fn(sc.grid.clone(), 2.0, |x| x[0]).unwrap();
    let slab_res = green_residual(&f).unwrap();
    let disk = Scenario::build(&preset("disk2d").unwrap()).unwrap();
    let bump = GridFunction::from_fn(disk.grid.clone(), 2.0, |x| {
        (-((x[0] - 0.2).powi(2) + (x[1] + 0.1).powi(2)) / 0.3).exp()
    })
    .unwrap();
    let disk_res = green_residual(&bump).unwrap();
    line(
        7,
        "green_formula",
        slab_res <= TOL_GREEN_SLAB && disk_res <= TOL_GREEN_DISK,
        format!("slab {slab_res:.3e} (tol {TOL_GREEN_SLAB:e}); disk {disk_res:.3e} (tol {TOL_GREEN_DISK:e})"),
    )
}

fn chain_rule() -> Line {
    let sc = slab(0.5);
    let mut parts = Vec::new();
    let mut worst = 0.0f64;
    for p in [2.0, 3.0] {
        let f = GridFunction::from_fn(sc.grid.clone(), p, |x| sin_pi(x[0])).unwrap();
        let r = chain_rule_residual(&f).unwrap();
        worst = worst.max(r);
        parts.push(format!("p={p}: {r:.3e}"));
    }
    line(8, "chain_rule", worst <= TOL_CHAIN_RULE, format!("{} (tol {TOL_CHAIN_RULE:e})", parts.join(", ")))
}

fn trace_inequality() -> Line {
    let sc = Scenario::build(&preset("disk2d").unwrap()).unwrap();
    let p = 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut slack = f64::NEG_INFINITY;
    let mut spaces_differ = false;
    for _ in 0..50 {
        let r = Trig::sample(&mut rng, 4.0);
        let f = GridFunction::from_fn(sc.grid.clone(), p, |x| r.eval(x)).unwrap();
        let rhs = 2f64.powf(p - 1.0) * (f.lp_norm_pow() + f.apply_generator().unwrap().lp_norm_pow());
        for side in [Side::Incoming, Side::Outgoing] {
            let tr = f.trace(side).unwrap();
            let (y, yt) = (tr.norm(TraceSpace::Y), tr.norm(TraceSpace::YTilde));
            spaces_differ |= (y - yt).abs() > 1e-6 * yt;
            slack = slack.max(y.powf(p) - rhs);
        }
    }
    line(
        9,
        "trace_inequality",
        slack <= TOL_TRACE_SLACK && spaces_differ,
        format!("max lhs - rhs {slack:.3e} (tol {TOL_TRACE_SLACK:e}); Y and Y~ norms differ: {spaces_differ}"),
    )
}

fn mollification() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut excess = f64::NEG_INFINITY;
    for name in ["slab1d", "disk2d"] {
        let sc = Scenario::build(&preset(name).unwrap()).unwrap();
        let mut fs = vec![GridFunction::from_fn(sc.grid.clone(), 2.0, |x| sin_pi(x[0])).unwrap()];
        for _ in 0..4 {
            let r = Trig::sample(&mut rng, 4.0);
            fs.push(GridFunction::from_fn(sc.grid.clone(), 2.0, |x| r.eval(x)).unwrap());
        }
        for f in &fs {
            for n in [16, 64, 256] {
                excess = excess.max(mollify(f, n).unwrap().lp_norm() - f.lp_norm());
            }
        }
    }
    let sc = slab(0.5);
    let dist = |g: &dyn Fn(f64) -> f64| {
        let f = GridFunction::from_fn(sc.grid.clone(), 2.0, |x| g(x[0])).unwrap();
        mollify(&f, 256).unwrap().sub(&f).lp_norm()
    };
    let gentle = [dist(&|x| 0.1 * sin_pi(x)), dist(&|x| 0.1 * x), dist(&|x| 0.1 * (3.0 * x).sin())];
    let worst = gentle.iter().copied().fold(0.0, f64::max);
    let unit = dist(&|x| x);
    line(
        10,
        "mollification",
        excess <= TOL_MOLLIFIER_CONTRACTION && worst <= TOL_MOLLIFIER_CONVERGENCE,
        format!(
            "max norm excess {excess:.3e} (tol {TOL_MOLLIFIER_CONTRACTION:e}); n=256 error for Lipschitz <= 0.3 data {worst:.3e} (tol {TOL_MOLLIFIER_CONVERGENCE:e}); for f = x the first-moment bias gives {unit:.3e}"
        ),
    )
}

fn binomial() -> Line {
    let sc = slab(0.5);
    let f = GridFunction::from_fn(sc.grid.clone(), 2.0, |x| sin_pi(x[0])).unwrap();
    let (t, s) = (0.7, 0.8);
    let whole = dyson_run(&f, t + s, &sc.boundary, 3).unwrap();
    let first = dyson_run(&f, s, &sc.boundary, 3).unwrap();
    let mut worst = 0.0f64;
    for k in 0..=3usize {
        let mut sum = GridFunction::zeros(sc.grid.clone(), 2.0).unwrap();
        for j in 0..=k {
            let u = dyson_run(&first.iterates[k - j], t, &sc.boundary, j).unwrap();
            sum.add_scaled(1.0, &u.iterates[j]);
        }
        worst = worst.max(sum.sub(&whole.iterates[k]).lp_norm());
    }
    line(11, "binomial_convolution", worst <= TOL_BINOMIAL, format!("L2 residual {worst:.3e} (tol {TOL_BINOMIAL:e})"))
}

fn isometry_controls() -> Line {
    let sc = Scenario::build(&preset("rotation2d").unwrap()).unwrap();
    let f = sc.initial().unwrap();
    let mut drift = 0.0f64;
    for t in [0.5, 1.0, 2.5] {
        let u = evolve_full(&f, t, &sc.boundary, Mode::ExactShift).unwrap();
        drift = drift.max((u.lp_norm() - f.lp_norm()).abs() / f.lp_norm());
    }
    let lin = preset("linear1d").unwrap();
    let field = lin.field.to_field();
    let residual = check_measure_invariance(&field, &BoundingBox::interval(1.0, 2.0), 1.0, 64).unwrap();
    let target = std::f64::consts::E - 1.0;
    let rel = (residual - target).abs() / target;
    let suite = charflow::verify::run_suite(&lin).unwrap();
    let flagged = suite.iter().any(|c| c.name == "measure_invariance" && c.failed());
    line(
        12,
        "isometry_controls",
        drift <= TOL_ISOMETRY && rel <= LINEAR_DISTORTION_REL && flagged,
        format!(
            "rotation norm drift {drift:.3e} (tol {TOL_ISOMETRY:e}); linear distortion {residual:.6} vs e-1 (rel {rel:.2e}); verify flags it: {flagged}"
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [fn() -> Line; 12] = [
        closed_form_semigroup,
        series_equals_direct,
        contraction,
        growth,
        resolvent,
        laplace,
        green,
        chain_rule,
        trace_inequality,
        mollification,
        binomial,
        isometry_controls,
    ];
    let mut failed = 0;
    for c in criteria {
        let l = c();
        if !l.passed {
            failed += 1;
        }
        println!("{} [{:>2}] {}: {}", if l.passed { "PASS" } else { "FAIL" }, l.id, l.name, l.detail);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
