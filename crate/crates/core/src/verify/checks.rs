use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::functions::{inlet_vanishing, interior_profile, smooth, RandomSmooth};
use super::{chain_rule_residual, green_residual, tolerance, CheckResult};
use crate::boundary::{delta_grid, growth_bound, truncated_norms};
use crate::error::Result;
use crate::flow::{check_measure_invariance, BoundingBox, Direction, Domain, DomainKind, Point};
use crate::grid::{lift_outgoing_trace, mollify, GridFunction, Side, TraceSpace, TraceVector};
use crate::resolvent::{c_lambda, g_lambda, m_lambda, resolvent_apply, solve_bvp, xi_lambda};
use crate::scenario::{Scenario, TestFunction};
use crate::semigroup::{default_series_terms, dyson_run, evolve_free, evolve_full, series_evolve, DysonRun, Marcher, Mode};

pub(super) enum Outcome {
    Measured { residual: f64, slack: f64, note: String },
    Skipped(String),
}

fn measured(residual: f64) -> Result<Outcome> {
    Ok(Outcome::Measured { residual, slack: 0.0, note: String::new() })
}

fn measured_with(residual: f64, note: String) -> Result<Outcome> {
    Ok(Outcome::Measured { residual, slack: 0.0, note })
}

fn skip(reason: &str) -> Result<Outcome> {
    Ok(Outcome::Skipped(reason.into()))
}

const NO_BOUNDARY: &str = "grid has no boundary characteristics";
const GRAPH_FLOW: &str = "graph transport has no spatial vector field";

type Check = fn(&Ctx) -> Result<Outcome>;

pub(super) const CHECKS: &[(&str, Check)] = &[
    ("flow_group_law", flow_group_law),
    ("exit_time_consistency", exit_time_consistency),
    ("measure_invariance", measure_invariance),
    ("flow_shift", flow_shift),
    ("disintegration", disintegration),
    ("mild_formulation", mild_formulation),
    ("trace_inequality", trace_inequality),
    ("mollifier_contraction", mollifier_contraction),
    ("mollifier_convergence", mollifier_convergence),
    ("mollifier_commutation", mollifier_commutation),
    ("chain_rule", chain_rule),
    ("green_formula", green_formula),
    ("lift_trace", lift_trace),
    ("lift_norm_bound", lift_norm_bound),
    ("trace_lifting_inverse", trace_lifting_inverse),
    ("norm_bound_realized", norm_bound_realized),
    ("truncation_monotone", truncation_monotone),
    ("hm_lambda_bound", hm_lambda_bound),
    ("contraction", contraction),
    ("growth_bound", growth_bound_check),
    ("free_norm_balance", free_norm_balance),
    ("trace_accumulation", trace_accumulation),
    ("free_semigroup_law", free_semigroup_law),
    ("binomial_convolution", binomial_convolution),
    ("iterate_commutation", iterate_commutation),
    ("iterate_trace_bound", iterate_trace_bound),
    ("truncated_norm_bound", truncated_norm_bound),
    ("series_equals_march", series_equals_march),
    ("isometry", isometry),
    ("resolvent_identity", resolvent_identity),
    ("resolvent_boundary_condition", resolvent_boundary_condition),
    ("g_lambda_energy", g_lambda_energy),
    ("g_lambda_range", g_lambda_range),
    ("m_lambda_contraction", m_lambda_contraction),
    ("resolvent_norm_bound", resolvent_norm_bound),
    ("pure_xi_green", pure_xi_green),
    ("dyson_laplace", dyson_laplace),
    ("a_priori_estimate", a_priori_estimate),
];

/// Checks on the flow itself, which stay meaningful when the measure is not
/// preserved.
pub(super) fn is_flow_check(name: &str) -> bool {
    matches!(name, "flow_group_law" | "exit_time_consistency" | "measure_invariance" | "flow_shift")
}

pub(super) struct Ctx<'a> {
    sc: &'a Scenario,
    seed: u64,
    label: String,
}

impl<'a> Ctx<'a> {
    pub(super) fn new(sc: &'a Scenario, seed: u64) -> Self {
        let g = &sc.grid;
        let label = format!(
            "scenario={} chars={} nodes={} ds={:e} p={}",
            sc.config.name,
            g.characteristics().len(),
            g.n_nodes(),
            g.ds(),
            sc.p()
        );
        Self { sc, seed, label }
    }

    fn tol(&self, name: &str) -> f64 {
        tolerance(name, self.sc.grid.ds())
    }

    pub(super) fn run(&self, name: &str, check: Check) -> CheckResult {
        let tol = self.tol(name);
        match check(self) {
            Ok(Outcome::Measured { residual, slack, note }) => {
                CheckResult::measured(name, residual, tol + slack, &self.label, note)
            }
            Ok(Outcome::Skipped(reason)) => CheckResult::skipped(name, tol, &self.label, reason),
            Err(e) => CheckResult::errored(name, tol, &self.label, &e),
        }
    }

    pub(super) fn skip(&self, name: &str, reason: String) -> CheckResult {
        CheckResult::skipped(name, self.tol(name), &self.label, reason)
    }

    /// Independent stream per check.
    fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt)
    }

    fn p(&self) -> f64 {
        self.sc.p()
    }

    fn ds(&self) -> f64 {
        self.sc.grid.ds()
    }

    fn has_boundary(&self) -> bool {
        self.sc.grid.has_boundary()
    }

    fn is_graph(&self) -> bool {
        self.sc.domain.kind() == DomainKind::GraphEdgeSet
    }

    fn sample(&self, f: impl Fn(Point) -> f64) -> Result<GridFunction> {
        GridFunction::from_fn(self.sc.grid.clone(), self.p(), f)
    }

    /// Function of relative arc time `s / length` on every characteristic.
    fn profile(&self, prof: fn(f64) -> f64) -> Result<GridFunction> {
        let grid = self.sc.grid.clone();
        let lengths: Vec<f64> = grid.characteristics().iter().map(|c| c.length).collect();
        GridFunction::from_char_fn(grid, self.p(), |i, s| prof(s / lengths[i]))
    }

    /// `0.1 sin(s)` in arc time, periodic on closed orbits: Lipschitz
    /// constant 0.1 and zero at every inlet, so the mollifier error is its
    /// first-moment bias alone.
    fn gentle(&self) -> Result<GridFunction> {
        let grid = self.sc.grid.clone();
        let periods: Vec<Option<f64>> =
            grid.characteristics().iter().map(|c| c.is_interior_loop.then_some(c.length)).collect();
        GridFunction::from_char_fn(grid, self.p(), |i, s| match periods[i] {
            Some(t) => 0.1 * t / std::f64::consts::TAU * (std::f64::consts::TAU * s / t).sin(),
            None => 0.1 * s.sin(),
        })
    }

    fn initial(&self) -> Result<GridFunction> {
        self.sc.initial()
    }

    fn random_functions(&self, salt: u64, count: usize) -> Result<Vec<GridFunction>> {
        let mut rng = self.rng(salt);
        let mut out = vec![self.sample(smooth)?];
        for _ in 0..count {
            let r = RandomSmooth::sample(&mut rng);
            out.push(self.sample(|x| r.eval(x))?);
        }
        Ok(out)
    }

    fn random_trace(&self, rng: &mut ChaCha8Rng, side: Side) -> Result<TraceVector> {
        let grid = self.sc.grid.clone();
        let n = grid.side_chars(side).len();
        let values = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        TraceVector::new(grid, side, values, self.p())
    }

    fn norm_of_h(&self) -> Result<f64> {
        Ok(self.sc.boundary.operator_norm(&self.sc.grid, self.p())?.value)
    }

    fn deltas(&self) -> Vec<f64> {
        delta_grid(self.sc.config.delta0(), crate::semigroup::DEFAULT_DELTA_LEVELS)
    }

    /// `t` rounded to the grid step.
    fn aligned(&self, t: f64) -> f64 {
        (t / self.ds()).round() * self.ds()
    }

    /// Point at arc time `s` along characteristic `i`.
    fn char_point(&self, i: usize, s: f64) -> Result<Point> {
        match &self.sc.domain {
            Domain::Graph { edges } => Ok(edges[i].at(s)),
            _ => self.sc.flow.integrate(self.sc.grid.characteristics()[i].inlet, s),
        }
    }

    /// A few interior sample points, spread over the characteristics.
    fn sample_points(&self) -> Vec<Point> {
        let g = &self.sc.grid;
        let n = g.characteristics().len();
        let stride = (n / 12).max(1);
        (0..n)
            .step_by(stride)
            .flat_map(|i| {
                let c = &g.characteristics()[i];
                [c.nodes() / 3, (2 * c.nodes()) / 3]
                    .into_iter()
                    .filter(|&j| j > 0 && j < c.nodes() - 1)
                    .map(move |j| g.position(i, j))
            })
            .collect()
    }
}

// ---- flow ----

fn flow_group_law(ctx: &Ctx) -> Result<Outcome> {
    if ctx.is_graph() {
        return skip(GRAPH_FLOW);
    }
    let flow = &ctx.sc.flow;
    let (s, t) = (0.3, 0.45);
    let mut worst = 0.0f64;
    for x in ctx.sample_points() {
        let a = flow.integrate(flow.integrate(x, s)?, t)?;
        let b = flow.integrate(x, s + t)?;
        let scale = b[0].hypot(b[1]).max(1.0);
        worst = worst.max((a[0] - b[0]).hypot(a[1] - b[1]) / scale);
    }
    measured(worst)
}

fn exit_time_consistency(ctx: &Ctx) -> Result<Outcome> {
    if ctx.is_graph() {
        return skip(GRAPH_FLOW);
    }
    let flow = &ctx.sc.flow;
    let domain = flow.domain();
    let mut tested = 0;
    let mut bad = 0;
    for x in ctx.sample_points() {
        let v = flow.field().eval(x);
        let eps = 1e-7 * domain.diameter() / v[0].hypot(v[1]).max(1e-300);
        for (dir, sign) in [(Direction::Backward, -1.0), (Direction::Forward, 1.0)] {
            let exit = flow.exit_time(x, dir)?;
            if exit.capped || exit.time <= 2.0 * eps {
                continue;
            }
            tested += 1;
            let inside = domain.contains(flow.integrate(x, sign * (exit.time - eps))?);
            let outside = !domain.contains(flow.integrate(x, sign * (exit.time + eps))?);
            if !(inside && outside) {
                bad += 1;
            }
        }
    }
    if tested == 0 {
        return skip("no sampled point has a finite stay time");
    }
    measured_with(bad as f64, format!("{tested} crossings tested"))
}

pub(super) fn measure_invariance(ctx: &Ctx) -> Result<Outcome> {
    let cell = match ctx.sc.domain {
        Domain::Graph { .. } => return skip("graph measures are atoms on edges"),
        Domain::Interval { lo, hi } => BoundingBox::interval(lo, hi),
        ref d => {
            let bb = d.bounding_box();
            let c = [0.5 * (bb.lo[0] + bb.hi[0]), 0.5 * (bb.lo[1] + bb.hi[1])];
            let h = [0.25 * (bb.hi[0] - bb.lo[0]), 0.25 * (bb.hi[1] - bb.lo[1])];
            BoundingBox::rect([c[0] - h[0], c[1] - h[1]], [c[0] + h[0], c[1] + h[1]])
        }
    };
    measured(check_measure_invariance(ctx.sc.flow.field(), &cell, 1.0, 64)?)
}

fn flow_shift(ctx: &Ctx) -> Result<Outcome> {
    if ctx.is_graph() {
        return skip(GRAPH_FLOW);
    }
    let g = &ctx.sc.grid;
    let flow = &ctx.sc.flow;
    let chars: Vec<usize> = g.outlets().to_vec();
    if chars.is_empty() {
        return skip(NO_BOUNDARY);
    }
    let stride = (chars.len() / 12).max(1);
    let mut worst = 0.0f64;
    for &i in chars.iter().step_by(stride) {
        let c = &g.characteristics()[i];
        let s = c.length / 3.0;
        let z = flow.integrate(c.inlet, s)?;
        let times = flow.exit_times(z)?;
        worst = worst.max((times.tau_plus - (c.length - s)).abs()).max((times.tau_minus - s).abs());
    }
    measured(worst / flow.domain().diameter())
}

// ---- grid ----

fn simpson(a: f64, b: f64, panels: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    let n = panels + panels % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

fn disintegration(ctx: &Ctx) -> Result<Outcome> {
    let p = ctx.p();
    let domain = &ctx.sc.domain;
    let h = |x: Point| TestFunction::Bump.eval(x, domain).abs().powf(p);
    let on_grid = ctx.sc.function(TestFunction::Bump)?.lp_norm_pow();
    let direct = match (domain, &ctx.sc.config.measure) {
        (Domain::Interval { lo, hi }, _) => simpson(*lo, hi.min(lo + 2.0), 20_000, |s| h([s, 0.0])),
        (Domain::Graph { edges }, m) => {
            let weights = match m {
                crate::scenario::MeasureConfig::GraphAtoms { weights } => weights.clone(),
                _ => vec![1.0; edges.len()],
            };
            edges.iter().zip(weights).map(|(e, w)| w * simpson(0.0, e.length(), 4000, |s| h(e.at(s)))).sum()
        }
        (d, _) => {
            let bb = d.bounding_box();
            let m = 1500;
            let (dx, dy) = ((bb.hi[0] - bb.lo[0]) / m as f64, (bb.hi[1] - bb.lo[1]) / m as f64);
            let mut acc = 0.0;
            for a in 0..m {
                for b in 0..m {
                    let x = [bb.lo[0] + (a as f64 + 0.5) * dx, bb.lo[1] + (b as f64 + 0.5) * dy];
                    if d.contains(x) {
                        acc += h(x);
                    }
                }
            }
            acc * dx * dy
        }
    };
    if !(direct > 0.0) {
        return skip("test bump has no mass in the domain");
    }
    measured_with((on_grid - direct).abs() / direct, format!("grid {on_grid:.6e}, direct {direct:.6e}"))
}

fn mild_formulation(ctx: &Ctx) -> Result<Outcome> {
    let f = ctx.sample(smooth)?;
    let tf = f.apply_generator()?;
    let g = &ctx.sc.grid;
    let ds = ctx.ds();
    let mut worst = 0.0f64;
    for (i, c) in g.characteristics().iter().enumerate() {
        let m = if c.is_interior_loop { c.nodes() / 2 } else { c.last() };
        if m < 2 {
            continue;
        }
        let v = f.char_values(i);
        let t = tf.char_values(i);
        let integral = ds * (0.5 * t[0] + t[1..m].iter().sum::<f64>() + 0.5 * t[m]);
        worst = worst.max((v[0] - v[m] - integral).abs());
    }
    measured(worst)
}

fn trace_inequality(ctx: &Ctx) -> Result<Outcome> {
    if !ctx.has_boundary() {
        return skip(NO_BOUNDARY);
    }
    let p = ctx.p();
    let mut worst = f64::NEG_INFINITY;
    for f in ctx.random_functions(11, 8)? {
        let rhs = 2f64.powf(p - 1.0) * (f.lp_norm_pow() + f.apply_generator()?.lp_norm_pow());
        for side in [Side::Incoming, Side::Outgoing] {
            let lhs = f.trace(side)?.norm_pow(TraceSpace::Y);
            worst = worst.max((lhs - rhs) / rhs);
        }
    }
    measured_with(worst.max(0.0), format!("largest (lhs - rhs) / rhs = {worst:.3e}"))
}

fn mollifier_orders(ctx: &Ctx) -> Vec<usize> {
    [16, 64, 256].into_iter().filter(|&n| 1.0 / n as f64 >= ctx.ds()).collect()
}

fn mollifier_contraction(ctx: &Ctx) -> Result<Outcome> {
    let orders = mollifier_orders(ctx);
    if orders.is_empty() {
        return skip("grid too coarse for the smallest mollifier");
    }
    let mut fs = ctx.random_functions(13, 4)?;
    fs.push(ctx.profile(inlet_vanishing)?);
    let mut worst = 0.0f64;
    for f in &fs {
        let norm = f.lp_norm();
        for &n in &orders {
            worst = worst.max((mollify(f, n)?.lp_norm() - norm) / norm);
        }
    }
    measured(worst.max(0.0))
}

fn mollifier_convergence(ctx: &Ctx) -> Result<Outcome> {
    let Some(&n) = mollifier_orders(ctx).last() else {
        return skip("grid too coarse for the smallest mollifier");
    };
    let f = ctx.gentle()?;
    let err = mollify(&f, n)?.sub(&f).lp_norm();
    measured_with(err, format!("n = {n}"))
}

fn mollifier_commutation(ctx: &Ctx) -> Result<Outcome> {
    if mollifier_orders(ctx).is_empty() {
        return skip("grid too coarse for the smallest mollifier");
    }
    let f = ctx.profile(inlet_vanishing)?;
    let tf = f.apply_generator()?;
    let diff = mollify(&f, 16)?.apply_generator()?.sub(&mollify(&tf, 16)?);
    measured(diff.lp_norm() / tf.lp_norm())
}

fn chain_rule(ctx: &Ctx) -> Result<Outcome> {
    let base = ctx.sample(smooth)?;
    let mut worst = 0.0f64;
    for p in [2.0, 3.0] {
        let f = GridFunction::from_values(base.grid().clone(), base.values().to_vec(), p)?;
        worst = worst.max(chain_rule_residual(&f)?);
    }
    measured_with(worst, "max over p in {2, 3}".into())
}

fn green_formula(ctx: &Ctx) -> Result<Outcome> {
    let mut worst = 0.0f64;
    for f in ctx.random_functions(17, 3)? {
        worst = worst.max(green_residual(&f)?);
    }
    measured(worst)
}

fn lift_pair(ctx: &Ctx) -> Result<(TraceVector, GridFunction)> {
    let mut rng = ctx.rng(19);
    let h = ctx.random_trace(&mut rng, Side::Outgoing)?;
    let f = lift_outgoing_trace(&h)?;
    Ok((h, f))
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn lift_trace(ctx: &Ctx) -> Result<Outcome> {
    if !ctx.has_boundary() {
        return skip(NO_BOUNDARY);
    }
    let (h, f) = lift_pair(ctx)?;
    let scale = max_abs(h.values().iter().copied()).max(1e-300);
    let inflow = max_abs(f.trace(Side::Incoming)?.values().iter().copied());
    let outflow = max_abs(f.trace(Side::Outgoing)?.sub(&h).values().iter().copied());
    // Surjectivity of G_lambda through the lift: B+ C_1 (1 - T) f_h = h.
    let g = f.sub(&f.apply_generator()?);
    let back = max_abs(g_lambda(&g, 1.0)?.sub(&h).values().iter().copied());
    measured_with(
        inflow.max(outflow).max(back) / scale,
        format!("B- {inflow:.2e}, B+ {outflow:.2e}, G_1 {back:.2e}"),
    )
}

fn lift_norm_bound(ctx: &Ctx) -> Result<Outcome> {
    if !ctx.has_boundary() {
        return skip(NO_BOUNDARY);
    }
    let (h, f) = lift_pair(ctx)?;
    let lhs = f.lp_norm() + f.apply_generator()?.lp_norm();
    let rhs = 3.0 * h.norm(TraceSpace::YTilde);
    measured_with(((lhs - rhs) / rhs).max(0.0), format!("{lhs:.4e} vs {rhs:.4e}"))
}

fn trace_lifting_inverse(ctx: &Ctx) -> Result<Outcome> {
    if !ctx.has_boundary() {
        return skip(NO_BOUNDARY);
    }
    let f = ctx.sample(smooth)?;
    let (plus, minus) = (f.trace(Side::Outgoing)?, f.trace(Side::Incoming)?);
    let defect = plus.sub(&m_lambda(&minus, 1.0)?);
    let mut rebuilt = xi_lambda(&minus, 1.0)?;
    rebuilt.add_scaled(1.0, &lift_outgoing_trace(&defect)?);
    let scale = max_abs(plus.values().iter().chain(minus.values()).copied()).max(1e-300);
    let e_minus = max_abs(rebuilt.trace(Side::Incoming)?.sub(&minus).values().iter().copied());
    let e_plus = max_abs(rebuilt.trace(Side::Outgoing)?.sub(&plus).values().iter().copied());
    measured(e_minus.max(e_plus) / scale)
}

// ---- boundary operator ----

fn norm_bound_realized(ctx: &Ctx) -> Result<Outcome> {
    if !ctx.has_boundary() || ctx.sc.grid.outlets().is_empty() {
        return skip(NO_BOUNDARY);
    }
    let est = ctx.sc.boundary.operator_norm(&ctx.sc.grid, ctx.p())?;
    let mut rng = ctx.rng(23);
    let mut best = 0.0f64;
    for _ in 0..100 {
        let psi = ctx.random_trace(&mut rng, Side::Outgoing)?;
        let n = psi.lp_norm();
        if n > 0.0 {
            best = best.max(ctx.sc.boundary.apply(&psi)?.lp_norm() / n);
        }
    }
    let scale = est.value.max(1e-300);
    measured_with(
        ((best - est.value) / scale).max(0.0),
        format!("norm {:.6e}, best sampled ratio {best:.6e}", est.value),
    )
}

fn truncation_monotone(ctx: &Ctx) -> Result<Outcome> {
    if !ctx.has_boundary() {
        return skip(NO_BOUNDARY);
    }
    let (rows, _) = truncated_norms(&ctx.sc.boundary, &ctx.sc.grid, ctx.p(), &ctx.deltas())?;
    // Rows run from the largest delta down.
    let worst = rows.windows(2).map(|w| w[1].1.value - w[0].1.value).fold(0.0, f64::max);
    measured(worst)
}

fn hm_lambda_bound(ctx: &Ctx) -> Result<Outcome> {
    if !ctx.has_boundary() {
        return skip(NO_BOUNDARY);
    }
    let h = &ctx.sc.boundary;
    let a = ctx.norm_of_h()?;
    let (rows, _) = truncated_norms(h, &ctx.sc.grid, ctx.p(), &ctx.deltas())?;
    let mut rng = ctx.rng(29);
    let us: Vec<TraceVector> = (0..20).map(|_| ctx.random_trace(&mut rng, Side::Incoming)).collect::<Result<_>>()?;
    let mut worst = 0.0f64;
    for &lambda in &ctx.sc.config.run.lambdas {
        let mut ratio = 0.0f64;
        for u in &us {
            ratio = ratio.max(h.apply(&m_lambda(u, lambda)?)?.lp_norm() / u.lp_norm());
        }
        for (d, est) in &rows {
            worst = worst.max(ratio - (est.value + a * (-lambda * d).exp()));
        }
    }
    measured(worst.max(0.0))
}

// ---- semigroup ----

fn contraction(ctx: &Ctx) -> Result<Outcome> {
    let a = ctx.norm_of_h()?;
    if a > 1.0 + 1e-12 {
        return skip("boundary operator is not a contraction");
    }
    let f = ctx.initial()?;
    let mut m = Marcher::new(&f, &ctx.sc.boundary)?;
    let mut prev = f.lp_norm();
    let mut worst = 0.0f64;
    for _ in 0..300 {
        m.step();
        let n = m.state().lp_norm();
        worst = worst.max(n - prev);
        prev = n;
    }
    measured(worst / f.lp_norm())
}

fn growth_bound_check(ctx: &Ctx) -> Result<Outcome> {
    let a = ctx.norm_of_h()?;
    let delta = ctx.sc.config.delta0();
    let (_, c) = truncated_norms(&ctx.sc.boundary, &ctx.sc.grid, ctx.p(), &ctx.deltas())?;
    if c >= 1.0 {
        return skip("truncated norms do not stay below one");
    }
    let params = growth_bound(a, c, delta)?;
    let f = ctx.initial()?;
    let mut times: Vec<f64> = ctx.sc.config.run.times.iter().map(|&t| ctx.aligned(t)).collect();
    times.sort_by(f64::total_cmp);
    let mut m = Marcher::new(&f, &ctx.sc.boundary)?;
    let norm = f.lp_norm();
    let mut worst = 0.0f64;
    for t in times {
        let steps = (t / ctx.ds()).round() as usize;
        m.advance(steps.saturating_sub(m.steps()));
        let ratio = m.state().lp_norm() / norm;
        worst = worst.max(ratio - params.m * (params.omega * t).exp());
    }
    measured_with(worst.max(0.0), format!("M = {:.4e}, omega = {:.4e}", params.m, params.omega))
}

/// `integral_0^t sum_z w_z |trace_z(s)|^p ds` by the trapezoid rule over
/// a stored exit history.
fn flux_integral(ctx: &Ctx, hist: &[Vec<f64>], steps: usize) -> f64 {
    let p = ctx.p();
    let w = ctx.sc.grid.weights(Side::Outgoing);
    let level = |tau: usize| -> f64 { hist[tau].iter().zip(&w).map(|(v, w)| w * v.abs().powf(p)).sum() };
    let inner: f64 = (1..steps).map(level).sum();
    ctx.ds() * (0.5 * level(0) + inner + 0.5 * level(steps))
}

fn free_norm_balance(ctx: &Ctx) -> Result<Outcome> {
    if !ctx.has_boundary() {
        return skip(NO_BOUNDARY);
    }
    let p = ctx.p();
    let t = ctx.aligned(0.7);
    let f = ctx.initial()?;
    let lhs = f.lp_norm_pow() - evolve_free(&f, t, Mode::ExactShift)?.lp_norm_pow();
    let tf = ctx.sc.config.run.initial;
    let g = &ctx.sc.grid;
    let mut rhs = 0.0;
    for &i in g.outlets() {
        let c = &g.characteristics()[i];
        let reach = t.min(c.length);
        let mut err = None;
        let integral = simpson(0.0, reach, 2000, |s| match ctx.char_point(i, c.length - s) {
            Ok(x) => tf.eval(x, &ctx.sc.domain).abs().powf(p),
            Err(e) => {
                err = Some(e);
                0.0
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        rhs += c.weight * integral;
    }
    measured_with((lhs - rhs).abs() / f.lp_norm_pow(), format!("{lhs:.6e} vs {rhs:.6e}"))
}

fn trace_accumulation(ctx: &Ctx) -> Result<Outcome> {
    if !ctx.has_boundary() {
        return skip(NO_BOUNDARY);
    }
    let t = ctx.aligned(0.7);
    let f = ctx.initial()?;
    let run = dyson_run(&f, t, &crate::boundary::BoundaryOperator::zero(&ctx.sc.grid), 0)?;
    let lhs = f.lp_norm_pow() - run.iterates[0].lp_norm_pow();
    let rhs = flux_integral(ctx, &run.exit_traces[0], run.steps);
    measured_with((lhs - rhs).abs() / f.lp_norm_pow(), format!("{lhs:.6e} vs {rhs:.6e}"))
}

fn free_semigroup_law(ctx: &Ctx) -> Result<Outcome> {
    let f = ctx.initial()?;
    let (s, t) = (ctx.aligned(0.3), ctx.aligned(0.4));
    let twice = evolve_free(&evolve_free(&f, s, Mode::ExactShift)?, t, Mode::ExactShift)?;
    let once = evolve_free(&f, s + t, Mode::ExactShift)?;
    let scale = max_abs(f.values().iter().copied()).max(1e-300);
    measured(max_abs(twice.sub(&once).values().iter().copied()) / scale)
}

fn binomial_convolution(ctx: &Ctx) -> Result<Outcome> {
    const K: usize = 3;
    let f = ctx.initial()?;
    let h = &ctx.sc.boundary;
    let (t, s) = (ctx.aligned(0.7), ctx.aligned(0.8));
    let whole = dyson_run(&f, t + s, h, K)?;
    let first = dyson_run(&f, s, h, K)?;
    let seconds: Vec<DysonRun> =
        (0..=K).map(|m| dyson_run(&first.iterates[m], t, h, K - m)).collect::<Result<_>>()?;
    let norm = f.lp_norm();
    let mut worst = 0.0f64;
    for k in 0..=K {
        let mut sum = GridFunction::zeros(f.grid().clone(), f.p())?;
        for (m, run) in seconds.iter().enumerate().take(k + 1) {
            sum.add_scaled(1.0, &run.iterates[k - m]);
        }
        worst = worst.max(sum.sub(&whole.iterates[k]).lp_norm() / norm);
    }
    measured(worst)
}

fn iterate_commutation(ctx: &Ctx) -> Result<Outcome> {
    let f = ctx.profile(interior_profile)?;
    let tf = f.apply_generator()?;
    let t = ctx.aligned(0.5);
    let a = dyson_run(&f, t, &ctx.sc.boundary, 2)?;
    let b = dyson_run(&tf, t, &ctx.sc.boundary, 2)?;
    let mut worst = 0.0f64;
    for (u, v) in a.iterates.iter().zip(&b.iterates) {
        worst = worst.max(u.apply_generator()?.sub(v).lp_norm());
    }
    measured(worst / tf.lp_norm())
}

fn iterate_trace_bound(ctx: &Ctx) -> Result<Outcome> {
    if !ctx.has_boundary() {
        return skip(NO_BOUNDARY);
    }
    let a = ctx.norm_of_h()?;
    let f = ctx.initial()?;
    let run = dyson_run(&f, ctx.aligned(2.0), &ctx.sc.boundary, 3)?;
    let flux: Vec<f64> = run.exit_traces.iter().map(|h| flux_integral(ctx, h, run.steps)).collect();
    let worst = flux.windows(2).map(|w| w[1] - a.powf(ctx.p()) * w[0]).fold(0.0, f64::max);
    measured(worst / f.lp_norm_pow())
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn truncated_norm_bound(ctx: &Ctx) -> Result<Outcome> {
    const K: usize = 5;
    let a = ctx.norm_of_h()?;
    let (rows, _) = truncated_norms(&ctx.sc.boundary, &ctx.sc.grid, ctx.p(), &ctx.deltas()[..4])?;
    let f = ctx.initial()?;
    let norm = f.lp_norm();
    let mut worst = 0.0f64;
    for t in [0.5, 1.0, 2.0].map(|t| ctx.aligned(t)) {
        let run = dyson_run(&f, t, &ctx.sc.boundary, K)?;
        for (k, u) in run.iterates.iter().enumerate() {
            let ratio = u.lp_norm() / norm;
            for (d, est) in &rows {
                let jmax = k.min((t / d).floor() as usize + 1);
                let bound: f64 =
                    (0..=jmax).map(|j| binomial(k, j) * est.value.powi((k - j) as i32) * a.powi(j as i32)).sum();
                worst = worst.max(ratio - bound);
            }
        }
    }
    measured(worst.max(0.0))
}

fn series_equals_march(ctx: &Ctx) -> Result<Outcome> {
    let t = ctx.aligned(0.5);
    let f = ctx.initial()?;
    let k = match ctx.sc.config.run.series_k {
        Some(k) => k,
        None => default_series_terms(&ctx.sc.grid, t)?,
    };
    let series = series_evolve(&f, t, &ctx.sc.boundary, Some(k))?;
    let march = evolve_full(&f, t, &ctx.sc.boundary, Mode::ExactShift)?;
    measured_with(series.sub(&march).lp_norm() / f.lp_norm(), format!("K = {k}"))
}

fn isometry(ctx: &Ctx) -> Result<Outcome> {
    if ctx.has_boundary() {
        return skip("norm preservation needs a grid of closed orbits");
    }
    let f = ctx.initial()?;
    let u = evolve_full(&f, ctx.aligned(1.0), &ctx.sc.boundary, Mode::ExactShift)?;
    measured((u.lp_norm() - f.lp_norm()).abs() / f.lp_norm())
}

// ---- resolvent ----

fn resolvents(ctx: &Ctx) -> Result<Vec<(f64, GridFunction, crate::resolvent::ResolventReport)>> {
    let g = ctx.sc.source()?;
    ctx.sc
        .config
        .run
        .lambdas
        .iter()
        .map(|&l| {
            let (f, r) = resolvent_apply(&g, l, &ctx.sc.boundary, 1e-12)?;
            Ok((l, f, r))
        })
        .collect()
}

fn resolvent_identity(ctx: &Ctx) -> Result<Outcome> {
    let worst = resolvents(ctx)?.iter().map(|(_, _, r)| r.residual).fold(0.0, f64::max);
    measured(worst)
}

fn resolvent_boundary_condition(ctx: &Ctx) -> Result<Outcome> {
    if !ctx.has_boundary() {
        return skip(NO_BOUNDARY);
    }
    let mut worst = 0.0f64;
    for (_, _, r) in resolvents(ctx)? {
        let expected = ctx.sc.boundary.apply(&r.b_plus)?;
        let scale = r.b_minus.lp_norm().max(1e-300);
        worst = worst.max(r.b_minus.sub(&expected).lp_norm() / scale);
    }
    measured(worst)
}

fn g_lambda_energy(ctx: &Ctx) -> Result<Outcome> {
    let p = ctx.p();
    let f = ctx.initial()?;
    let mut worst = 0.0f64;
    for &lambda in &ctx.sc.config.run.lambdas {
        let c = c_lambda(&f, lambda)?;
        let trace = if ctx.has_boundary() { g_lambda(&f, lambda)?.lp_norm().powf(p) } else { 0.0 };
        let lhs = trace + lambda * p * c.lp_norm_pow();
        let rhs = p * c.integral_with(&f, |cv, fv| cv.signum() * cv.abs().powf(p - 1.0) * fv);
        worst = worst.max((lhs - rhs).abs() / rhs.abs().max(1e-300));
    }
    measured(worst)
}

fn g_lambda_range(ctx: &Ctx) -> Result<Outcome> {
    if !ctx.has_boundary() {
        return skip(NO_BOUNDARY);
    }
    let p = ctx.p();
    let q = p / (p - 1.0);
    let mut worst = 0.0f64;
    for f in ctx.random_functions(31, 4)? {
        for &lambda in &ctx.sc.config.run.lambdas {
            let lhs = g_lambda(&f, lambda)?.norm(TraceSpace::YTilde);
            let rhs = (1.0 + (lambda * q).powf(-1.0 / q)) * f.lp_norm();
            worst = worst.max((lhs - rhs) / rhs);
        }
    }
    measured(worst.max(0.0))
}

fn m_lambda_contraction(ctx: &Ctx) -> Result<Outcome> {
    if !ctx.has_boundary() {
        return skip(NO_BOUNDARY);
    }
    let mut rng = ctx.rng(37);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let u = ctx.random_trace(&mut rng, Side::Incoming)?;
        for &lambda in &ctx.sc.config.run.lambdas {
            worst = worst.max(m_lambda(&u, lambda)?.norm(TraceSpace::Y) / u.lp_norm() - 1.0);
        }
    }
    measured(worst.max(0.0))
}

fn resolvent_norm_bound(ctx: &Ctx) -> Result<Outcome> {
    if ctx.norm_of_h()? > 1.0 + 1e-12 {
        return skip("boundary operator is not a contraction");
    }
    let g = ctx.sc.source()?.lp_norm();
    let worst = resolvents(ctx)?.iter().map(|(l, f, _)| (l * f.lp_norm() - g) / g).fold(0.0, f64::max);
    measured(worst)
}

fn pure_xi_green(ctx: &Ctx) -> Result<Outcome> {
    if !ctx.has_boundary() {
        return skip(NO_BOUNDARY);
    }
    let p = ctx.p();
    let mut rng = ctx.rng(41);
    let u = ctx.random_trace(&mut rng, Side::Incoming)?;
    let mut worst = 0.0f64;
    for &lambda in &ctx.sc.config.run.lambdas {
        let xi = xi_lambda(&u, lambda)?;
        let lhs = lambda * p * xi.lp_norm_pow() + xi.trace(Side::Outgoing)?.lp_norm().powf(p);
        let rhs = u.lp_norm().powf(p);
        worst = worst.max((lhs - rhs).abs() / rhs);
    }
    measured(worst)
}

fn dyson_laplace(ctx: &Ctx) -> Result<Outcome> {
    const K: usize = 3;
    if !ctx.has_boundary() {
        return skip(NO_BOUNDARY);
    }
    let g = &ctx.sc.grid;
    let h = &ctx.sc.boundary;
    let lambdas = &ctx.sc.config.run.lambdas;
    let lmin = lambdas.iter().copied().fold(f64::INFINITY, f64::min);
    let longest = g.outlets().iter().map(|&i| g.characteristics()[i].length).fold(0.0, f64::max);
    // U_k(t) vanishes once t exceeds k + 1 traversals of the longest
    // characteristic; otherwise cut the Laplace integral at e^{-10}.
    let horizon = ctx.aligned((10.0 / lmin).min((K + 1) as f64 * longest) + ctx.ds());
    let capped = horizon >= (K + 1) as f64 * longest;
    // Data vanishing near both ends keeps every re-injected history
    // continuous, so the time quadrature is second order.
    let f = ctx.profile(interior_profile)?;
    let run = dyson_run(&f, horizon, h, K)?;
    let ds = ctx.ds();
    let mut worst = 0.0f64;
    let mut slack = 0.0f64;
    for &lambda in lambdas {
        let first = g_lambda(&f, lambda)?;
        let scale = first.lp_norm().max(1e-300);
        let mut expected = first;
        for (k, hist) in run.exit_traces.iter().enumerate() {
            if k > 0 {
                expected = m_lambda(&h.apply(&expected)?, lambda)?;
            }
            let mut laplace = vec![0.0; g.outlets().len()];
            for (tau, tr) in hist.iter().enumerate() {
                let w = if tau == 0 || tau == run.steps { 0.5 } else { 1.0 } * ds * (-lambda * tau as f64 * ds).exp();
                for (l, v) in laplace.iter_mut().zip(tr) {
                    *l += w * v;
                }
            }
            let laplace = expected.with_values(laplace);
            worst = worst.max(laplace.sub(&expected).lp_norm() / scale);
            if capped {
                continue;
            }
            let sup = hist[run.steps / 2..].iter().map(|tr| expected.with_values(tr.clone()).lp_norm()).fold(0.0, f64::max);
            slack = slack.max((-lambda * horizon).exp() * sup / lambda / scale);
        }
    }
    Ok(Outcome::Measured { residual: worst, slack, note: format!("T = {horizon}, tail allowance {slack:.2e}") })
}

fn a_priori_estimate(ctx: &Ctx) -> Result<Outcome> {
    if !ctx.has_boundary() {
        return skip(NO_BOUNDARY);
    }
    let p = ctx.p();
    let g = ctx.sc.source()?;
    let mut rng = ctx.rng(43);
    let u = ctx.random_trace(&mut rng, Side::Incoming)?;
    let mut worst = 0.0f64;
    for &lambda in &ctx.sc.config.run.lambdas {
        let f = solve_bvp(&g, &u, lambda)?;
        let lhs = lambda * p * f.lp_norm_pow() + f.trace(Side::Outgoing)?.lp_norm().powf(p);
        let rhs = u.lp_norm().powf(p) + p * g.lp_norm() * f.lp_norm().powf(p - 1.0);
        worst = worst.max((lhs - rhs) / rhs);
    }
    measured(worst.max(0.0))
}
