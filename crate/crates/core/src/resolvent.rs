//! Laplace-side operators: the free resolvent `C_lambda`, its outgoing
//! trace `G_lambda`, the boundary lifts `Xi_lambda`, `M_lambda`, the
//! boundary-value solver and the resolvent of the transport operator with
//! re-entry boundary condition.

use crate::boundary::{delta_grid, truncated_norms, BoundaryOperator};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, Side, TraceSpace, TraceVector};
use crate::semigroup::{DEFAULT_DELTA0, DEFAULT_DELTA_LEVELS};

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::Argument(format!("lambda must be positive, got {lambda}")))
    }
}

/// `(integral_0^h e^{-lambda s} ds, integral_0^h s e^{-lambda s} ds)`.
fn exp_moments(lambda: f64, h: f64) -> (f64, f64) {
    let x = lambda * h;
    let a0 = -(-x).exp_m1() / lambda;
    let a1 = if x < 0.1 {
        // h^2 * sum_k (-x)^k / (k! (k + 2))
        let mut term = 1.0;
        let mut sum = 0.5;
        for k in 1..16 {
            term *= -x / k as f64;
            sum += term / (k + 2) as f64;
        }
        h * h * sum
    } else {
        (1.0 - (-x).exp() * (1.0 + x)) / (lambda * lambda)
    };
    (a0, a1)
}

/// `(C_lambda f)(x) = integral_0^{tau_-(x)} f(Phi(x, -s)) e^{-lambda s} ds`,
/// exact for `f` piecewise linear between nodes.
pub fn c_lambda(f: &GridFunction, lambda: f64) -> Result<GridFunction> {
    check_lambda(lambda)?;
    let grid = f.grid();
    let h = grid.ds();
    let decay = (-lambda * h).exp();
    let (a0, a1) = exp_moments(lambda, h);
    let cell = |prev: f64, cur: f64| cur * a0 + (prev - cur) * a1 / h;
    let mut out = vec![0.0; f.values().len()];
    for c in grid.characteristics() {
        let v = &f.values()[c.range()];
        let o = &mut out[c.range()];
        let n = v.len();
        if c.is_interior_loop {
            let mut partial = vec![0.0; n + 1];
            for j in 1..=n {
                partial[j] = decay * partial[j - 1] + cell(v[j - 1], v[j % n]);
            }
            let period = n as f64 * h;
            let c0 = partial[n] / -(-lambda * period).exp_m1();
            for j in 0..n {
                o[j] = partial[j] + (-lambda * j as f64 * h).exp() * c0;
            }
        } else {
            o[0] = 0.0;
            for j in 1..n {
                o[j] = decay * o[j - 1] + cell(v[j - 1], v[j]);
            }
        }
    }
    Ok(f.with_values(out))
}

fn traces_or_empty(f: &GridFunction, side: Side) -> Result<TraceVector> {
    if f.grid().has_boundary() {
        f.trace(side)
    } else {
        TraceVector::zeros(f.grid().clone(), side, f.p())
    }
}

/// `G_lambda f = B+ C_lambda f`.
pub fn g_lambda(f: &GridFunction, lambda: f64) -> Result<TraceVector> {
    traces_or_empty(&c_lambda(f, lambda)?, Side::Outgoing)
}

/// `(Xi_lambda u)(Phi(y, s)) = u(y) e^{-lambda s}`; zero on closed orbits.
pub fn xi_lambda(u: &TraceVector, lambda: f64) -> Result<GridFunction> {
    check_lambda(lambda)?;
    if u.side() != Side::Incoming {
        return Err(Error::Argument("Xi_lambda expects an incoming trace".into()));
    }
    let grid = u.grid().clone();
    let ds = grid.ds();
    let mut values = vec![0.0; grid.n_nodes()];
    for (&i, &uk) in grid.inlets().iter().zip(u.values()) {
        let c = &grid.characteristics()[i];
        for (j, v) in values[c.range()].iter_mut().enumerate() {
            *v = uk * (-lambda * j as f64 * ds).exp();
        }
    }
    Ok(GridFunction::from_raw(grid, values, u.p()))
}

/// `M_lambda u = B+ Xi_lambda u`, using the same exit extrapolation as every
/// other outgoing trace so that `B+ (C_lambda g + Xi_lambda u)` splits
/// exactly.
pub fn m_lambda(u: &TraceVector, lambda: f64) -> Result<TraceVector> {
    Ok(m_xi_lambda(u, lambda)?.0)
}

pub fn m_xi_lambda(u: &TraceVector, lambda: f64) -> Result<(TraceVector, GridFunction)> {
    let xi = xi_lambda(u, lambda)?;
    let m = traces_or_empty(&xi, Side::Outgoing)?;
    Ok((m, xi))
}

/// Solution of `lambda f - T_max f = g`, `B- f = u`.
pub fn solve_bvp(g: &GridFunction, u: &TraceVector, lambda: f64) -> Result<GridFunction> {
    let mut f = c_lambda(g, lambda)?;
    f.add_scaled(1.0, &xi_lambda(u, lambda)?);
    Ok(f)
}

#[derive(Debug, Clone)]
pub struct ResolventReport {
    pub lambda: f64,
    pub series_terms_used: usize,
    /// `||(lambda - T) f - g||_p / ||g||_p` with the difference generator.
    pub residual: f64,
    /// Last measured ratio of consecutive series terms.
    pub rho: f64,
    /// `delta` at which `C_delta + A e^{-lambda delta} < 1` was certified.
    pub certified_delta: f64,
    pub b_plus: TraceVector,
    pub b_minus: TraceVector,
}

const SERIES_CAP: usize = 100_000;

/// A tested `delta` certifying convergence of the boundary series,
/// i.e. `|||H chi_delta||| + |||H||| e^{-lambda delta} < 1`. Candidates are
/// the geometric grid plus points just below each outgoing stay time, where
/// the truncated norm jumps.
pub fn certify(h: &BoundaryOperator, f: &GridFunction, lambda: f64) -> Result<Option<f64>> {
    let grid = f.grid();
    if h.is_zero() {
        return Ok(Some(DEFAULT_DELTA0));
    }
    let a = h.operator_norm(grid, f.p())?.value;
    let mut deltas = delta_grid(DEFAULT_DELTA0, DEFAULT_DELTA_LEVELS);
    if grid.has_boundary() {
        deltas.extend(grid.stay_times(Side::Outgoing).iter().filter(|t| t.is_finite()).map(|t| t * (1.0 - 1e-9)));
    }
    deltas.retain(|&d| d > 0.0);
    deltas.sort_by(|x, y| y.total_cmp(x));
    deltas.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * y.abs());
    let (rows, _) = truncated_norms(h, grid, f.p(), &deltas)?;
    Ok(rows
        .iter()
        .find(|(d, est)| est.value + a * (-lambda * d).exp() < 1.0)
        .map(|(d, _)| *d))
}

/// `(lambda - T_H)^{-1} g = C_lambda g + Xi_lambda H psi` with
/// `psi = sum_n (M_lambda H)^n G_lambda g`, summed until the geometric tail
/// estimate drops below `tol` relative to the first term.
pub fn resolvent_apply(
    g: &GridFunction,
    lambda: f64,
    h: &BoundaryOperator,
    tol: f64,
) -> Result<(GridFunction, ResolventReport)> {
    check_lambda(lambda)?;
    let grid = g.grid().clone();
    h.check_grid(&grid)?;
    let first = g_lambda(g, lambda)?;
    let step = |psi: &TraceVector| -> Result<TraceVector> { m_lambda(&h.apply(psi)?, lambda) };
    let Some(certified_delta) = certify(h, g, lambda)? else {
        let mut term = first.clone();
        let mut rho = 0.0;
        for _ in 0..32 {
            let next = step(&term)?;
            let (a, b) = (term.lp_norm(), next.lp_norm());
            if a == 0.0 {
                break;
            }
            rho = b / a;
            term = next;
        }
        return Err(Error::Divergence { lambda, rho });
    };

    let scale = first.lp_norm();
    let mut psi = first.values().to_vec();
    let mut term = first;
    let mut rho = 0.0;
    let mut terms = 1;
    if scale > 0.0 {
        loop {
            let next = step(&term)?;
            let prev_norm = term.lp_norm();
            let norm = next.lp_norm();
            terms += 1;
            if norm == 0.0 {
                rho = 0.0;
                break;
            }
            for (s, v) in psi.iter_mut().zip(next.values()) {
                *s += v;
            }
            rho = norm / prev_norm;
            term = next;
            if rho < 1.0 && norm * rho / (1.0 - rho) < tol * scale {
                break;
            }
            if terms >= SERIES_CAP {
                return Err(Error::Divergence { lambda, rho });
            }
        }
    }
    let psi = TraceVector::new(grid.clone(), Side::Outgoing, psi, g.p())?;
    let mut f = c_lambda(g, lambda)?;
    if !h.is_zero() {
        f.add_scaled(1.0, &xi_lambda(&h.apply(&psi)?, lambda)?);
    }
    let residual = identity_residual(&f, g, lambda)?;
    let report = ResolventReport {
        lambda,
        series_terms_used: terms,
        residual,
        rho,
        certified_delta,
        b_plus: traces_or_empty(&f, Side::Outgoing)?,
        b_minus: traces_or_empty(&f, Side::Incoming)?,
    };
    Ok((f, report))
}

/// `||(lambda - T) f - g||_p / ||g||_p` (absolute when `g = 0`).
pub fn identity_residual(f: &GridFunction, g: &GridFunction, lambda: f64) -> Result<f64> {
    let tf = f.apply_generator()?;
    let mut r = f.scaled(lambda).sub(&tf);
    r.add_scaled(-1.0, g);
    let gn = g.lp_norm();
    Ok(if gn > 0.0 { r.lp_norm() / gn } else { r.lp_norm() })
}

/// Convenience for trace-space tables.
pub fn trace_norms(t: &TraceVector) -> [f64; 3] {
    [t.norm(TraceSpace::Lp), t.norm(TraceSpace::Y), t.norm(TraceSpace::YTilde)]
}
