//! Transport semigroup with re-entry boundary operator: the free shift
//! `U_0`, the iterates `U_k` by number of boundary crossings, their sum, and
//! direct time marching.
//!
//! In exact-shift mode one time step equals the grid step `ds`, so `U_0`
//! moves every value exactly one node downstream and carries no numerical
//! diffusion.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::boundary::{delta_grid, truncated_norms, BoundaryOperator};
use crate::error::{Error, Result};
use crate::grid::{CharacteristicGrid, GridFunction, Side};

/// Default first truncation level of the `delta` grid.
pub const DEFAULT_DELTA0: f64 = 0.5;
/// Default number of levels `delta0 / 2^k` of the `delta` grid.
pub const DEFAULT_DELTA_LEVELS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Times restricted to multiples of `ds`.
    #[default]
    ExactShift,
    /// Arbitrary times via linear interpolation along characteristics.
    Interpolating,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub dt: f64,
    pub steps: usize,
}

impl TimeGrid {
    /// Number of whole grid steps in `t`; errors unless `t` is a
    /// nonnegative multiple of `ds`.
    pub fn aligned(grid: &CharacteristicGrid, t: f64) -> Result<Self> {
        let ds = grid.ds();
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Argument(format!("time must be nonnegative, got {t}")));
        }
        let r = t / ds;
        let n = r.round();
        if (r - n).abs() > 1e-9 * r.max(1.0) {
            return Err(Error::NotAligned { t, ds });
        }
        Ok(Self { dt: ds, steps: n as usize })
    }
}

/// Shifts `src` one node downstream into `dst` (inlet nodes zeroed, closed
/// orbits rotated) and writes the outgoing trace of the shifted state.
fn shift_into(grid: &CharacteristicGrid, src: &[f64], dst: &mut [f64], exits: &mut [f64]) {
    let ds = grid.ds();
    for (i, c) in grid.characteristics().iter().enumerate() {
        let r = c.range();
        let (a, b) = (r.start, r.end);
        if c.is_interior_loop {
            dst[a] = src[b - 1];
            dst[a + 1..b].copy_from_slice(&src[a..b - 1]);
            continue;
        }
        dst[a] = 0.0;
        dst[a + 1..b].copy_from_slice(&src[a..b - 1]);
        if let Some(k) = grid.outlet_of(i) {
            let n = b - a - 1;
            exits[k] = if n >= 2 {
                dst[b - 1] + (dst[b - 1] - dst[b - 2]) * c.gap / ds
            } else {
                src[a]
            };
        }
    }
}

fn inject(grid: &CharacteristicGrid, dst: &mut [f64], inflow: &[f64]) {
    for (&i, &v) in grid.inlets().iter().zip(inflow) {
        let a = grid.characteristics()[i].range().start;
        dst[a] = v;
    }
}

/// Step-by-step realisation of `U_H` with the boundary condition applied
/// after every shift.
pub struct Marcher<'a> {
    grid: Arc<CharacteristicGrid>,
    h: &'a BoundaryOperator,
    p: f64,
    cur: Vec<f64>,
    next: Vec<f64>,
    exits: Vec<f64>,
    steps: usize,
}

impl<'a> Marcher<'a> {
    pub fn new(f: &GridFunction, h: &'a BoundaryOperator) -> Result<Self> {
        let grid = f.grid().clone();
        h.check_grid(&grid)?;
        Ok(Self {
            p: f.p(),
            cur: f.values().to_vec(),
            next: vec![0.0; f.values().len()],
            exits: vec![0.0; grid.outlets().len()],
            grid,
            h,
            steps: 0,
        })
    }

    pub fn step(&mut self) {
        shift_into(&self.grid, &self.cur, &mut self.next, &mut self.exits);
        if !self.h.is_zero() {
            let inflow = self.h.apply_raw(&self.exits);
            inject(&self.grid, &mut self.next, &inflow);
        }
        std::mem::swap(&mut self.cur, &mut self.next);
        self.steps += 1;
    }

    pub fn advance(&mut self, steps: usize) {
        for _ in 0..steps {
            self.step();
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.grid.ds()
    }

    pub fn state(&self) -> GridFunction {
        GridFunction::from_raw(self.grid.clone(), self.cur.clone(), self.p)
    }

    /// Outgoing trace produced by the last step.
    pub fn last_exit(&self) -> &[f64] {
        &self.exits
    }
}

/// `U_0(t) f`.
pub fn evolve_free(f: &GridFunction, t: f64, mode: Mode) -> Result<GridFunction> {
    match TimeGrid::aligned(f.grid(), t) {
        Ok(tg) => {
            let zero = BoundaryOperator::zero(f.grid());
            let mut m = Marcher::new(f, &zero)?;
            m.advance(tg.steps);
            Ok(m.state())
        }
        Err(Error::NotAligned { .. }) if mode == Mode::Interpolating => Ok(interpolated_shift(f, t).0),
        Err(e) => Err(e),
    }
}

/// Free shift by an arbitrary time, with the outgoing trace of the result.
fn interpolated_shift(f: &GridFunction, t: f64) -> (GridFunction, Vec<f64>) {
    let grid = f.grid();
    let ds = grid.ds();
    let mut out = vec![0.0; f.values().len()];
    for c in grid.characteristics() {
        let v = f.char_values_of(c);
        let o = &mut out[c.range()];
        let n = v.len();
        for (j, x) in o.iter_mut().enumerate() {
            let s = j as f64 * ds - t;
            if c.is_interior_loop {
                let period = n as f64 * ds;
                let u = s.rem_euclid(period) / ds;
                let k = u.floor() as usize % n;
                let frac = u - u.floor();
                *x = (1.0 - frac) * v[k] + frac * v[(k + 1) % n];
            } else if s >= 0.0 {
                let u = s / ds;
                let k = (u.floor() as usize).min(n - 1);
                let frac = u - k as f64;
                *x = if k + 1 < n { (1.0 - frac) * v[k] + frac * v[k + 1] } else { v[k] };
            }
        }
    }
    let shifted = f.with_values(out);
    let exits = shifted.trace(Side::Outgoing).map(|t| t.values().to_vec()).unwrap_or_default();
    (shifted, exits)
}

/// `U_H(t) f` by direct marching.
pub fn evolve_full(f: &GridFunction, t: f64, h: &BoundaryOperator, mode: Mode) -> Result<GridFunction> {
    match TimeGrid::aligned(f.grid(), t) {
        Ok(tg) => {
            let mut m = Marcher::new(f, h)?;
            m.advance(tg.steps);
            Ok(m.state())
        }
        Err(Error::NotAligned { .. }) if mode == Mode::Interpolating => {
            let ds = f.grid().ds();
            let whole = (t / ds).floor();
            let rest = t - whole * ds;
            let mut m = Marcher::new(f, h)?;
            m.advance(whole as usize);
            let (mut g, exits) = interpolated_shift(&m.state(), rest);
            let inflow = h.apply_raw(&exits);
            let grid = g.grid().clone();
            let mut values = std::mem::take(g.values_mut());
            inject(&grid, &mut values, &inflow);
            Ok(g.with_values(values))
        }
        Err(e) => Err(e),
    }
}

/// Iterates `U_0(t) f, ..., U_K(t) f` together with the outgoing trace of
/// every iterate at every step `0..=steps`.
#[derive(Debug, Clone)]
pub struct DysonRun {
    pub iterates: Vec<GridFunction>,
    /// `exit_traces[k][tau]` is `B+ U_k(tau ds) f` at the outgoing nodes.
    pub exit_traces: Vec<Vec<Vec<f64>>>,
    pub steps: usize,
}

/// Computes all iterates up to `k_max` by marching `U_k` once per level and
/// feeding it the stored exit history of `U_{k-1}`.
pub fn dyson_run(f: &GridFunction, t: f64, h: &BoundaryOperator, k_max: usize) -> Result<DysonRun> {
    let grid = f.grid().clone();
    h.check_grid(&grid)?;
    let steps = TimeGrid::aligned(&grid, t)?.steps;
    let n_out = grid.outlets().len();
    let mut iterates = Vec::with_capacity(k_max + 1);
    let mut exit_traces: Vec<Vec<Vec<f64>>> = Vec::with_capacity(k_max + 1);
    let mut next = vec![0.0; grid.n_nodes()];
    let mut exits = vec![0.0; n_out];
    for k in 0..=k_max {
        let mut cur = if k == 0 { f.values().to_vec() } else { vec![0.0; grid.n_nodes()] };
        let mut hist = Vec::with_capacity(steps + 1);
        hist.push(if k == 0 && grid.has_boundary() {
            f.trace(Side::Outgoing)?.values().to_vec()
        } else {
            vec![0.0; n_out]
        });
        let prev = k.checked_sub(1).map(|j| &exit_traces[j]);
        for tau in 1..=steps {
            shift_into(&grid, &cur, &mut next, &mut exits);
            if let Some(prev) = prev {
                let inflow = h.apply_raw(&prev[tau]);
                inject(&grid, &mut next, &inflow);
            }
            hist.push(exits.clone());
            std::mem::swap(&mut cur, &mut next);
        }
        iterates.push(GridFunction::from_raw(grid.clone(), cur, f.p()));
        exit_traces.push(hist);
    }
    Ok(DysonRun { iterates, exit_traces, steps })
}

/// `U_k(t) f`.
pub fn dyson_iterate(k: usize, t: f64, f: &GridFunction, h: &BoundaryOperator) -> Result<GridFunction> {
    Ok(dyson_run(f, t, h, k)?.iterates.pop().expect("at least one level"))
}

/// Number of iterates beyond which `U_k(t)` vanishes: every re-entry
/// consumes at least the shortest return time.
pub fn default_series_terms(grid: &CharacteristicGrid, t: f64) -> Result<usize> {
    match grid.min_return_time() {
        None => Ok(0),
        Some(d) if d > 0.0 => Ok((t / d - 1e-9).ceil().max(0.0) as usize + 1),
        Some(_) => Err(Error::Argument("shortest return time is zero; the series length must be given".into())),
    }
}

/// Partial sum `sum_{k <= K} U_k(t) f`. Without an explicit `k`, the
/// truncation criterion is checked on the default `delta` grid first.
pub fn series_evolve(f: &GridFunction, t: f64, h: &BoundaryOperator, k: Option<usize>) -> Result<GridFunction> {
    let k = match k {
        Some(k) => k,
        None => {
            let deltas = delta_grid(DEFAULT_DELTA0, DEFAULT_DELTA_LEVELS);
            let (_, c) = truncated_norms(h, f.grid(), f.p(), &deltas)?;
            if c >= 1.0 {
                return Err(Error::CriterionViolated { c });
            }
            default_series_terms(f.grid(), t)?
        }
    };
    let run = dyson_run(f, t, h, k)?;
    let mut sum = run.iterates[0].clone();
    for u in &run.iterates[1..] {
        sum.add_scaled(1.0, u);
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::tests::slab;
    use std::f64::consts::PI;

    fn setup(alpha: f64) -> (Arc<CharacteristicGrid>, BoundaryOperator) {
        let g = Arc::new(slab(1e-3));
        let h = BoundaryOperator::identity_gain(&g, alpha).unwrap();
        (g, h)
    }

    #[test]
    fn free_shift_matches_translation() {
        let (g, _) = setup(0.5);
        let f = GridFunction::from_fn(g.clone(), 2.0, |x| (PI * x[0]).sin()).unwrap();
        let u = evolve_free(&f, 0.25, Mode::ExactShift).unwrap();
        for (v, x) in u.values().iter().zip(g.positions()) {
            let want = if x[0] > 0.25 + 1e-12 { (PI * (x[0] - 0.25)).sin() } else { 0.0 };
            assert!((v - want).abs() < 1e-12, "{x:?}");
        }
        assert_eq!(evolve_free(&f, 0.0, Mode::ExactShift).unwrap(), f);
    }

    #[test]
    fn misaligned_time_rejected() {
        let (g, _) = setup(0.5);
        let f = GridFunction::from_fn(g, 2.0, |_| 1.0).unwrap();
        assert!(matches!(evolve_free(&f, 0.0105, Mode::ExactShift), Err(Error::NotAligned { .. })));
        let u = evolve_free(&f, 0.0105, Mode::Interpolating).unwrap();
        assert_eq!(u.values()[10], 0.0);
        assert!((u.values()[11] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn first_iterate_on_slab() {
        let (g, h) = setup(0.5);
        let f = GridFunction::from_fn(g.clone(), 2.0, |_| 1.0).unwrap();
        let u1 = dyson_iterate(1, 0.5, &f, &h).unwrap();
        for (v, x) in u1.values().iter().zip(g.positions()) {
            if x[0] < 0.5 - 1e-9 {
                assert!((v - 0.5).abs() < 1e-12, "{x:?} {v}");
            } else if x[0] > 0.5 + 1e-9 {
                assert_eq!(*v, 0.0);
            }
        }
        assert!(dyson_iterate(2, 0.0, &f, &h).unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn marching_equals_series() {
        let (g, h) = setup(0.5);
        let f = GridFunction::from_fn(g, 2.0, |x| (PI * x[0]).sin()).unwrap();
        let direct = evolve_full(&f, 1.5, &h, Mode::ExactShift).unwrap();
        let series = series_evolve(&f, 1.5, &h, None).unwrap();
        let d = direct.sub(&series).lp_norm();
        assert!(d < 1e-13, "{d}");
        assert_eq!(default_series_terms(f.grid(), 1.5).unwrap(), 3);
    }

    #[test]
    fn absorbing_boundary_is_free() {
        let (g, _) = setup(0.5);
        let zero = BoundaryOperator::zero(&g);
        let f = GridFunction::from_fn(g, 2.0, |x| x[0]).unwrap();
        assert_eq!(
            evolve_full(&f, 0.3, &zero, Mode::ExactShift).unwrap(),
            evolve_free(&f, 0.3, Mode::ExactShift).unwrap()
        );
    }
}
