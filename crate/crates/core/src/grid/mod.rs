//! Characteristic-coordinate discretisation of the domain.
//!
//! Every characteristic is seeded on the incoming boundary (or on an
//! interior section for closed orbits) and sampled at arc-time `j * ds`.
//! Integrals over the domain become weighted sums of one-dimensional
//! integrals along characteristics.

mod function;
mod lift;
mod mollify;

pub use function::{GridFunction, Side, TraceSpace, TraceVector};
pub use lift::{compatibility_defect, e_norm, lift_outgoing_trace, lift_value};
pub use mollify::{bump, bump_first_moment, mollify};

use std::ops::Range;

use crate::error::{Error, Result};
use crate::flow::{dist, BoundaryCurve, Direction, Domain, Flow, Point};

/// Reference measure on the domain.
#[derive(Debug, Clone, PartialEq)]
pub enum Measure {
    Lebesgue,
    /// One weight per graph edge, in edge order.
    GraphAtoms(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Characteristic {
    /// Incoming boundary point, or the interior seed of a closed orbit.
    pub inlet: Point,
    /// Quadrature weight of the incoming boundary measure.
    pub weight: f64,
    /// Stay time `tau_+` of the inlet, the horizon when capped, or the
    /// period of a closed orbit.
    pub length: f64,
    /// No exit was found within the horizon.
    pub capped: bool,
    pub is_interior_loop: bool,
    /// `length - (nodes - 1) * ds` for boundary characteristics.
    pub gap: f64,
    pub exit_point: Option<Point>,
    offset: usize,
    nodes: usize,
}

impl Characteristic {
    /// Number of stored nodes.
    pub fn nodes(&self) -> usize {
        self.nodes
    }

    /// Index of the last node (boundary characteristics).
    pub fn last(&self) -> usize {
        self.nodes - 1
    }

    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.nodes
    }

    pub fn has_outlet(&self) -> bool {
        !self.is_interior_loop && !self.capped
    }
}

#[derive(Debug, Clone)]
pub struct CharacteristicGrid {
    ds: f64,
    horizon: f64,
    dim: usize,
    characteristics: Vec<Characteristic>,
    positions: Vec<Point>,
    inlets: Vec<usize>,
    outlets: Vec<usize>,
    inlet_of: Vec<Option<usize>>,
    outlet_of: Vec<Option<usize>>,
}

const ARC_SAMPLES: usize = 4096;

impl CharacteristicGrid {
    /// Traces `n_chars` characteristics of `flow` through its domain.
    /// One-dimensional and graph domains seed exactly one characteristic
    /// per inlet and ignore `n_chars`.
    pub fn build(flow: &Flow, measure: &Measure, n_chars: usize, ds: f64) -> Result<Self> {
        if n_chars == 0 {
            return Err(Error::Argument("n_chars must be at least 1".into()));
        }
        if !(ds > 0.0 && ds.is_finite()) {
            return Err(Error::Argument(format!("ds must be positive, got {ds}")));
        }
        if flow.horizon() < ds {
            return Err(Error::Argument("horizon must be at least ds".into()));
        }
        check_nonempty(flow.domain())?;
        let mut b = Builder::new(flow, ds);
        match flow.domain() {
            Domain::Interval { lo, hi } => b.seed_interval(*lo, *hi)?,
            Domain::Graph { edges } => {
                let weights = match measure {
                    Measure::GraphAtoms(w) => {
                        if w.len() != edges.len() {
                            return Err(Error::Dimension { expected: edges.len(), got: w.len() });
                        }
                        w.clone()
                    }
                    Measure::Lebesgue => vec![1.0; edges.len()],
                };
                for (e, w) in edges.iter().zip(weights) {
                    if !(w > 0.0) {
                        return Err(Error::Config("graph atom weights must be positive".into()));
                    }
                    let len = e.length();
                    let positions = b.edge_nodes(e, len);
                    b.push_boundary(e.from, w, len, false, Some(e.to), positions);
                }
            }
            domain => {
                let curves = domain.boundary_curves();
                let arcs = incoming_arcs(flow, &curves);
                if arcs.is_empty() {
                    b.seed_loops(n_chars)?;
                } else {
                    b.seed_arcs(&curves, &arcs, n_chars)?;
                }
            }
        }
        if b.chars.is_empty() {
            return Err(Error::Config("no characteristic enters the domain".into()));
        }
        Ok(b.finish(flow.domain().dim()))
    }

    pub fn ds(&self) -> f64 {
        self.ds
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn characteristics(&self) -> &[Characteristic] {
        &self.characteristics
    }

    pub fn n_nodes(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn position(&self, i: usize, j: usize) -> Point {
        self.positions[self.characteristics[i].offset + j]
    }

    /// Backward stay time of node `j` on characteristic `i`.
    pub fn tau_minus(&self, i: usize, j: usize) -> f64 {
        let c = &self.characteristics[i];
        if c.is_interior_loop {
            f64::INFINITY
        } else {
            j as f64 * self.ds
        }
    }

    /// Forward stay time of node `j` on characteristic `i`.
    pub fn tau_plus(&self, i: usize, j: usize) -> f64 {
        let c = &self.characteristics[i];
        if c.is_interior_loop || c.capped {
            f64::INFINITY
        } else {
            (c.length - j as f64 * self.ds).max(0.0)
        }
    }

    /// Characteristic index of every incoming boundary node.
    pub fn inlets(&self) -> &[usize] {
        &self.inlets
    }

    /// Characteristic index of every outgoing boundary node.
    pub fn outlets(&self) -> &[usize] {
        &self.outlets
    }

    pub fn inlet_of(&self, i: usize) -> Option<usize> {
        self.inlet_of[i]
    }

    pub fn outlet_of(&self, i: usize) -> Option<usize> {
        self.outlet_of[i]
    }

    pub fn has_boundary(&self) -> bool {
        !self.inlets.is_empty()
    }

    pub fn weights(&self, side: Side) -> Vec<f64> {
        self.side_chars(side).iter().map(|&i| self.characteristics[i].weight).collect()
    }

    /// `tau_+` at incoming nodes, `tau_-` at outgoing nodes; infinite when
    /// capped.
    pub fn stay_times(&self, side: Side) -> Vec<f64> {
        self.side_chars(side)
            .iter()
            .map(|&i| {
                let c = &self.characteristics[i];
                if c.capped {
                    f64::INFINITY
                } else {
                    c.length
                }
            })
            .collect()
    }

    pub fn side_chars(&self, side: Side) -> &[usize] {
        match side {
            Side::Incoming => &self.inlets,
            Side::Outgoing => &self.outlets,
        }
    }

    /// Smallest backward stay time over outgoing nodes; the minimal time
    /// between two boundary interactions.
    pub fn min_return_time(&self) -> Option<f64> {
        self.outlets
            .iter()
            .map(|&i| self.characteristics[i].length)
            .min_by(f64::total_cmp)
    }

    /// `sum_i w_i * integral of phi along characteristic i`, where `phi`
    /// holds per-node integrand values and `phi_end[i]` its value at the
    /// exit point.
    pub fn integrate(&self, phi: &[f64], phi_end: &[f64]) -> f64 {
        self.characteristics
            .iter()
            .zip(phi_end)
            .map(|(c, &end)| c.weight * self.char_integral(c, &phi[c.range()], end))
            .sum()
    }

    pub(crate) fn char_integral(&self, c: &Characteristic, phi: &[f64], end: f64) -> f64 {
        if c.is_interior_loop {
            return self.ds * phi.iter().sum::<f64>();
        }
        let n = phi.len() - 1;
        if n == 0 {
            return c.gap * 0.5 * (phi[0] + end);
        }
        let inner: f64 = phi[1..n].iter().sum();
        self.ds * (0.5 * phi[0] + inner + 0.5 * phi[n]) + c.gap * 0.5 * (phi[n] + end)
    }

    /// Linear extrapolation of node values to the exit point.
    pub(crate) fn end_value(&self, c: &Characteristic, v: &[f64]) -> f64 {
        if c.is_interior_loop {
            return v[0];
        }
        let n = v.len() - 1;
        if n == 0 {
            v[0]
        } else {
            v[n] + (v[n] - v[n - 1]) * c.gap / self.ds
        }
    }
}

fn check_nonempty(domain: &Domain) -> Result<()> {
    let empty = match *domain {
        Domain::Interval { lo, hi } => !(hi > lo),
        Domain::Box { lo, hi } => !(hi[0] > lo[0] && hi[1] > lo[1]),
        Domain::Disk { radius, .. } => !(radius > 0.0),
        Domain::Annulus { inner, outer, .. } => !(inner >= 0.0 && outer > inner),
        Domain::Graph { ref edges } => edges.is_empty() || edges.iter().any(|e| !(e.length() > 0.0)),
    };
    if empty {
        Err(Error::Config(format!("domain {domain:?} is empty")))
    } else {
        Ok(())
    }
}

/// Maximal parameter intervals `(curve, u0, u1)` on which the field points
/// into the domain; `u1` may exceed 1 for arcs wrapping through `u = 0`.
fn incoming_arcs(flow: &Flow, curves: &[BoundaryCurve]) -> Vec<(usize, f64, f64)> {
    let inflow = |c: &BoundaryCurve, u: f64| {
        let v = flow.field().eval(c.point(u));
        let n = c.normal(u);
        let fn_ = v[0] * n[0] + v[1] * n[1];
        fn_ < -1e-12 * (v[0].hypot(v[1])).max(1e-300)
    };
    let refine = |c: &BoundaryCurve, mut a: f64, mut b: f64, a_in: bool| {
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            if inflow(c, m) == a_in {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    };
    let mut arcs = Vec::new();
    for (ci, c) in curves.iter().enumerate() {
        let du = 1.0 / ARC_SAMPLES as f64;
        let flags: Vec<bool> = (0..ARC_SAMPLES).map(|k| inflow(c, k as f64 * du)).collect();
        if flags.iter().all(|&f| f) {
            arcs.push((ci, 0.0, 1.0));
            continue;
        }
        let Some(start) = flags.iter().position(|&f| !f) else { continue };
        // Walk once around the curve starting from an outflow sample so that
        // every arc is seen whole.
        let mut k = 0;
        while k < ARC_SAMPLES {
            let idx = (start + k) % ARC_SAMPLES;
            let next = (start + k + 1) % ARC_SAMPLES;
            if !flags[idx] && flags[next] {
                let u_a = (start + k) as f64 * du;
                let lo = refine(c, u_a, u_a + du, false);
                let mut m = k + 1;
                while flags[(start + m) % ARC_SAMPLES] {
                    m += 1;
                }
                let u_b = (start + m - 1) as f64 * du;
                let hi = refine(c, u_b, u_b + du, true);
                let shift = lo.div_euclid(1.0);
                arcs.push((ci, lo - shift, hi - shift));
                k = m;
            } else {
                k += 1;
            }
        }
    }
    arcs
}

struct Builder<'a> {
    flow: &'a Flow,
    ds: f64,
    chars: Vec<Characteristic>,
    positions: Vec<Point>,
}

impl<'a> Builder<'a> {
    fn new(flow: &'a Flow, ds: f64) -> Self {
        Self { flow, ds, chars: Vec::new(), positions: Vec::new() }
    }

    fn seed_interval(&mut self, lo: f64, hi: f64) -> Result<()> {
        for (x, normal) in [(lo, -1.0), (hi, 1.0)] {
            if !x.is_finite() {
                continue;
            }
            let fn_ = self.flow.field().eval([x, 0.0])[0] * normal;
            if fn_ < 0.0 {
                self.trace_from([x, 0.0], -fn_)?;
            }
        }
        Ok(())
    }

    fn seed_arcs(&mut self, curves: &[BoundaryCurve], arcs: &[(usize, f64, f64)], n_chars: usize) -> Result<()> {
        let lens: Vec<f64> = arcs.iter().map(|&(c, a, b)| (b - a) * curves[c].speed()).collect();
        let total: f64 = lens.iter().sum();
        // Largest-remainder allocation of seeds proportional to arc length.
        let raw: Vec<f64> = lens.iter().map(|l| n_chars as f64 * l / total).collect();
        let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
        let mut order: Vec<usize> = (0..arcs.len()).collect();
        order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())));
        let mut left = n_chars - counts.iter().sum::<usize>();
        for &k in order.iter().cycle() {
            if left == 0 {
                break;
            }
            counts[k] += 1;
            left -= 1;
        }
        for (&(ci, a, b), &m) in arcs.iter().zip(&counts) {
            let curve = &curves[ci];
            let du = (b - a) / m.max(1) as f64;
            for k in 0..m {
                let u = a + (k as f64 + 0.5) * du;
                let y = curve.point(u);
                let v = self.flow.field().eval(y);
                let n = curve.normal(u);
                let w = -(v[0] * n[0] + v[1] * n[1]) * curve.speed() * du;
                if w > 0.0 {
                    self.trace_from(y, w)?;
                }
            }
        }
        Ok(())
    }

    fn seed_loops(&mut self, n_chars: usize) -> Result<()> {
        let Some((a, b)) = self.flow.domain().radial_section() else {
            return Err(Error::Config("domain has no incoming boundary and no interior section".into()));
        };
        let len = dist(a, b);
        let normal = [-(b[1] - a[1]) / len, (b[0] - a[0]) / len];
        let dr = len / n_chars as f64;
        for k in 0..n_chars {
            let r = (k as f64 + 0.5) / n_chars as f64;
            let x = [a[0] + r * (b[0] - a[0]), a[1] + r * (b[1] - a[1])];
            let v = self.flow.field().eval(x);
            let w = (v[0] * normal[0] + v[1] * normal[1]).abs() * dr;
            if !(w > 0.0) {
                continue;
            }
            let Some(period) = self.flow.return_time(x, a, b)? else {
                return Err(Error::Config(format!("interior seed {x:?} does not return within the horizon")));
            };
            let n = (period / self.ds).round().max(1.0) as usize;
            let positions = self.trajectory(x, n)?;
            self.chars.push(Characteristic {
                inlet: x,
                // Rescaled so that the periodic rule over n nodes carries the
                // mass of the full orbit.
                weight: w * period / (n as f64 * self.ds),
                length: period,
                capped: true,
                is_interior_loop: true,
                gap: 0.0,
                exit_point: None,
                offset: self.positions.len(),
                nodes: n,
            });
            self.positions.extend(positions);
        }
        Ok(())
    }

    fn trace_from(&mut self, y: Point, weight: f64) -> Result<()> {
        let Some(exit) = self.flow.exit_from_boundary(y, Direction::Forward)? else {
            return Ok(());
        };
        let len = if exit.capped { self.flow.horizon() } else { exit.time };
        let n = last_node(len, self.ds);
        let positions = self.trajectory(y, n + 1)?;
        self.push_boundary(y, weight, len, exit.capped, exit.footpoint, positions);
        Ok(())
    }

    fn edge_nodes(&self, e: &crate::flow::GraphEdge, len: f64) -> Vec<Point> {
        let n = last_node(len, self.ds);
        (0..=n).map(|j| e.at(j as f64 * self.ds)).collect()
    }

    fn push_boundary(&mut self, y: Point, weight: f64, len: f64, capped: bool, exit: Option<Point>, positions: Vec<Point>) {
        let n = positions.len() - 1;
        let mut gap = len - n as f64 * self.ds;
        let mut length = len;
        if gap.abs() < 1e-8 * self.ds {
            gap = 0.0;
            length = n as f64 * self.ds;
        }
        self.chars.push(Characteristic {
            inlet: y,
            weight,
            length,
            capped,
            is_interior_loop: false,
            gap,
            exit_point: if capped { None } else { exit },
            offset: self.positions.len(),
            nodes: n + 1,
        });
        self.positions.extend(positions);
    }

    fn trajectory(&self, x: Point, count: usize) -> Result<Vec<Point>> {
        let mut out = Vec::with_capacity(count);
        let closed = self.flow.field().closed_form(x, 0.0).is_some();
        let mut y = x;
        for j in 0..count {
            if closed {
                out.push(self.flow.integrate(x, j as f64 * self.ds)?);
            } else {
                if j > 0 {
                    y = self.flow.integrate(y, self.ds)?;
                }
                out.push(y);
            }
        }
        Ok(out)
    }

    fn finish(self, dim: usize) -> CharacteristicGrid {
        let mut inlets = Vec::new();
        let mut outlets = Vec::new();
        let mut inlet_of = Vec::with_capacity(self.chars.len());
        let mut outlet_of = Vec::with_capacity(self.chars.len());
        for (i, c) in self.chars.iter().enumerate() {
            if c.is_interior_loop {
                inlet_of.push(None);
            } else {
                inlet_of.push(Some(inlets.len()));
                inlets.push(i);
            }
            if c.has_outlet() {
                outlet_of.push(Some(outlets.len()));
                outlets.push(i);
            } else {
                outlet_of.push(None);
            }
        }
        CharacteristicGrid {
            ds: self.ds,
            horizon: self.flow.horizon(),
            dim,
            characteristics: self.chars,
            positions: self.positions,
            inlets,
            outlets,
            inlet_of,
            outlet_of,
        }
    }
}

/// Index of the last node at or before arc-time `len`.
fn last_node(len: f64, ds: f64) -> usize {
    let r = len / ds;
    let n = r.round();
    if (r - n).abs() < 1e-8 {
        n as usize
    } else {
        r.floor() as usize
    }
}
