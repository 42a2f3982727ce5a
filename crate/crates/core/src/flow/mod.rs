//! Characteristic flow of an autonomous vector field, stay times and
//! boundary footpoints.

mod domain;
mod field;

pub use domain::{BoundingBox, Domain, DomainKind, GraphEdge};
pub(crate) use domain::{dist, BoundaryCurve};
pub use field::{FieldKind, VectorField};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Along the field, towards the outgoing boundary.
    Forward,
    /// Against the field, towards the incoming boundary.
    Backward,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

/// One located boundary crossing (or the absence of one within the horizon).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exit {
    /// Stay time; `f64::INFINITY` when capped.
    pub time: f64,
    pub capped: bool,
    /// `Phi(x, +-time)` for finite exits.
    pub footpoint: Option<Point>,
}

impl Exit {
    fn capped() -> Self {
        Self { time: f64::INFINITY, capped: true, footpoint: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitTimes {
    pub tau_minus: f64,
    pub tau_plus: f64,
    pub minus_capped: bool,
    pub plus_capped: bool,
    pub footpoint_minus: Option<Point>,
    pub footpoint_plus: Option<Point>,
}

/// Flow map of `field` restricted to `domain`, integrated with fixed-step
/// RK4 unless the field has a closed form.
#[derive(Debug, Clone)]
pub struct Flow {
    field: VectorField,
    domain: Domain,
    step: f64,
    horizon: f64,
}

const MAX_BISECTIONS: usize = 200;

impl Flow {
    pub fn new(field: VectorField, domain: Domain, step: f64, horizon: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::Argument(format!("integration step must be positive, got {step}")));
        }
        if !(horizon > 0.0) {
            return Err(Error::Argument(format!("horizon must be positive, got {horizon}")));
        }
        if !field.lipschitz_bound().is_finite() {
            return Err(Error::Argument("field Lipschitz bound must be finite".into()));
        }
        Ok(Self { field, domain, step, horizon })
    }

    pub fn field(&self) -> &VectorField {
        &self.field
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `Phi(x, t)` for signed `t`.
    pub fn integrate(&self, x: Point, t: f64) -> Result<Point> {
        if let Some(y) = self.field.closed_form(x, t) {
            return if y[0].is_finite() && y[1].is_finite() {
                Ok(y)
            } else {
                Err(Error::IntegrationFailure { time: t, last_valid: x })
            };
        }
        if t == 0.0 {
            return Ok(x);
        }
        let n = (t.abs() / self.step).ceil().max(1.0) as usize;
        let h = t / n as f64;
        let mut y = x;
        for k in 0..n {
            let next = rk4_step(&self.field, y, h);
            if !(next[0].is_finite() && next[1].is_finite()) {
                return Err(Error::IntegrationFailure { time: k as f64 * h, last_valid: y });
            }
            y = next;
        }
        Ok(y)
    }

    /// Time tolerance used when bisecting a crossing near `x`; corresponds
    /// to a spatial tolerance of `1e-12 * diameter`.
    pub fn crossing_tolerance(&self, x: Point) -> f64 {
        let v = self.field.eval(x);
        let speed = (v[0] * v[0] + v[1] * v[1]).sqrt();
        1e-12 * self.domain.diameter() / speed.max(1e-300)
    }

    /// Stay time of an interior point in direction `dir`.
    pub fn exit_time(&self, x: Point, dir: Direction) -> Result<Exit> {
        if !self.domain.contains(x) {
            return Err(Error::OutsideDomain(x));
        }
        self.march_to_exit(x, dir)
    }

    pub fn exit_times(&self, x: Point) -> Result<ExitTimes> {
        let minus = self.exit_time(x, Direction::Backward)?;
        let plus = self.exit_time(x, Direction::Forward)?;
        Ok(ExitTimes {
            tau_minus: minus.time,
            tau_plus: plus.time,
            minus_capped: minus.capped,
            plus_capped: plus.capped,
            footpoint_minus: minus.footpoint,
            footpoint_plus: plus.footpoint,
        })
    }

    /// Stay time of a characteristic starting on the boundary at `y` and
    /// entering the domain in direction `dir`. `None` when the curve does
    /// not enter (tangential or outward) within one step.
    pub fn exit_from_boundary(&self, y: Point, dir: Direction) -> Result<Option<Exit>> {
        let sign = dir.sign();
        for k in 1..=16 {
            let s0 = self.step * k as f64 / 16.0;
            let x0 = self.integrate(y, sign * s0)?;
            if self.domain.contains(x0) {
                let rest = self.march_to_exit(x0, dir)?;
                return Ok(Some(if rest.capped {
                    rest
                } else {
                    Exit { time: s0 + rest.time, ..rest }
                }));
            }
        }
        Ok(None)
    }

    fn march_to_exit(&self, x: Point, dir: Direction) -> Result<Exit> {
        let sign = dir.sign();
        let h = self.step;
        let mut s = 0.0;
        let mut y = x;
        let mut k = 0usize;
        while s < self.horizon {
            k += 1;
            let s_next = (k as f64 * h).min(self.horizon);
            let y_next = self.integrate(y, sign * (s_next - s))?;
            if !self.domain.contains(y_next) {
                let tol = self.crossing_tolerance(y);
                let (mut lo, mut hi) = (0.0, s_next - s);
                for _ in 0..MAX_BISECTIONS {
                    if hi - lo <= tol {
                        break;
                    }
                    let mid = 0.5 * (lo + hi);
                    if self.domain.contains(self.integrate(y, sign * mid)?) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let tau = s + 0.5 * (lo + hi);
                let foot = self.integrate(y, sign * 0.5 * (lo + hi))?;
                return Ok(Exit { time: tau, capped: false, footpoint: Some(foot) });
            }
            s = s_next;
            y = y_next;
        }
        Ok(Exit::capped())
    }

    /// Time for the orbit through `x` to cross the segment `a -> b` again in
    /// the same direction; `None` if it does not return within the horizon.
    pub(crate) fn return_time(&self, x: Point, a: Point, b: Point) -> Result<Option<f64>> {
        let d = [b[0] - a[0], b[1] - a[1]];
        let side = |p: Point| d[0] * (p[1] - a[1]) - d[1] * (p[0] - a[0]);
        let on_segment = |p: Point| {
            let u = ((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / (d[0] * d[0] + d[1] * d[1]);
            (0.0..=1.0).contains(&u)
        };
        let v = self.field.eval(x);
        let crossing_sign = (d[0] * v[1] - d[1] * v[0]).signum();
        if crossing_sign == 0.0 {
            return Ok(None);
        }
        let h = self.step;
        let mut y = x;
        let mut s = 0.0;
        let mut k = 0usize;
        while s < self.horizon {
            k += 1;
            let s_next = k as f64 * h;
            let y_next = self.integrate(y, s_next - s)?;
            let (g0, g1) = (side(y), side(y_next));
            // The first step leaves the section, so a sign change there is
            // the departure itself.
            if k > 1 && crossing_sign * g0 < 0.0 && crossing_sign * g1 >= 0.0 {
                let (mut lo, mut hi) = (0.0, s_next - s);
                let tol = self.crossing_tolerance(y);
                for _ in 0..MAX_BISECTIONS {
                    if hi - lo <= tol {
                        break;
                    }
                    let mid = 0.5 * (lo + hi);
                    if crossing_sign * side(self.integrate(y, mid)?) < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let hit = self.integrate(y, 0.5 * (lo + hi))?;
                if on_segment(hit) {
                    return Ok(Some(s + 0.5 * (lo + hi)));
                }
            }
            s = s_next;
            y = y_next;
        }
        Ok(None)
    }
}

#[inline]
fn rk4_step(field: &VectorField, y: Point, h: f64) -> Point {
    let k1 = field.eval(y);
    let k2 = field.eval([y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
    let k3 = field.eval([y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
    let k4 = field.eval([y[0] + h * k3[0], y[1] + h * k3[1]]);
    [
        y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

type State = [f64; 6];

fn variational_rhs(field: &VectorField, u: &State) -> State {
    let x = [u[0], u[1]];
    let v = field.eval(x);
    let a = field.jacobian(x);
    let j = [[u[2], u[3]], [u[4], u[5]]];
    let mut out = [v[0], v[1], 0.0, 0.0, 0.0, 0.0];
    for r in 0..2 {
        for c in 0..2 {
            out[2 + 2 * r + c] = a[r][0] * j[0][c] + a[r][1] * j[1][c];
        }
    }
    out
}

fn rk4_variational(field: &VectorField, u: State, h: f64) -> State {
    let add = |a: &State, b: &State, s: f64| {
        let mut r = *a;
        for i in 0..6 {
            r[i] += s * b[i];
        }
        r
    };
    let k1 = variational_rhs(field, &u);
    let k2 = variational_rhs(field, &add(&u, &k1, 0.5 * h));
    let k3 = variational_rhs(field, &add(&u, &k2, 0.5 * h));
    let k4 = variational_rhs(field, &add(&u, &k3, h));
    let mut r = u;
    for i in 0..6 {
        r[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    r
}

/// Relative volume distortion `|mu(Phi_t A) - mu(A)| / mu(A)` of the cell
/// `A` under Lebesgue measure, estimated by averaging `det D Phi_t` from the
/// variational equation over stratified samples.
pub fn check_measure_invariance(field: &VectorField, cell: &BoundingBox, t: f64, n_samples: usize) -> Result<f64> {
    if !(cell.volume() > 0.0) {
        return Err(Error::Argument("measure-invariance cell has zero volume".into()));
    }
    if n_samples == 0 {
        return Err(Error::Argument("need at least one sample".into()));
    }
    let per_axis = match cell.dim {
        1 => n_samples,
        _ => (n_samples as f64).sqrt().ceil() as usize,
    };
    let mut points = Vec::new();
    for i in 0..per_axis {
        let ux = (i as f64 + 0.5) / per_axis as f64;
        let x0 = cell.lo[0] + ux * (cell.hi[0] - cell.lo[0]);
        if cell.dim == 1 {
            points.push([x0, 0.0]);
            continue;
        }
        for j in 0..per_axis {
            let uy = (j as f64 + 0.5) / per_axis as f64;
            points.push([x0, cell.lo[1] + uy * (cell.hi[1] - cell.lo[1])]);
        }
    }
    let n_steps = (t.abs() / 2.5e-4).ceil().max(1.0) as usize;
    let h = t / n_steps as f64;
    let mut total = 0.0;
    for p in &points {
        let mut u: State = [p[0], p[1], 1.0, 0.0, 0.0, 1.0];
        for _ in 0..n_steps {
            u = rk4_variational(field, u, h);
        }
        let det = if cell.dim == 1 { u[2] } else { u[2] * u[5] - u[3] * u[4] };
        if !det.is_finite() {
            return Err(Error::IntegrationFailure { time: t, last_valid: *p });
        }
        total += det;
    }
    Ok((total / points.len() as f64 - 1.0).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, FRAC_PI_2};

    fn slab() -> Flow {
        Flow::new(VectorField::constant([1.0, 0.0]), Domain::Interval { lo: 0.0, hi: 1.0 }, 2.5e-4, 10.0).unwrap()
    }

    #[test]
    fn closed_forms() {
        let f = slab();
        assert!((f.integrate([0.3, 0.0], 0.5).unwrap()[0] - 0.8).abs() < 1e-15);
        let rot = Flow::new(
            VectorField::rotation(1.0),
            Domain::Annulus { center: [0.0, 0.0], inner: 1.0, outer: 2.0 },
            2.5e-4,
            10.0,
        )
        .unwrap();
        let y = rot.integrate([1.5, 0.0], FRAC_PI_2).unwrap();
        assert!(y[0].abs() < 1e-15 && (y[1] - 1.5).abs() < 1e-15);
        assert_eq!(rot.integrate([0.7, -0.2], 0.0).unwrap(), [0.7, -0.2]);
    }

    #[test]
    fn rk4_matches_rotation() {
        let rot = VectorField::rotation(1.0);
        let custom = VectorField::custom(|x| [-x[1], x[0]], 1.0, true);
        let f = Flow::new(custom, Domain::Disk { center: [0.0; 2], radius: 3.0 }, 1e-3, 10.0).unwrap();
        let y = f.integrate([1.5, 0.0], 2.0).unwrap();
        let z = rot.closed_form([1.5, 0.0], 2.0).unwrap();
        assert!(dist(y, z) < 1e-12, "{y:?} vs {z:?}");
    }

    #[test]
    fn slab_exit_times() {
        let e = slab().exit_times([0.3, 0.0]).unwrap();
        assert!((e.tau_minus - 0.3).abs() < 1e-11);
        assert!((e.tau_plus - 0.7).abs() < 1e-11);
        assert!(!e.minus_capped && !e.plus_capped);
    }

    #[test]
    fn disk_center_chord() {
        let f = Flow::new(VectorField::constant([1.0, 0.0]), Domain::Disk { center: [0.0; 2], radius: 1.0 }, 2.5e-4, 10.0)
            .unwrap();
        let e = f.exit_times([0.0, 0.0]).unwrap();
        assert!((e.tau_minus - 1.0).abs() < 1e-11 && (e.tau_plus - 1.0).abs() < 1e-11);
    }

    #[test]
    fn closed_orbit_is_capped() {
        let f = Flow::new(
            VectorField::rotation(1.0),
            Domain::Annulus { center: [0.0; 2], inner: 1.0, outer: 2.0 },
            2.5e-3,
            10.0,
        )
        .unwrap();
        let e = f.exit_times([1.5, 0.0]).unwrap();
        assert!(e.minus_capped && e.plus_capped && e.tau_plus.is_infinite());
        let period = f.return_time([1.5, 0.0], [1.0, 0.0], [2.0, 0.0]).unwrap().unwrap();
        assert!((period - std::f64::consts::TAU).abs() < 1e-9, "{period}");
    }

    #[test]
    fn outside_point_rejected() {
        assert!(matches!(slab().exit_time([1.5, 0.0], Direction::Forward), Err(Error::OutsideDomain(_))));
    }

    #[test]
    fn boundary_start() {
        let e = slab().exit_from_boundary([0.0, 0.0], Direction::Forward).unwrap().unwrap();
        assert!((e.time - 1.0).abs() < 1e-11);
        assert!(slab().exit_from_boundary([1.0, 0.0], Direction::Forward).unwrap().is_none());
    }

    #[test]
    fn measure_invariance_controls() {
        let cell = BoundingBox::rect([0.5, 0.5], [1.0, 1.0]);
        let r = check_measure_invariance(&VectorField::constant([1.0, 0.0]), &cell, 1.0, 16).unwrap();
        assert_eq!(r, 0.0);
        let r = check_measure_invariance(&VectorField::rotation(1.0), &cell, 1.0, 16).unwrap();
        assert!(r < 1e-6);
        let r = check_measure_invariance(&VectorField::linear(1.0), &BoundingBox::interval(1.0, 2.0), 1.0, 16).unwrap();
        assert!((r - (E - 1.0)).abs() < 1e-9);
        assert!(check_measure_invariance(&VectorField::linear(1.0), &BoundingBox::interval(1.0, 1.0), 1.0, 4).is_err());
    }

    #[test]
    fn nonfinite_field_reports_last_state() {
        let blow = VectorField::custom(|x| if x[0] > 0.5 { [f64::NAN, 0.0] } else { [1.0, 0.0] }, 1.0, true);
        let f = Flow::new(blow, Domain::Interval { lo: 0.0, hi: 1.0 }, 0.01, 10.0).unwrap();
        match f.integrate([0.0, 0.0], 1.0) {
            Err(Error::IntegrationFailure { last_valid, .. }) => assert!(last_valid[0] <= 0.5 + 1e-12),
            other => panic!("{other:?}"),
        }
    }
}
