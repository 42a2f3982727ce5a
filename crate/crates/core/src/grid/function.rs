use std::sync::Arc;

use super::{Characteristic, CharacteristicGrid};
use crate::error::{Error, Result};
use crate::flow::Point;

/// Node values of a function on the characteristic grid, in the space
/// `L^p` of the reference measure.
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Arc<CharacteristicGrid>,
    values: Vec<f64>,
    p: f64,
}

impl PartialEq for GridFunction {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) && self.p == other.p && self.values == other.values
    }
}

fn check_p(p: f64) -> Result<()> {
    if p > 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::Argument(format!("exponent p must lie in (1, inf), got {p}")))
    }
}

impl GridFunction {
    pub fn zeros(grid: Arc<CharacteristicGrid>, p: f64) -> Result<Self> {
        check_p(p)?;
        let n = grid.n_nodes();
        Ok(Self { grid, values: vec![0.0; n], p })
    }

    pub fn from_values(grid: Arc<CharacteristicGrid>, values: Vec<f64>, p: f64) -> Result<Self> {
        check_p(p)?;
        if values.len() != grid.n_nodes() {
            return Err(Error::Dimension { expected: grid.n_nodes(), got: values.len() });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Argument(format!("non-finite value at node {k}")));
        }
        Ok(Self { grid, values, p })
    }

    /// Samples a function of position.
    pub fn from_fn(grid: Arc<CharacteristicGrid>, p: f64, f: impl Fn(Point) -> f64) -> Result<Self> {
        let values = grid.positions().iter().map(|&x| f(x)).collect();
        Self::from_values(grid, values, p)
    }

    /// Samples a function of `(characteristic index, arc time)`.
    pub fn from_char_fn(grid: Arc<CharacteristicGrid>, p: f64, f: impl Fn(usize, f64) -> f64) -> Result<Self> {
        let mut values = vec![0.0; grid.n_nodes()];
        for (i, c) in grid.characteristics().iter().enumerate() {
            for (j, v) in values[c.range()].iter_mut().enumerate() {
                *v = f(i, j as f64 * grid.ds());
            }
        }
        Self::from_values(grid, values, p)
    }

    pub(crate) fn from_raw(grid: Arc<CharacteristicGrid>, values: Vec<f64>, p: f64) -> Self {
        debug_assert_eq!(values.len(), grid.n_nodes());
        Self { grid, values, p }
    }

    pub fn grid(&self) -> &Arc<CharacteristicGrid> {
        &self.grid
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn char_values(&self, i: usize) -> &[f64] {
        &self.values[self.grid.characteristics()[i].range()]
    }

    pub(crate) fn char_values_of(&self, c: &Characteristic) -> &[f64] {
        &self.values[c.range()]
    }

    pub(crate) fn values_mut(&mut self) -> &mut Vec<f64> {
        &mut self.values
    }

    pub fn with_values(&self, values: Vec<f64>) -> Self {
        Self::from_raw(self.grid.clone(), values, self.p)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.with_values(self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.with_values(self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect())
    }

    pub fn add_scaled(&mut self, a: f64, other: &Self) {
        for (x, y) in self.values.iter_mut().zip(&other.values) {
            *x += a * y;
        }
    }

    /// Extrapolated value at the exit point of every characteristic.
    pub fn end_values(&self) -> Vec<f64> {
        self.grid
            .characteristics()
            .iter()
            .map(|c| self.grid.end_value(c, &self.values[c.range()]))
            .collect()
    }

    /// `integral of g(f) d mu`.
    pub fn integral_of(&self, g: impl Fn(f64) -> f64) -> f64 {
        let phi: Vec<f64> = self.values.iter().map(|&v| g(v)).collect();
        let end: Vec<f64> = self.end_values().into_iter().map(g).collect();
        self.grid.integrate(&phi, &end)
    }

    /// `integral of g(f, h) d mu` for another function on the same grid.
    pub fn integral_with(&self, other: &Self, g: impl Fn(f64, f64) -> f64) -> f64 {
        let phi: Vec<f64> = self.values.iter().zip(&other.values).map(|(&a, &b)| g(a, b)).collect();
        let end: Vec<f64> = self
            .end_values()
            .into_iter()
            .zip(other.end_values())
            .map(|(a, b)| g(a, b))
            .collect();
        self.grid.integrate(&phi, &end)
    }

    pub fn lp_norm_pow(&self) -> f64 {
        let p = self.p;
        self.integral_of(|v| v.abs().powf(p))
    }

    pub fn lp_norm(&self) -> f64 {
        self.lp_norm_pow().powf(1.0 / self.p)
    }

    /// `T_max f = -df/ds` along characteristics: centred differences inside,
    /// second-order one-sided at the ends, periodic on closed orbits.
    pub fn apply_generator(&self) -> Result<GridFunction> {
        let ds = self.grid.ds();
        let mut out = vec![0.0; self.values.len()];
        for (i, c) in self.grid.characteristics().iter().enumerate() {
            let v = &self.values[c.range()];
            let g = &mut out[c.range()];
            let n = v.len();
            if c.is_interior_loop {
                if n < 3 {
                    return Err(Error::DegenerateGrid { index: i });
                }
                for j in 0..n {
                    g[j] = -(v[(j + 1) % n] - v[(j + n - 1) % n]) / (2.0 * ds);
                }
                continue;
            }
            match n {
                0 | 1 => return Err(Error::DegenerateGrid { index: i }),
                2 => {
                    let d = -(v[1] - v[0]) / ds;
                    g[0] = d;
                    g[1] = d;
                }
                _ => {
                    g[0] = -(-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * ds);
                    for j in 1..n - 1 {
                        g[j] = -(v[j + 1] - v[j - 1]) / (2.0 * ds);
                    }
                    g[n - 1] = -(3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * ds);
                }
            }
        }
        Ok(self.with_values(out))
    }

    /// Boundary trace `B- f` (node 0) or `B+ f` (extrapolated to the exit).
    pub fn trace(&self, side: Side) -> Result<TraceVector> {
        if !self.grid.has_boundary() {
            return Err(Error::EmptyTrace(side.name()));
        }
        let chars = self.grid.characteristics();
        let values = self
            .grid
            .side_chars(side)
            .iter()
            .map(|&i| {
                let c = &chars[i];
                let v = &self.values[c.range()];
                match side {
                    Side::Incoming => v[0],
                    Side::Outgoing => self.grid.end_value(c, v),
                }
            })
            .collect();
        Ok(TraceVector::from_raw(self.grid.clone(), side, values, self.p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Incoming,
    Outgoing,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Incoming => "incoming",
            Side::Outgoing => "outgoing",
        }
    }
}

/// Boundary norms: plain `L^p`, and the spaces weighted by `min(tau, 1)`
/// and `min(tau, 1)^(1-p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceSpace {
    Lp,
    Y,
    YTilde,
}

/// Values at the incoming or outgoing boundary nodes of a grid.
#[derive(Debug, Clone)]
pub struct TraceVector {
    grid: Arc<CharacteristicGrid>,
    side: Side,
    values: Vec<f64>,
    p: f64,
}

impl TraceVector {
    pub fn zeros(grid: Arc<CharacteristicGrid>, side: Side, p: f64) -> Result<Self> {
        check_p(p)?;
        let n = grid.side_chars(side).len();
        Ok(Self { grid, side, values: vec![0.0; n], p })
    }

    pub fn new(grid: Arc<CharacteristicGrid>, side: Side, values: Vec<f64>, p: f64) -> Result<Self> {
        check_p(p)?;
        let n = grid.side_chars(side).len();
        if values.len() != n {
            return Err(Error::Dimension { expected: n, got: values.len() });
        }
        Ok(Self { grid, side, values, p })
    }

    pub(crate) fn from_raw(grid: Arc<CharacteristicGrid>, side: Side, values: Vec<f64>, p: f64) -> Self {
        Self { grid, side, values, p }
    }

    pub fn grid(&self) -> &Arc<CharacteristicGrid> {
        &self.grid
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.grid.weights(self.side)
    }

    pub fn stay_times(&self) -> Vec<f64> {
        self.grid.stay_times(self.side)
    }

    pub fn with_values(&self, values: Vec<f64>) -> Self {
        Self::from_raw(self.grid.clone(), self.side, values, self.p)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.with_values(self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect())
    }

    /// Quadrature weights of `space` at every node.
    pub fn space_weights(&self, space: TraceSpace) -> Vec<f64> {
        let p = self.p;
        self.weights()
            .into_iter()
            .zip(self.stay_times())
            .map(|(w, tau)| {
                let m = if tau.is_finite() { tau.min(1.0) } else { 1.0 };
                match space {
                    TraceSpace::Lp => w,
                    TraceSpace::Y => w * m,
                    TraceSpace::YTilde => w * m.powf(1.0 - p),
                }
            })
            .collect()
    }

    pub fn norm_pow(&self, space: TraceSpace) -> f64 {
        let p = self.p;
        self.space_weights(space)
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v.abs().powf(p))
            .sum()
    }

    pub fn norm(&self, space: TraceSpace) -> f64 {
        self.norm_pow(space).powf(1.0 / self.p)
    }

    pub fn lp_norm(&self) -> f64 {
        self.norm(TraceSpace::Lp)
    }
}
