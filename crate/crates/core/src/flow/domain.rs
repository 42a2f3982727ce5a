use std::f64::consts::TAU;

use super::Point;

/// Axis-aligned box; `dim == 1` boxes ignore the second coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub lo: Point,
    pub hi: Point,
    pub dim: usize,
}

impl BoundingBox {
    pub fn interval(lo: f64, hi: f64) -> Self {
        Self { lo: [lo, 0.0], hi: [hi, 0.0], dim: 1 }
    }

    pub fn rect(lo: Point, hi: Point) -> Self {
        Self { lo, hi, dim: 2 }
    }

    pub fn contains(&self, x: Point) -> bool {
        (0..self.dim).all(|k| x[k] >= self.lo[k] && x[k] <= self.hi[k])
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim).map(|k| self.hi[k] - self.lo[k]).product()
    }

    pub fn diameter(&self) -> f64 {
        (0..self.dim)
            .map(|k| (self.hi[k] - self.lo[k]).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// A directed edge of a metric graph; material moves from `from` to `to`
/// with unit speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphEdge {
    pub from: Point,
    pub to: Point,
}

impl GraphEdge {
    pub fn length(&self) -> f64 {
        dist(self.from, self.to)
    }

    pub fn at(&self, s: f64) -> Point {
        let len = self.length();
        let u = s / len;
        [
            self.from[0] + u * (self.to[0] - self.from[0]),
            self.from[1] + u * (self.to[1] - self.from[1]),
        ]
    }
}

/// Open spatial domains supported by the engine.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Interval { lo: f64, hi: f64 },
    Box { lo: Point, hi: Point },
    Disk { center: Point, radius: f64 },
    Annulus { center: Point, inner: f64, outer: f64 },
    Graph { edges: Vec<GraphEdge> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    Interval,
    Box,
    Disk,
    Annulus,
    GraphEdgeSet,
}

/// A closed boundary curve parametrised by `u in [0, 1)`.
#[derive(Debug, Clone, Copy)]
pub(crate) enum BoundaryCurve {
    /// `outward = 1.0` for an outer circle, `-1.0` for the rim of a hole.
    Circle { center: Point, radius: f64, outward: f64 },
    Rect { lo: Point, hi: Point },
}

impl BoundaryCurve {
    pub(crate) fn point(&self, u: f64) -> Point {
        match *self {
            BoundaryCurve::Circle { center, radius, .. } => {
                let (s, c) = (TAU * u).sin_cos();
                [center[0] + radius * c, center[1] + radius * s]
            }
            BoundaryCurve::Rect { lo, hi } => {
                let (w, h) = (hi[0] - lo[0], hi[1] - lo[1]);
                let d = u.rem_euclid(1.0) * 2.0 * (w + h);
                if d < w {
                    [lo[0] + d, lo[1]]
                } else if d < w + h {
                    [hi[0], lo[1] + (d - w)]
                } else if d < 2.0 * w + h {
                    [hi[0] - (d - w - h), hi[1]]
                } else {
                    [lo[0], hi[1] - (d - 2.0 * w - h)]
                }
            }
        }
    }

    pub(crate) fn normal(&self, u: f64) -> Point {
        match *self {
            BoundaryCurve::Circle { outward, .. } => {
                let (s, c) = (TAU * u).sin_cos();
                [outward * c, outward * s]
            }
            BoundaryCurve::Rect { lo, hi } => {
                let (w, h) = (hi[0] - lo[0], hi[1] - lo[1]);
                let d = u.rem_euclid(1.0) * 2.0 * (w + h);
                if d < w {
                    [0.0, -1.0]
                } else if d < w + h {
                    [1.0, 0.0]
                } else if d < 2.0 * w + h {
                    [0.0, 1.0]
                } else {
                    [-1.0, 0.0]
                }
            }
        }
    }

    /// `|d point / du|`, constant for both curve types.
    pub(crate) fn speed(&self) -> f64 {
        match *self {
            BoundaryCurve::Circle { radius, .. } => TAU * radius,
            BoundaryCurve::Rect { lo, hi } => 2.0 * ((hi[0] - lo[0]) + (hi[1] - lo[1])),
        }
    }
}

impl Domain {
    pub fn kind(&self) -> DomainKind {
        match self {
            Domain::Interval { .. } => DomainKind::Interval,
            Domain::Box { .. } => DomainKind::Box,
            Domain::Disk { .. } => DomainKind::Disk,
            Domain::Annulus { .. } => DomainKind::Annulus,
            Domain::Graph { .. } => DomainKind::GraphEdgeSet,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            _ => 2,
        }
    }

    /// Membership in the open domain.
    pub fn contains(&self, x: Point) -> bool {
        match *self {
            Domain::Interval { lo, hi } => x[0] > lo && x[0] < hi,
            Domain::Box { lo, hi } => x[0] > lo[0] && x[0] < hi[0] && x[1] > lo[1] && x[1] < hi[1],
            Domain::Disk { center, radius } => dist(x, center) < radius,
            Domain::Annulus { center, inner, outer } => {
                let r = dist(x, center);
                r > inner && r < outer
            }
            Domain::Graph { ref edges } => edges.iter().any(|e| {
                let len = e.length();
                let t = ((x[0] - e.from[0]) * (e.to[0] - e.from[0])
                    + (x[1] - e.from[1]) * (e.to[1] - e.from[1]))
                    / (len * len);
                t > 0.0 && t < 1.0 && dist(x, e.at(t * len)) < 1e-12 * len.max(1.0)
            }),
        }
    }

    pub fn bounding_box(&self) -> BoundingBox {
        match *self {
            Domain::Interval { lo, hi } => BoundingBox::interval(lo, hi),
            Domain::Box { lo, hi } => BoundingBox::rect(lo, hi),
            Domain::Disk { center, radius } => BoundingBox::rect(
                [center[0] - radius, center[1] - radius],
                [center[0] + radius, center[1] + radius],
            ),
            Domain::Annulus { center, outer, .. } => BoundingBox::rect(
                [center[0] - outer, center[1] - outer],
                [center[0] + outer, center[1] + outer],
            ),
            Domain::Graph { ref edges } => {
                let mut lo = [f64::INFINITY; 2];
                let mut hi = [f64::NEG_INFINITY; 2];
                for e in edges {
                    for p in [e.from, e.to] {
                        for k in 0..2 {
                            lo[k] = lo[k].min(p[k]);
                            hi[k] = hi[k].max(p[k]);
                        }
                    }
                }
                BoundingBox::rect(lo, hi)
            }
        }
    }

    /// Diameter of the bounding box; unbounded domains report 1 so that
    /// relative tolerances stay meaningful.
    pub fn diameter(&self) -> f64 {
        let d = self.bounding_box().diameter();
        if d.is_finite() && d > 0.0 {
            d
        } else {
            1.0
        }
    }

    /// Lebesgue measure of the domain (total edge length for graphs).
    pub fn volume(&self) -> f64 {
        match *self {
            Domain::Interval { lo, hi } => hi - lo,
            Domain::Box { lo, hi } => (hi[0] - lo[0]) * (hi[1] - lo[1]),
            Domain::Disk { radius, .. } => std::f64::consts::PI * radius * radius,
            Domain::Annulus { inner, outer, .. } => std::f64::consts::PI * (outer * outer - inner * inner),
            Domain::Graph { ref edges } => edges.iter().map(GraphEdge::length).sum(),
        }
    }

    pub(crate) fn boundary_curves(&self) -> Vec<BoundaryCurve> {
        match *self {
            Domain::Box { lo, hi } => vec![BoundaryCurve::Rect { lo, hi }],
            Domain::Disk { center, radius } => vec![BoundaryCurve::Circle { center, radius, outward: 1.0 }],
            Domain::Annulus { center, inner, outer } => vec![
                BoundaryCurve::Circle { center, radius: outer, outward: 1.0 },
                BoundaryCurve::Circle { center, radius: inner, outward: -1.0 },
            ],
            Domain::Interval { .. } | Domain::Graph { .. } => Vec::new(),
        }
    }

    /// Radial section used to seed closed orbits, from the inner to the
    /// outer edge along the positive first axis.
    pub(crate) fn radial_section(&self) -> Option<(Point, Point)> {
        match *self {
            Domain::Disk { center, radius } => Some((center, [center[0] + radius, center[1]])),
            Domain::Annulus { center, inner, outer } => {
                Some(([center[0] + inner, center[1]], [center[0] + outer, center[1]]))
            }
            _ => None,
        }
    }
}

#[inline]
pub(crate) fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}
