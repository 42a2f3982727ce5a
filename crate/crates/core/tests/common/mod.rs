#![allow(dead_code)]

use charflow::flow::Direction;
use charflow::scenario::{preset, BoundaryConfig, Gain, Pairing, PairingRule, Scenario, ScenarioConfig};
use charflow::{Flow, Point};
use rand::Rng;

pub fn preset_with_alpha(name: &str, alpha: f64, pairing: PairingRule) -> ScenarioConfig {
    let mut cfg = preset(name).unwrap();
    cfg.boundary = BoundaryConfig::Multiplicative { alpha: Gain::Uniform(alpha), pairing: Pairing::Rule(pairing) };
    cfg
}

pub fn slab(alpha: f64) -> Scenario {
    Scenario::build(&preset_with_alpha("slab1d", alpha, PairingRule::Identity)).unwrap()
}

/// `alpha^k f(x - t + k)` with `k = ceil(t - x)` crossings of the unit slab.
pub fn slab_closed_form(f: impl Fn(f64) -> f64, alpha: f64, t: f64, x: f64) -> f64 {
    let k = (t - x).ceil().max(0.0);
    alpha.powi(k as i32) * f(x - t + k)
}

/// Follows the characteristic through `x` backwards for time `t`, jumping
/// from the inlet to `outlet` and multiplying by `alpha` at every crossing.
pub fn ray_trace(flow: &Flow, outlet: Point, x: Point, t: f64, alpha: f64, f: impl Fn(Point) -> f64) -> f64 {
    let mut y = x;
    let mut left = t;
    let mut factor = 1.0;
    loop {
        let tau = if flow.domain().contains(y) {
            flow.exit_time(y, Direction::Backward).unwrap().time
        } else if y == outlet {
            flow.exit_from_boundary(y, Direction::Backward).unwrap().map_or(0.0, |e| e.time)
        } else {
            0.0
        };
        if left <= tau + 1e-12 {
            return factor * f(flow.integrate(y, -left).unwrap());
        }
        left -= tau;
        factor *= alpha;
        y = outlet;
    }
}

/// Random low-degree trigonometric polynomial in two variables.
pub struct Trig {
    c: f64,
    terms: Vec<[f64; 4]>,
}

impl Trig {
    pub fn sample(rng: &mut impl Rng, degree: f64) -> Self {
        Self {
            c: rng.gen_range(-1.0..1.0),
            terms: (0..3)
                .map(|_| {
                    [
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-degree..degree),
                        rng.gen_range(-degree..degree),
                        rng.gen_range(0.0..6.3),
                    ]
                })
                .collect(),
        }
    }

    pub fn eval(&self, x: Point) -> f64 {
        self.c + self.terms.iter().map(|[a, kx, ky, ph]| a * (kx * x[0] + ky * x[1] + ph).sin()).sum::<f64>()
    }
}
