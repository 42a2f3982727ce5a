//! Smooth test data used by the checks.

use rand::Rng;

use crate::flow::Point;

/// Smooth function with nonzero traces on every preset domain.
pub fn smooth(x: Point) -> f64 {
    0.5 + 0.3 * (1.3 * x[0] + 0.4).sin() + 0.2 * (0.9 * x[1] - 0.3).cos() + 0.25 * x[0] * x[1]
}

/// Profile in relative arc-time `u in [0, 1]` vanishing to second order at
/// the inlet.
pub fn inlet_vanishing(u: f64) -> f64 {
    let s = (0.5 * std::f64::consts::PI * u).sin();
    s * s
}

/// Profile supported in `[0.2, 0.8]`, so it vanishes near both ends.
pub fn interior_profile(u: f64) -> f64 {
    let q = 1.0 - ((u - 0.5) / 0.3).powi(2);
    if q > 0.0 {
        q.powi(4)
    } else {
        0.0
    }
}

/// Random trigonometric polynomial of low degree.
#[derive(Debug, Clone)]
pub struct RandomSmooth {
    offset: f64,
    terms: Vec<[f64; 4]>,
}

impl RandomSmooth {
    pub fn sample(rng: &mut impl Rng) -> Self {
        let offset = rng.gen_range(-1.0..1.0);
        let terms = (0..4)
            .map(|_| {
                [
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-4.0..4.0),
                    rng.gen_range(-4.0..4.0),
                    rng.gen_range(0.0..std::f64::consts::TAU),
                ]
            })
            .collect();
        Self { offset, terms }
    }

    pub fn eval(&self, x: Point) -> f64 {
        self.offset + self.terms.iter().map(|[a, kx, ky, ph]| a * (kx * x[0] + ky * x[1] + ph).sin()).sum::<f64>()
    }
}
