use std::fmt;
use std::sync::Arc;

use super::Point;

type FieldFn = Arc<dyn Fn(Point) -> Point + Send + Sync>;

/// Built-in and user-supplied autonomous vector fields on the plane.
///
/// One-dimensional scenarios use only the first component; the second
/// component of both points and velocities stays zero.
#[derive(Clone)]
pub enum FieldKind {
    Constant([f64; 2]),
    /// `F(x, y) = omega * (-y, x)`.
    Rotation { omega: f64 },
    /// `F(x) = rate * x`; not divergence free.
    Linear { rate: f64 },
    Custom {
        eval: FieldFn,
        lipschitz: f64,
        divergence_free: bool,
    },
}

#[derive(Clone)]
pub struct VectorField {
    kind: FieldKind,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            FieldKind::Constant(v) => write!(f, "Constant({v:?})"),
            FieldKind::Rotation { omega } => write!(f, "Rotation {{ omega: {omega} }}"),
            FieldKind::Linear { rate } => write!(f, "Linear {{ rate: {rate} }}"),
            FieldKind::Custom { lipschitz, .. } => write!(f, "Custom {{ lipschitz: {lipschitz} }}"),
        }
    }
}

impl VectorField {
    pub fn constant(v: [f64; 2]) -> Self {
        Self { kind: FieldKind::Constant(v) }
    }

    pub fn rotation(omega: f64) -> Self {
        Self { kind: FieldKind::Rotation { omega } }
    }

    pub fn linear(rate: f64) -> Self {
        Self { kind: FieldKind::Linear { rate } }
    }

    pub fn custom(
        eval: impl Fn(Point) -> Point + Send + Sync + 'static,
        lipschitz: f64,
        divergence_free: bool,
    ) -> Self {
        Self {
            kind: FieldKind::Custom {
                eval: Arc::new(eval),
                lipschitz,
                divergence_free,
            },
        }
    }

    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }

    #[inline]
    pub fn eval(&self, x: Point) -> Point {
        match &self.kind {
            FieldKind::Constant(v) => *v,
            FieldKind::Rotation { omega } => [-omega * x[1], omega * x[0]],
            FieldKind::Linear { rate } => [rate * x[0], rate * x[1]],
            FieldKind::Custom { eval, .. } => eval(x),
        }
    }

    pub fn lipschitz_bound(&self) -> f64 {
        match &self.kind {
            FieldKind::Constant(_) => 0.0,
            FieldKind::Rotation { omega } => omega.abs(),
            FieldKind::Linear { rate } => rate.abs(),
            FieldKind::Custom { lipschitz, .. } => *lipschitz,
        }
    }

    /// Whether the field claims to preserve Lebesgue measure.
    pub fn divergence_free(&self) -> bool {
        match &self.kind {
            FieldKind::Constant(_) | FieldKind::Rotation { .. } => true,
            FieldKind::Linear { rate } => *rate == 0.0,
            FieldKind::Custom { divergence_free, .. } => *divergence_free,
        }
    }

    /// Exact flow map `Phi(x, t)` when one is known.
    pub fn closed_form(&self, x: Point, t: f64) -> Option<Point> {
        match &self.kind {
            FieldKind::Constant(v) => Some([x[0] + t * v[0], x[1] + t * v[1]]),
            FieldKind::Rotation { omega } => {
                let (s, c) = (omega * t).sin_cos();
                Some([c * x[0] - s * x[1], s * x[0] + c * x[1]])
            }
            FieldKind::Linear { rate } => {
                let g = (rate * t).exp();
                Some([g * x[0], g * x[1]])
            }
            FieldKind::Custom { .. } => None,
        }
    }

    /// Jacobian `DF(x)` as a row-major 2x2 matrix.
    pub fn jacobian(&self, x: Point) -> [[f64; 2]; 2] {
        match &self.kind {
            FieldKind::Constant(_) => [[0.0; 2]; 2],
            FieldKind::Rotation { omega } => [[0.0, -omega], [*omega, 0.0]],
            FieldKind::Linear { rate } => [[*rate, 0.0], [0.0, *rate]],
            FieldKind::Custom { eval, .. } => {
                let mut jac = [[0.0; 2]; 2];
                for col in 0..2 {
                    let eps = 1e-6 * (1.0 + x[col].abs());
                    let mut xp = x;
                    let mut xm = x;
                    xp[col] += eps;
                    xm[col] -= eps;
                    let (fp, fm) = (eval(xp), eval(xm));
                    for row in 0..2 {
                        jac[row][col] = (fp[row] - fm[row]) / (2.0 * eps);
                    }
                }
                jac
            }
        }
    }
}
