//! Re-entry boundary operators mapping outgoing traces to incoming traces,
//! their norms, truncation near the boundary and the resulting growth
//! bounds.

use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{CharacteristicGrid, Side, TraceVector};

#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryOperator {
    Zero {
        n_in: usize,
        n_out: usize,
    },
    /// `(H psi)_i = alpha_i * psi_{pairing_i}`.
    Multiplicative {
        alpha: Vec<f64>,
        pairing: Vec<usize>,
        n_out: usize,
    },
    /// `(H psi)_i = sum_k matrix[i][k] * psi_k * out_weights[k]`.
    Kernel {
        matrix: Vec<Vec<f64>>,
        out_weights: Vec<f64>,
    },
    Sum(Vec<BoundaryOperator>),
}

/// Operator norm estimate; `lower_bound_only` is set when the power
/// iteration hit its cap before converging.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    pub lower_bound_only: bool,
    pub iterations: usize,
}

impl NormEstimate {
    fn exact(value: f64) -> Self {
        Self { value, lower_bound_only: false, iterations: 0 }
    }
}

const POWER_TOL: f64 = 1e-8;
const POWER_CAP: usize = 10_000;

impl BoundaryOperator {
    pub fn zero(grid: &CharacteristicGrid) -> Self {
        BoundaryOperator::Zero { n_in: grid.inlets().len(), n_out: grid.outlets().len() }
    }

    pub fn multiplicative(alpha: Vec<f64>, pairing: Vec<usize>, n_out: usize) -> Result<Self> {
        if alpha.len() != pairing.len() {
            return Err(Error::Dimension { expected: pairing.len(), got: alpha.len() });
        }
        if let Some(&k) = pairing.iter().find(|&&k| k >= n_out) {
            return Err(Error::Argument(format!("pairing target {k} is not an outgoing node (have {n_out})")));
        }
        if alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::Argument("gains must be finite".into()));
        }
        Ok(BoundaryOperator::Multiplicative { alpha, pairing, n_out })
    }

    /// Uniform gain with incoming node `i` fed by outgoing node `i`.
    pub fn identity_gain(grid: &CharacteristicGrid, alpha: f64) -> Result<Self> {
        let (n_in, n_out) = (grid.inlets().len(), grid.outlets().len());
        if n_in != n_out {
            return Err(Error::Dimension { expected: n_in, got: n_out });
        }
        Self::multiplicative(vec![alpha; n_in], (0..n_in).collect(), n_out)
    }

    pub fn kernel(matrix: Vec<Vec<f64>>, out_weights: Vec<f64>) -> Result<Self> {
        if let Some(row) = matrix.iter().find(|r| r.len() != out_weights.len()) {
            return Err(Error::Dimension { expected: out_weights.len(), got: row.len() });
        }
        Ok(BoundaryOperator::Kernel { matrix, out_weights })
    }

    /// Reads a headerless delimited matrix with one row per incoming node.
    pub fn kernel_from_csv(path: &Path, grid: &CharacteristicGrid) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let mut matrix = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
            let row = record
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("{}: row {}: `{s}`: {e}", path.display(), line + 1)))
                })
                .collect::<Result<Vec<f64>>>()?;
            matrix.push(row);
        }
        if matrix.len() != grid.inlets().len() {
            return Err(Error::Dimension { expected: grid.inlets().len(), got: matrix.len() });
        }
        Self::kernel(matrix, grid.weights(Side::Outgoing))
    }

    pub fn n_in(&self) -> usize {
        match self {
            BoundaryOperator::Zero { n_in, .. } => *n_in,
            BoundaryOperator::Multiplicative { alpha, .. } => alpha.len(),
            BoundaryOperator::Kernel { matrix, .. } => matrix.len(),
            BoundaryOperator::Sum(parts) => parts.first().map_or(0, Self::n_in),
        }
    }

    pub fn n_out(&self) -> usize {
        match self {
            BoundaryOperator::Zero { n_out, .. } | BoundaryOperator::Multiplicative { n_out, .. } => *n_out,
            BoundaryOperator::Kernel { out_weights, .. } => out_weights.len(),
            BoundaryOperator::Sum(parts) => parts.first().map_or(0, Self::n_out),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            BoundaryOperator::Zero { .. } => true,
            BoundaryOperator::Multiplicative { alpha, .. } => alpha.iter().all(|&a| a == 0.0),
            BoundaryOperator::Kernel { matrix, .. } => matrix.iter().flatten().all(|&k| k == 0.0),
            BoundaryOperator::Sum(parts) => parts.iter().all(Self::is_zero),
        }
    }

    /// Checks the operator against the boundary node counts of `grid`.
    pub fn check_grid(&self, grid: &CharacteristicGrid) -> Result<()> {
        if self.n_in() != grid.inlets().len() {
            return Err(Error::Dimension { expected: grid.inlets().len(), got: self.n_in() });
        }
        if self.n_out() != grid.outlets().len() {
            return Err(Error::Dimension { expected: grid.outlets().len(), got: self.n_out() });
        }
        if let BoundaryOperator::Sum(parts) = self {
            for part in parts {
                part.check_grid(grid)?;
            }
        }
        Ok(())
    }

    /// `H psi` on raw outgoing node values.
    pub fn apply_raw(&self, psi: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_in()];
        self.accumulate(psi, &mut out);
        out
    }

    fn accumulate(&self, psi: &[f64], out: &mut [f64]) {
        match self {
            BoundaryOperator::Zero { .. } => {}
            BoundaryOperator::Multiplicative { alpha, pairing, .. } => {
                for ((o, a), &k) in out.iter_mut().zip(alpha).zip(pairing) {
                    *o += a * psi[k];
                }
            }
            BoundaryOperator::Kernel { matrix, out_weights } => {
                for (o, row) in out.iter_mut().zip(matrix) {
                    *o += row.iter().zip(out_weights).zip(psi).map(|((k, w), v)| k * w * v).sum::<f64>();
                }
            }
            BoundaryOperator::Sum(parts) => {
                for part in parts {
                    part.accumulate(psi, out);
                }
            }
        }
    }

    /// Applies `H` to an outgoing trace.
    pub fn apply(&self, psi: &TraceVector) -> Result<TraceVector> {
        if psi.side() != Side::Outgoing {
            return Err(Error::Argument("boundary operator expects an outgoing trace".into()));
        }
        if psi.len() != self.n_out() {
            return Err(Error::Dimension { expected: self.n_out(), got: psi.len() });
        }
        TraceVector::new(psi.grid().clone(), Side::Incoming, self.apply_raw(psi.values()), psi.p())
    }

    /// Raw matrix `A` with `H psi = A psi`, rows incoming.
    pub fn dense(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.n_out()]; self.n_in()];
        self.add_dense(&mut a);
        a
    }

    fn add_dense(&self, a: &mut [Vec<f64>]) {
        match self {
            BoundaryOperator::Zero { .. } => {}
            BoundaryOperator::Multiplicative { alpha, pairing, .. } => {
                for (i, (&al, &k)) in alpha.iter().zip(pairing).enumerate() {
                    a[i][k] += al;
                }
            }
            BoundaryOperator::Kernel { matrix, out_weights } => {
                for (row, krow) in a.iter_mut().zip(matrix) {
                    for ((x, k), w) in row.iter_mut().zip(krow).zip(out_weights) {
                        *x += k * w;
                    }
                }
            }
            BoundaryOperator::Sum(parts) => {
                for part in parts {
                    part.add_dense(a);
                }
            }
        }
    }

    /// `|||H|||` from `L^p` on the outgoing boundary to `L^p` on the
    /// incoming boundary.
    pub fn operator_norm(&self, grid: &CharacteristicGrid, p: f64) -> Result<NormEstimate> {
        self.check_grid(grid)?;
        if self.is_zero() {
            return Ok(NormEstimate::exact(0.0));
        }
        let w_in = grid.weights(Side::Incoming);
        let w_out = grid.weights(Side::Outgoing);
        if let BoundaryOperator::Multiplicative { alpha, pairing, n_out } = self {
            let mut seen = vec![false; *n_out];
            let bijective = pairing.len() == *n_out && pairing.iter().all(|&k| !std::mem::replace(&mut seen[k], true));
            if bijective {
                let v = alpha
                    .iter()
                    .zip(pairing)
                    .zip(&w_in)
                    .map(|((a, &k), wi)| a.abs() * (wi / w_out[k]).powf(1.0 / p))
                    .fold(0.0, f64::max);
                return Ok(NormEstimate::exact(v));
            }
        }
        let a = self.dense();
        let b: Vec<Vec<f64>> = a
            .iter()
            .zip(&w_in)
            .map(|(row, wi)| {
                row.iter()
                    .zip(&w_out)
                    .map(|(x, wo)| (x * (wi / wo).powf(1.0 / p)).abs())
                    .collect()
            })
            .collect();
        Ok(lp_matrix_norm(&b, p))
    }

    /// `H chi_delta`: drops outgoing nodes whose backward stay time
    /// exceeds `delta`.
    pub fn truncate(&self, delta: f64, grid: &CharacteristicGrid) -> BoundaryOperator {
        let keep: Vec<bool> = grid.stay_times(Side::Outgoing).iter().map(|&t| t <= delta).collect();
        let out = self.masked(&keep);
        if out.is_zero() {
            BoundaryOperator::Zero { n_in: self.n_in(), n_out: self.n_out() }
        } else {
            out
        }
    }

    fn masked(&self, keep: &[bool]) -> BoundaryOperator {
        match self {
            BoundaryOperator::Zero { .. } => self.clone(),
            BoundaryOperator::Multiplicative { alpha, pairing, n_out } => BoundaryOperator::Multiplicative {
                alpha: alpha.iter().zip(pairing).map(|(&a, &k)| if keep[k] { a } else { 0.0 }).collect(),
                pairing: pairing.clone(),
                n_out: *n_out,
            },
            BoundaryOperator::Kernel { matrix, out_weights } => BoundaryOperator::Kernel {
                matrix: matrix
                    .iter()
                    .map(|row| row.iter().zip(keep).map(|(&k, &kp)| if kp { k } else { 0.0 }).collect())
                    .collect(),
                out_weights: out_weights.clone(),
            },
            BoundaryOperator::Sum(parts) => BoundaryOperator::Sum(parts.iter().map(|p| p.masked(keep)).collect()),
        }
    }
}

/// `||B||_{l^p -> l^p}` of a nonnegative matrix by Boyd's nonlinear power
/// iteration.
pub fn lp_matrix_norm(b: &[Vec<f64>], p: f64) -> NormEstimate {
    let n = b.first().map_or(0, Vec::len);
    if n == 0 || b.is_empty() {
        return NormEstimate::exact(0.0);
    }
    let q = p / (p - 1.0);
    let normalize = |x: &mut Vec<f64>| {
        let s = x.iter().map(|v| v.powf(p)).sum::<f64>().powf(1.0 / p);
        if s > 0.0 {
            x.iter_mut().for_each(|v| *v /= s);
        }
        s
    };
    let apply = |x: &[f64]| -> Vec<f64> { b.iter().map(|r| r.iter().zip(x).map(|(a, v)| a * v).sum()).collect() };
    let mut x = vec![1.0; n];
    normalize(&mut x);
    let mut estimate = 0.0;
    for it in 1..=POWER_CAP {
        let y = apply(&x);
        estimate = y.iter().map(|v| v.powf(p)).sum::<f64>().powf(1.0 / p);
        if estimate == 0.0 {
            return NormEstimate { value: 0.0, lower_bound_only: false, iterations: it };
        }
        let dual: Vec<f64> = y.iter().map(|v| v.powf(p - 1.0)).collect();
        let mut z: Vec<f64> = (0..n).map(|k| b.iter().zip(&dual).map(|(r, d)| r[k] * d).sum::<f64>()).collect();
        z.iter_mut().for_each(|v| *v = v.powf(q - 1.0));
        if normalize(&mut z) == 0.0 {
            break;
        }
        let change = x.iter().zip(&z).map(|(a, c)| (a - c).abs().powf(p)).sum::<f64>().powf(1.0 / p);
        x = z;
        if change < POWER_TOL {
            let y = apply(&x);
            let last = y.iter().map(|v| v.powf(p)).sum::<f64>().powf(1.0 / p);
            return NormEstimate { value: last.max(estimate), lower_bound_only: false, iterations: it };
        }
    }
    NormEstimate { value: estimate, lower_bound_only: true, iterations: POWER_CAP }
}

/// Geometric truncation levels `delta0 / 2^k`, `k = 0..levels`.
pub fn delta_grid(delta0: f64, levels: usize) -> Vec<f64> {
    (0..levels).map(|k| delta0 / 2f64.powi(k as i32)).collect()
}

/// `|||H chi_delta|||` over `deltas` together with their maximum, the
/// estimate of `limsup_{delta -> 0} |||H chi_delta|||`.
pub fn truncated_norms(
    h: &BoundaryOperator,
    grid: &CharacteristicGrid,
    p: f64,
    deltas: &[f64],
) -> Result<(Vec<(f64, NormEstimate)>, f64)> {
    let mut rows = Vec::with_capacity(deltas.len());
    let mut c = 0.0f64;
    for &d in deltas {
        let est = h.truncate(d, grid).operator_norm(grid, p)?;
        c = c.max(est.value);
        rows.push((d, est));
    }
    Ok((rows, c))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthParams {
    pub a: f64,
    pub c: f64,
    pub delta: f64,
    pub m: f64,
    pub omega: f64,
}

/// Constants `(M, omega)` with `||U_H(t)|| <= M exp(omega t)`, given
/// `A = |||H|||` and `C = |||H chi_delta||| < 1`.
pub fn growth_bound(a: f64, c: f64, delta: f64) -> Result<GrowthParams> {
    if !(c < 1.0) {
        return Err(Error::CriterionViolated { c });
    }
    if !(a >= 0.0 && c >= 0.0) {
        return Err(Error::Argument(format!("norms must be nonnegative, got A = {a}, C = {c}")));
    }
    if !(delta > 0.0) {
        return Err(Error::Argument(format!("delta must be positive, got {delta}")));
    }
    let threshold = 1.0 - c;
    let (m, omega) = if (a - threshold).abs() <= 1e-12 {
        (2.0 / threshold, 1.0 / delta)
    } else if a > threshold {
        (a * a / (threshold * threshold * (a + c - 1.0)), (a / threshold).ln() / delta)
    } else {
        (1.0 / (1.0 - a - c), 0.0)
    };
    Ok(GrowthParams { a, c, delta, m, omega })
}
