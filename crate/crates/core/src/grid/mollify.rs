use super::GridFunction;
use crate::error::{Error, Result};

/// Unit bump `30 s^2 (1 - s)^2` on `[0, 1]`.
pub fn bump(s: f64) -> f64 {
    if (0.0..=1.0).contains(&s) {
        30.0 * s * s * (1.0 - s) * (1.0 - s)
    } else {
        0.0
    }
}

/// First moment of [`bump`]; `rho_n` shifts linear data back by
/// `bump_first_moment() / n`.
pub fn bump_first_moment() -> f64 {
    // Degree-5 integrand, so three Gauss points are exact.
    gauss3(0.0, 1.0, |s| s * bump(s))
}

const GAUSS_NODES: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GAUSS_WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

fn gauss3(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    GAUSS_NODES.iter().zip(GAUSS_WEIGHTS).map(|(x, w)| w * f(m + h * x)).sum::<f64>() * h
}

/// Hat-function weights of `rho_n(s) = n * bump(n s)` on the grid `s = m ds`:
/// `(full[m], left[m])` where `left[m]` only integrates over
/// `[(m - 1) ds, m ds]`.
fn kernel_weights(n: usize, ds: f64) -> (Vec<f64>, Vec<f64>) {
    let support = 1.0 / n as f64;
    let rho = |s: f64| n as f64 * bump(n as f64 * s);
    let segments = (support / ds).ceil() as usize;
    let mut full = vec![0.0; segments + 1];
    let mut left = vec![0.0; segments + 1];
    for k in 0..segments {
        let a = k as f64 * ds;
        let b = ((k + 1) as f64 * ds).min(support);
        if b <= a {
            continue;
        }
        let right = gauss3(a, b, |s| rho(s) * ((k + 1) as f64 - s / ds));
        let rising = gauss3(a, b, |s| rho(s) * (s / ds - k as f64));
        full[k] += right;
        full[k + 1] += rising;
        left[k + 1] += rising;
    }
    (full, left)
}

/// `(rho_n <> f)(x) = integral_0^{tau_-(x)} rho_n(s) f(Phi(x, -s)) ds`, with
/// `f` linearly interpolated between nodes.
pub fn mollify(f: &GridFunction, n: usize) -> Result<GridFunction> {
    let grid = f.grid();
    let ds = grid.ds();
    if n == 0 || 1.0 / (n as f64) < ds {
        return Err(Error::Resolution { n, ds });
    }
    let (full, left) = kernel_weights(n, ds);
    let mut out = vec![0.0; f.values().len()];
    for c in grid.characteristics() {
        let v = &f.values()[c.range()];
        let o = &mut out[c.range()];
        let len = v.len();
        for j in 0..len {
            let mut acc = 0.0;
            if c.is_interior_loop {
                for (m, w) in full.iter().enumerate() {
                    acc += w * v[(j + len * (m / len + 1) - m) % len];
                }
            } else {
                let reach = j.min(full.len() - 1);
                for m in 0..reach {
                    acc += full[m] * v[j - m];
                }
                acc += if reach == j { left[j] * v[0] } else { full[reach] * v[j - reach] };
            }
            o[j] = acc;
        }
    }
    Ok(f.with_values(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::tests::slab;
    use std::sync::Arc;

    #[test]
    fn bump_has_unit_mass_and_half_moment() {
        assert!((gauss3(0.0, 1.0, bump) - 1.0).abs() < 1e-14);
        assert!((bump_first_moment() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn weights_sum_to_one() {
        let (full, _) = kernel_weights(16, 1e-3);
        assert!((full.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        let (full, _) = kernel_weights(3, 0.1);
        assert!((full.iter().sum::<f64>() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn constants_linear_and_inlet() {
        let g = Arc::new(slab(1e-3));
        let one = GridFunction::from_fn(g.clone(), 2.0, |_| 1.0).unwrap();
        let m = mollify(&one, 100).unwrap();
        assert_eq!(m.values()[0], 0.0);
        assert!(m.values()[10..].iter().all(|v| (v - 1.0).abs() < 1e-13));
        let x = GridFunction::from_fn(g, 2.0, |x| x[0]).unwrap();
        let m = mollify(&x, 100).unwrap();
        assert!((m.values()[500] - (0.5 - bump_first_moment() / 100.0)).abs() < 1e-13);
    }

    #[test]
    fn unresolved_mollifier_rejected() {
        let g = Arc::new(slab(1e-2));
        let one = GridFunction::from_fn(g, 2.0, |_| 1.0).unwrap();
        assert!(matches!(mollify(&one, 200), Err(Error::Resolution { .. })));
    }
}
