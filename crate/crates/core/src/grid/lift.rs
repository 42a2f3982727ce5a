use super::{GridFunction, Side, TraceSpace, TraceVector};
use crate::error::{Error, Result};
use crate::resolvent::m_lambda;

/// Value at a node with stay times `tau_minus`, `tau_plus` of the function
/// whose incoming trace vanishes and whose outgoing trace is `h`.
pub fn lift_value(h: f64, tau_minus: f64, tau_plus: f64) -> f64 {
    match (tau_minus.is_finite(), tau_plus.is_finite()) {
        (_, false) => 0.0,
        (false, true) => h * (-tau_plus).exp(),
        (true, true) => {
            let total = tau_minus + tau_plus;
            if total > 0.0 {
                h * tau_minus * (-tau_plus).exp() / total
            } else {
                h
            }
        }
    }
}

/// Extends an outgoing trace `h` into the domain with zero incoming trace.
pub fn lift_outgoing_trace(h: &TraceVector) -> Result<GridFunction> {
    if h.side() != Side::Outgoing {
        return Err(Error::Argument("lift_outgoing_trace needs an outgoing trace".into()));
    }
    let grid = h.grid().clone();
    let mut values = vec![0.0; grid.n_nodes()];
    for (k, &i) in grid.outlets().iter().enumerate() {
        let c = &grid.characteristics()[i];
        for (j, v) in values[c.range()].iter_mut().enumerate() {
            *v = lift_value(h.values()[k], grid.tau_minus(i, j), grid.tau_plus(i, j));
        }
    }
    Ok(GridFunction::from_raw(grid, values, h.p()))
}

fn check_sides(psi_plus: &TraceVector, psi_minus: &TraceVector) -> Result<()> {
    if psi_plus.side() != Side::Outgoing || psi_minus.side() != Side::Incoming {
        return Err(Error::Argument("expected an (outgoing, incoming) trace pair".into()));
    }
    Ok(())
}

/// `|| psi_+ - M_lambda psi_- ||` in the `Y~_{+,p}` norm.
pub fn compatibility_defect(psi_plus: &TraceVector, psi_minus: &TraceVector, lambda: f64) -> Result<f64> {
    check_sides(psi_plus, psi_minus)?;
    let m = m_lambda(psi_minus, lambda)?;
    Ok(psi_plus.sub(&m).norm(TraceSpace::YTilde))
}

/// Norm of a trace pair in the space of traces of the maximal domain.
pub fn e_norm(psi_plus: &TraceVector, psi_minus: &TraceVector) -> Result<f64> {
    check_sides(psi_plus, psi_minus)?;
    let p = psi_plus.p();
    let d = compatibility_defect(psi_plus, psi_minus, 1.0)?;
    Ok((psi_plus.norm_pow(TraceSpace::Y) + psi_minus.norm_pow(TraceSpace::Y) + d.powf(p)).powf(1.0 / p))
}
