use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonOptions {
    pub max_iter: usize,
    /// Convergence threshold on the gradient infinity-norm.
    pub tol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            max_iter: 100,
            tol: 1e-8,
        }
    }
}

/// Objective value, gradient and Hessian at a point.
pub(crate) struct Local {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

const MAX_HALVINGS: usize = 60;

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solves `(-H) d = g`, retrying with a growing diagonal shift when `-H` is
/// not numerically positive definite.
fn newton_direction(local: &Local) -> Option<DVector<f64>> {
    let neg_h = -&local.hessian;
    let scale = neg_h.diagonal().iter().fold(1e-300_f64, |m, v| m.max(v.abs()));
    let mut shift = 0.0;
    for _ in 0..8 {
        let mut m = neg_h.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += shift;
        }
        if let Some(ch) = m.cholesky() {
            let d = ch.solve(&local.gradient);
            if d.iter().all(|v| v.is_finite()) {
                return Some(d);
            }
        }
        shift = if shift == 0.0 { scale * 1e-12 } else { shift * 100.0 };
    }
    None
}

/// Damped Newton ascent for a concave objective. Returns the maximizer and
/// the objective value after every accepted step (starting with `init`).
///
/// Steps are halved until the objective does not decrease. If no step can
/// improve the objective at float resolution, the point is accepted when the
/// mean per-row gradient is below `sqrt(tol)`.
pub(crate) fn maximize<F>(
    solver: &'static str,
    init: DVector<f64>,
    rows: usize,
    opts: &NewtonOptions,
    mut eval: F,
) -> Result<(DVector<f64>, Vec<f64>)>
where
    F: FnMut(&DVector<f64>) -> Local,
{
    let mut theta = init;
    let mut local = eval(&theta);
    let mut trace = vec![local.value];
    let mut stalled = false;
    for _ in 0..opts.max_iter {
        let gnorm = inf_norm(&local.gradient);
        if gnorm < opts.tol {
            return Ok((theta, trace));
        }
        let Some(dir) = newton_direction(&local) else {
            return Err(Error::Singular(format!(
                "{solver}: Newton system is singular (gradient norm {gnorm:e})"
            )));
        };
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand = &theta + &dir * step;
            let next = eval(&cand);
            if next.value.is_finite() && next.value >= local.value {
                accepted = Some((cand, next));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((cand, next)) => {
                stalled = next.value == local.value
                    && (&cand - &theta).iter().all(|d| d.abs() < 1e-15);
                theta = cand;
                local = next;
                trace.push(local.value);
                if stalled {
                    break;
                }
            }
            None => {
                stalled = true;
                break;
            }
        }
    }
    let gnorm = inf_norm(&local.gradient);
    if gnorm < opts.tol || (stalled && gnorm / (rows.max(1) as f64) < opts.tol.sqrt()) {
        Ok((theta, trace))
    } else {
        Err(Error::NonConvergence {
            solver,
            iterations: trace.len() - 1,
            gradient_norm: gnorm,
        })
    }
}
