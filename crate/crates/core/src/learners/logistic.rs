use nalgebra::{DMatrix, DVector};

use super::newton::{maximize, Local, NewtonOptions};
use super::{width_of, BinaryRows, LearnerKind, Predictor};
use crate::error::{Error, Result};

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Penalized log-likelihood `sum [y*eta - log(1+e^eta)] - ridge/2 * |b|^2` at
/// `theta = (b_1..b_w, intercept)`.
pub fn logistic_objective(rows: &BinaryRows<'_>, ridge: f64, theta: &[f64]) -> f64 {
    let w = theta.len() - 1;
    let ll: f64 = rows
        .x
        .iter()
        .zip(&rows.y)
        .map(|(x, &y)| {
            let eta = x.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>() + theta[w];
            y * eta - softplus(eta)
        })
        .sum();
    ll - 0.5 * ridge * theta[..w].iter().map(|b| b * b).sum::<f64>()
}

pub fn logistic_gradient(rows: &BinaryRows<'_>, ridge: f64, theta: &[f64]) -> Vec<f64> {
    local(rows, ridge, &DVector::from_column_slice(theta), false)
        .gradient
        .as_slice()
        .to_vec()
}

fn local(rows: &BinaryRows<'_>, ridge: f64, theta: &DVector<f64>, hessian: bool) -> Local {
    let p = theta.len();
    let w = p - 1;
    let mut value = 0.0;
    let mut g = DVector::zeros(p);
    let mut h = DMatrix::zeros(if hessian { p } else { 0 }, if hessian { p } else { 0 });
    let mut z = vec![0.0; p];
    for (x, &y) in rows.x.iter().zip(&rows.y) {
        z[..w].copy_from_slice(x);
        z[w] = 1.0;
        let eta: f64 = z.iter().zip(theta.iter()).map(|(a, b)| a * b).sum();
        value += y * eta - softplus(eta);
        let mu = sigmoid(eta);
        let r = y - mu;
        let v = mu * (1.0 - mu);
        for i in 0..p {
            g[i] += r * z[i];
            if hessian {
                for j in 0..=i {
                    h[(i, j)] -= v * z[i] * z[j];
                }
            }
        }
    }
    for i in 0..w {
        value -= 0.5 * ridge * theta[i] * theta[i];
        g[i] -= ridge * theta[i];
    }
    if hessian {
        for i in 0..p {
            for j in 0..i {
                h[(j, i)] = h[(i, j)];
            }
        }
        for i in 0..w {
            h[(i, i)] -= ridge;
        }
    }
    Local {
        value,
        gradient: g,
        hessian: h,
    }
}

/// Newton fit that also returns the objective after every accepted step.
pub fn fit_logistic_traced(
    rows: &BinaryRows<'_>,
    ridge: f64,
    opts: &NewtonOptions,
) -> Result<(Predictor, Vec<f64>)> {
    if !rows.has_both_labels() {
        return Err(Error::Domain("logistic fit needs both labels present".into()));
    }
    if !(ridge > 0.0) {
        return Err(Error::Domain(format!("logistic ridge must be > 0, got {ridge}")));
    }
    let w = width_of(&rows.x)?;
    let (theta, trace) = maximize("logistic", DVector::zeros(w + 1), rows.len(), opts, |t| {
        local(rows, ridge, t, true)
    })?;
    Ok((
        Predictor {
            kind: LearnerKind::Logistic,
            coefficients: theta.as_slice()[..w].to_vec(),
            intercept: theta[w],
            baseline_survival: None,
            horizon: rows.horizon,
            trained_on_node: 0,
        },
        trace,
    ))
}

pub fn fit_logistic(rows: &BinaryRows<'_>, ridge: f64, opts: &NewtonOptions) -> Result<Predictor> {
    fit_logistic_traced(rows, ridge, opts).map(|(p, _)| p)
}
