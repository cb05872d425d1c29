use nalgebra::{DMatrix, DVector};

use super::newton::{maximize, Local, NewtonOptions};
use super::{width_of, LearnerKind, Predictor, SurvivalRows};
use crate::error::{Error, Result};

/// Indices sorted by descending time, grouped by equal time.
fn time_groups(time: &[f64]) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..time.len()).collect();
    idx.sort_by(|&a, &b| time[b].total_cmp(&time[a]).then(a.cmp(&b)));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in idx {
        match groups.last_mut() {
            Some(g) if time[g[0]] == time[i] => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
}

fn etas(rows: &SurvivalRows<'_>, beta: &[f64]) -> Vec<f64> {
    rows.x
        .iter()
        .map(|x| x.iter().zip(beta).map(|(a, b)| a * b).sum())
        .collect()
}

/// Breslow partial log-likelihood (ties share the full risk set) and its
/// derivatives, penalized by `ridge/2 * |beta|^2`.
fn local(rows: &SurvivalRows<'_>, groups: &[Vec<usize>], ridge: f64, beta: &DVector<f64>, hessian: bool) -> Local {
    let p = beta.len();
    let eta = etas(rows, beta.as_slice());
    let shift = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let shift = if shift.is_finite() { shift } else { 0.0 };
    let mut s0 = 0.0;
    let mut s1 = DVector::<f64>::zeros(p);
    let mut s2 = DMatrix::<f64>::zeros(if hessian { p } else { 0 }, if hessian { p } else { 0 });
    let mut value = 0.0;
    let mut g = DVector::<f64>::zeros(p);
    let mut h = DMatrix::<f64>::zeros(if hessian { p } else { 0 }, if hessian { p } else { 0 });
    for group in groups {
        for &i in group {
            let r = (eta[i] - shift).exp();
            s0 += r;
            let x = rows.x[i];
            for a in 0..p {
                s1[a] += r * x[a];
                if hessian {
                    for b in 0..=a {
                        s2[(a, b)] += r * x[a] * x[b];
                    }
                }
            }
        }
        let deaths = group.iter().filter(|&&i| rows.event[i]).count();
        if deaths == 0 {
            continue;
        }
        let d = deaths as f64;
        let log_s0 = s0.ln() + shift;
        for &i in group.iter().filter(|&&i| rows.event[i]) {
            value += eta[i] - log_s0;
            for a in 0..p {
                g[a] += rows.x[i][a];
            }
        }
        for a in 0..p {
            let ma = s1[a] / s0;
            g[a] -= d * ma;
            if hessian {
                for b in 0..=a {
                    h[(a, b)] -= d * (s2[(a, b)] / s0 - ma * s1[b] / s0);
                }
            }
        }
    }
    for a in 0..p {
        value -= 0.5 * ridge * beta[a] * beta[a];
        g[a] -= ridge * beta[a];
    }
    if hessian {
        for a in 0..p {
            for b in 0..a {
                h[(b, a)] = h[(a, b)];
            }
            h[(a, a)] -= ridge;
        }
    }
    Local {
        value,
        gradient: g,
        hessian: h,
    }
}

pub fn cox_objective(rows: &SurvivalRows<'_>, ridge: f64, beta: &[f64]) -> f64 {
    let groups = time_groups(&rows.time);
    local(rows, &groups, ridge, &DVector::from_column_slice(beta), false).value
}

pub fn cox_gradient(rows: &SurvivalRows<'_>, ridge: f64, beta: &[f64]) -> Vec<f64> {
    let groups = time_groups(&rows.time);
    local(rows, &groups, ridge, &DVector::from_column_slice(beta), false)
        .gradient
        .as_slice()
        .to_vec()
}

/// Breslow cumulative baseline hazard `H0(t)` evaluated at `horizon`.
pub fn breslow_baseline(rows: &SurvivalRows<'_>, beta: &[f64], horizon: f64) -> f64 {
    let eta = etas(rows, beta);
    let shift = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let shift = if shift.is_finite() { shift } else { 0.0 };
    let mut cum = 0.0;
    let mut s0 = 0.0;
    // Walk from the latest time backwards accumulating the risk set; collect
    // the increments at event times <= horizon.
    for group in time_groups(&rows.time) {
        for &i in &group {
            s0 += (eta[i] - shift).exp();
        }
        let t = rows.time[group[0]];
        if t > horizon {
            continue;
        }
        let d = group.iter().filter(|&&i| rows.event[i]).count() as f64;
        if d > 0.0 {
            cum += d / s0 * (-shift).exp();
        }
    }
    cum
}

pub fn fit_cox_traced(
    rows: &SurvivalRows<'_>,
    ridge: f64,
    opts: &NewtonOptions,
) -> Result<(Predictor, Vec<f64>)> {
    if rows.len() < 2 {
        return Err(Error::Domain("Cox fit needs at least 2 rows".into()));
    }
    if !rows.event.iter().any(|&e| e) {
        return Err(Error::Domain("Cox fit needs at least one event".into()));
    }
    if !(ridge >= 0.0) {
        return Err(Error::Domain(format!("ridge must be >= 0, got {ridge}")));
    }
    let w = width_of(&rows.x)?;
    let groups = time_groups(&rows.time);
    let (beta, trace) = maximize("cox", DVector::zeros(w), rows.len(), opts, |b| {
        local(rows, &groups, ridge, b, true)
    })?;
    let h0 = breslow_baseline(rows, beta.as_slice(), rows.horizon);
    Ok((
        Predictor {
            kind: LearnerKind::Cox,
            coefficients: beta.as_slice().to_vec(),
            intercept: 0.0,
            baseline_survival: Some((-h0).exp()),
            horizon: rows.horizon,
            trained_on_node: 0,
        },
        trace,
    ))
}

pub fn fit_cox(rows: &SurvivalRows<'_>, ridge: f64, opts: &NewtonOptions) -> Result<Predictor> {
    fit_cox_traced(rows, ridge, opts).map(|(p, _)| p)
}
