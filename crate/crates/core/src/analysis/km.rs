use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Right-continuous step function starting at (0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepCurve {
    pub times: Vec<f64>,
    pub survival: Vec<f64>,
}

impl StepCurve {
    pub fn eval(&self, t: f64) -> f64 {
        match self.times.partition_point(|&x| x <= t) {
            0 => 1.0,
            k => self.survival[k - 1],
        }
    }
}

/// Product-limit estimator. Subjects censored at `t` are still at risk at `t`.
pub fn kaplan_meier(times: &[f64], events: &[bool]) -> Result<StepCurve> {
    if times.is_empty() {
        return Err(Error::Domain("Kaplan-Meier needs at least one subject".into()));
    }
    if times.len() != events.len() {
        return Err(Error::Domain("times and events differ in length".into()));
    }
    if times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(Error::Domain("times must be finite and >= 0".into()));
    }
    let mut idx: Vec<usize> = (0..times.len()).collect();
    idx.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let mut curve = StepCurve {
        times: vec![0.0],
        survival: vec![1.0],
    };
    let mut at_risk = times.len();
    let mut s = 1.0;
    let mut start = 0;
    while start < idx.len() {
        let t = times[idx[start]];
        let mut end = start;
        let mut deaths = 0;
        while end < idx.len() && times[idx[end]] == t {
            deaths += usize::from(events[idx[end]]);
            end += 1;
        }
        if deaths > 0 {
            s *= 1.0 - deaths as f64 / at_risk as f64;
            if t == 0.0 {
                curve.survival[0] = s;
            } else {
                curve.times.push(t);
                curve.survival.push(s);
            }
        }
        at_risk -= end - start;
        start = end;
    }
    Ok(curve)
}
