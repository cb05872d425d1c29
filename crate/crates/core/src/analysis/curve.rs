use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Individual survival curve through per-horizon predictions: anchored at
/// (0, 1), repaired to be nonincreasing by a running minimum, linear between
/// anchors and flat after the last one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub anchor_horizons: Vec<f64>,
    pub anchor_probs: Vec<f64>,
}

impl SurvivalCurve {
    pub fn eval(&self, t: f64) -> f64 {
        let h = &self.anchor_horizons;
        let p = &self.anchor_probs;
        if t <= 0.0 {
            return 1.0;
        }
        let k = h.partition_point(|&x| x < t);
        if k == h.len() {
            return *p.last().expect("curve has anchors");
        }
        if h[k] == t {
            return p[k];
        }
        let (t0, s0) = if k == 0 { (0.0, 1.0) } else { (h[k - 1], p[k - 1]) };
        s0 + (p[k] - s0) * (t - t0) / (h[k] - t0)
    }

    /// `(t, S(t))` at `points` evenly spaced times over `[0, t_max]`, with the
    /// anchors themselves merged in.
    pub fn sample(&self, t_max: f64, points: usize) -> Vec<(f64, f64)> {
        let mut ts: Vec<f64> = (0..points.max(2))
            .map(|i| t_max * i as f64 / (points.max(2) - 1) as f64)
            .chain(self.anchor_horizons.iter().copied().filter(|&h| h <= t_max))
            .collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts.into_iter().map(|t| (t, self.eval(t))).collect()
    }
}

pub fn individual_curve(probs_at_horizons: &[f64], horizons: &[f64]) -> Result<SurvivalCurve> {
    if probs_at_horizons.len() != horizons.len() {
        return Err(Error::Domain(format!(
            "{} probabilities for {} horizons",
            probs_at_horizons.len(),
            horizons.len()
        )));
    }
    if horizons.is_empty() {
        return Err(Error::Domain("curve needs at least one horizon".into()));
    }
    if !(horizons[0] > 0.0) || horizons.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("horizons must be positive and ascending".into()));
    }
    if probs_at_horizons.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Domain("probabilities must lie in [0, 1]".into()));
    }
    let mut running = 1.0_f64;
    let anchor_probs = probs_at_horizons
        .iter()
        .map(|&p| {
            running = running.min(p);
            running
        })
        .collect();
    Ok(SurvivalCurve {
        anchor_horizons: horizons.to_vec(),
        anchor_probs,
    })
}
