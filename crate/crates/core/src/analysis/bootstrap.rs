use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::roc::auc;
use crate::error::{Error, Result};

const MAX_REDRAWS: usize = 100;

/// Type-7 quantile of ascending `sorted` at probability `p`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Replicate AUCs from row resampling, sorted ascending. Replicate `r` draws
/// from its own ChaCha stream, so the result does not depend on scheduling.
pub fn bootstrap_aucs(scores: &[f64], labels: &[u8], reps: usize, seed: u64) -> Result<Vec<f64>> {
    auc(scores, labels)?;
    let n = scores.len();
    let mut out: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let mut s = vec![0.0; n];
            let mut l = vec![0u8; n];
            for _ in 0..MAX_REDRAWS {
                for k in 0..n {
                    let i = rng.random_range(0..n);
                    s[k] = scores[i];
                    l[k] = labels[i];
                }
                if let Ok(a) = auc(&s, &l) {
                    return Ok(a);
                }
            }
            Err(Error::Domain(format!(
                "bootstrap replicate {r} drew a single class {MAX_REDRAWS} times"
            )))
        })
        .collect::<Result<_>>()?;
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Percentile bootstrap interval for the AUC at confidence `level`.
pub fn auc_ci_bootstrap(
    scores: &[f64],
    labels: &[u8],
    reps: usize,
    level: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    if reps < 100 {
        return Err(Error::Domain(format!("bootstrap needs reps >= 100, got {reps}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("level must be in (0, 1), got {level}")));
    }
    let reps = bootstrap_aucs(scores, labels, reps, seed)?;
    let alpha = (1.0 - level) / 2.0;
    Ok((quantile_sorted(&reps, alpha), quantile_sorted(&reps, 1.0 - alpha)))
}
