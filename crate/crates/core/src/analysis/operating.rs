use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FixedRate {
    Specificity,
    Sensitivity,
}

/// Confusion counts when `score >= threshold` is called positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
    /// `f64::INFINITY` when nothing is called positive (serialized as null).
    pub threshold: f64,
}

impl OperatingPoint {
    pub fn sensitivity(&self) -> f64 {
        self.tp as f64 / (self.tp + self.fn_) as f64
    }

    pub fn specificity(&self) -> f64 {
        self.tn as f64 / (self.tn + self.fp) as f64
    }
}

/// Every attainable operating point, from the strictest threshold (+inf,
/// nothing positive) down to the smallest score.
pub fn all_operating_points(scores: &[f64], labels: &[u8]) -> Vec<OperatingPoint> {
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_unstable_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut out = vec![OperatingPoint {
        tp: 0,
        tn: n_neg,
        fp: 0,
        fn_: n_pos,
        threshold: f64::INFINITY,
    }];
    let (mut tp, mut fp) = (0, 0);
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && scores[idx[end]] == scores[idx[start]] {
            end += 1;
        }
        for &i in &idx[start..end] {
            if labels[i] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        out.push(OperatingPoint {
            tp,
            tn: n_neg - fp,
            fp,
            fn_: n_pos - tp,
            threshold: scores[idx[start]],
        });
        start = end;
    }
    out
}

/// Holds specificity (or sensitivity) at `level`: among thresholds whose
/// fixed rate is `>= level`, takes the best value of the other rate. That is
/// the least conservative qualifying threshold; when several give the same
/// other rate the one with the higher fixed rate wins.
pub fn counts_at_operating_point(
    scores: &[f64],
    labels: &[u8],
    fixed: FixedRate,
    level: f64,
) -> Result<OperatingPoint> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("level must be in (0, 1), got {level}")));
    }
    if scores.len() != labels.len() {
        return Err(Error::Domain("scores and labels differ in length".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    if n_pos == 0 || n_pos == labels.len() {
        return Err(Error::Domain("operating point needs both classes present".into()));
    }
    let rate = |p: &OperatingPoint| match fixed {
        FixedRate::Specificity => p.specificity(),
        FixedRate::Sensitivity => p.sensitivity(),
    };
    let other = |p: &OperatingPoint| match fixed {
        FixedRate::Specificity => p.sensitivity(),
        FixedRate::Sensitivity => p.specificity(),
    };
    all_operating_points(scores, labels)
        .into_iter()
        .filter(|p| rate(p) >= level)
        .max_by(|a, b| other(a).total_cmp(&other(b)).then(rate(a).total_cmp(&rate(b))))
        .ok_or_else(|| Error::Domain(format!("no threshold reaches level {level}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_scores() {
        let s = [0.9, 0.8, 0.7, 0.3, 0.2, 0.1, 0.05, 0.01];
        let l = [1, 1, 1, 0, 0, 0, 0, 0];
        let p = counts_at_operating_point(&s, &l, FixedRate::Specificity, 0.8).unwrap();
        assert_eq!((p.tp, p.fp), (3, 0));
    }

    #[test]
    fn all_tied_scores() {
        let s = [0.5; 10];
        let l = [1, 0, 1, 0, 1, 0, 0, 1, 0, 0];
        let p = counts_at_operating_point(&s, &l, FixedRate::Specificity, 0.8).unwrap();
        assert_eq!(p.specificity(), 1.0);
        assert_eq!(p.tp, 0);
        assert!(p.threshold.is_infinite());
    }

    #[test]
    fn level_must_be_interior() {
        assert!(counts_at_operating_point(&[0.1, 0.2], &[0, 1], FixedRate::Sensitivity, 1.0).is_err());
        assert!(counts_at_operating_point(&[0.1, 0.2], &[0, 1], FixedRate::Sensitivity, 0.0).is_err());
    }

    /// Sweeps every candidate threshold (each score and +inf) directly.
    fn sweep(s: &[f64], l: &[u8], fixed: FixedRate, level: f64) -> (usize, usize, usize, usize) {
        let mut cands: Vec<f64> = s.to_vec();
        cands.push(f64::INFINITY);
        let mut best: Option<(f64, f64, (usize, usize, usize, usize))> = None;
        for &t in &cands {
            let mut c = (0, 0, 0, 0);
            for (&v, &y) in s.iter().zip(l) {
                match (v >= t, y == 1) {
                    (true, true) => c.0 += 1,
                    (false, false) => c.1 += 1,
                    (true, false) => c.2 += 1,
                    (false, true) => c.3 += 1,
                }
            }
            let sens = c.0 as f64 / (c.0 + c.3) as f64;
            let spec = c.1 as f64 / (c.1 + c.2) as f64;
            let (r, o) = match fixed {
                FixedRate::Specificity => (spec, sens),
                FixedRate::Sensitivity => (sens, spec),
            };
            if r < level {
                continue;
            }
            let better = match best {
                None => true,
                Some((br, bo, _)) => o > bo || (o == bo && r > br),
            };
            if better {
                best = Some((r, o, c));
            }
        }
        best.unwrap().2
    }

    #[test]
    fn matches_exhaustive_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let n = rng.random_range(5..80);
            let l: Vec<u8> = (0..n).map(|i| if i < 2 { i as u8 } else { u8::from(rng.random_bool(0.5)) }).collect();
            let s: Vec<f64> = l.iter().map(|&y| (f64::from(y) + rng.random::<f64>() * 2.0 * 10.0).round() / 10.0).collect();
            for fixed in [FixedRate::Specificity, FixedRate::Sensitivity] {
                let p = counts_at_operating_point(&s, &l, fixed, 0.8).unwrap();
                assert_eq!((p.tp, p.tn, p.fp, p.fn_), sweep(&s, &l, fixed, 0.8));
            }
        }
    }
}
