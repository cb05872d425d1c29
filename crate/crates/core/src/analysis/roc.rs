use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check(scores: &[f64], labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Domain(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Domain("scores contain NaN".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Domain("AUC needs both classes present".into()));
    }
    Ok((n_pos, n_neg))
}

/// Mann-Whitney AUC via mid-ranks: tied (positive, negative) pairs count 1/2.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (n_pos, n_neg) = check(scores, labels)?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_unstable_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the positive rank sum keeps every quantity an exact integer.
    let mut twice_rank_sum: u128 = 0;
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && scores[idx[end]] == scores[idx[start]] {
            end += 1;
        }
        // Ranks start+1 ..= end; mid-rank doubled is start + 1 + end.
        let twice_mid = (start + 1 + end) as u128;
        let pos = idx[start..end].iter().filter(|&&i| labels[i] == 1).count() as u128;
        twice_rank_sum += pos * twice_mid;
        start = end;
    }
    let np = n_pos as u128;
    let twice_u = twice_rank_sum - np * (np + 1);
    Ok(twice_u as f64 / (2.0 * n_pos as f64 * n_neg as f64))
}

/// AUC of the union of two lists already sorted ascending by score, computed
/// by merging. Gives exactly the value `auc` gives on the concatenation.
/// `None` when the union lacks a class.
pub(crate) fn auc_merged(a: &[(f64, u8)], b: &[(f64, u8)]) -> Option<f64> {
    let n_pos = a.iter().chain(b).filter(|p| p.1 == 1).count();
    let n = a.len() + b.len();
    if n_pos == 0 || n_pos == n {
        return None;
    }
    let (mut i, mut j, mut rank) = (0, 0, 0usize);
    let mut twice_rank_sum: u128 = 0;
    while i < a.len() || j < b.len() {
        let v = match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) => x.0.min(y.0),
            (Some(x), None) => x.0,
            (None, Some(y)) => y.0,
            (None, None) => unreachable!(),
        };
        let (mut size, mut pos) = (0usize, 0u128);
        while i < a.len() && a[i].0 == v {
            size += 1;
            pos += u128::from(a[i].1 == 1);
            i += 1;
        }
        while j < b.len() && b[j].0 == v {
            size += 1;
            pos += u128::from(b[j].1 == 1);
            j += 1;
        }
        twice_rank_sum += pos * (2 * rank + 1 + size) as u128;
        rank += size;
    }
    let np = n_pos as u128;
    let twice_u = twice_rank_sum - np * (np + 1);
    Some(twice_u as f64 / (2.0 * n_pos as f64 * (n - n_pos) as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocSummary {
    /// (fpr, tpr), nondecreasing, from (0,0) to (1,1).
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci: Option<(f64, f64)>,
    pub n_pos: usize,
    pub n_neg: usize,
}

impl RocSummary {
    /// Trapezoidal area under `points`.
    pub fn trapezoid_area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
            .sum()
    }
}

/// ROC points, one per distinct score threshold (scores >= threshold are
/// called positive), plus the endpoints.
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<RocSummary> {
    let (n_pos, n_neg) = check(scores, labels)?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_unstable_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
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
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
        start = end;
    }
    let mut summary = RocSummary {
        points,
        auc: 0.0,
        ci: None,
        n_pos,
        n_neg,
    };
    summary.auc = auc(scores, labels)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair_count(scores: &[f64], labels: &[u8]) -> f64 {
        let mut num = 0.0;
        let (mut np, mut nn) = (0.0, 0.0);
        for (i, &li) in labels.iter().enumerate() {
            if li == 1 {
                np += 1.0;
            } else {
                nn += 1.0;
            }
            if li != 1 {
                continue;
            }
            for (j, &lj) in labels.iter().enumerate() {
                if lj == 0 {
                    if scores[i] > scores[j] {
                        num += 1.0;
                    } else if scores[i] == scores[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / (np * nn)
    }

    #[test]
    fn worked_examples() {
        assert_eq!(auc(&[0.9, 0.8, 0.3, 0.2], &[1, 1, 0, 0]).unwrap(), 1.0);
        assert_eq!(auc(&[0.5; 6], &[1, 0, 1, 0, 0, 1]).unwrap(), 0.5);
        let (s, l) = ([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]);
        assert_eq!(pair_count(&s, &l), 0.75);
        assert_eq!(auc(&s, &l).unwrap(), 0.75);
    }

    #[test]
    fn single_class_and_length_mismatch() {
        assert!(auc(&[0.1, 0.2], &[1, 1]).is_err());
        assert!(auc(&[0.1, 0.2], &[1]).is_err());
        assert!(roc_curve(&[0.1], &[0]).is_err());
    }

    #[test]
    fn roc_shapes() {
        let r = roc_curve(&[0.9, 0.8, 0.3, 0.2], &[1, 1, 0, 0]).unwrap();
        assert_eq!(r.points, vec![(0.0, 0.0), (0.0, 0.5), (0.0, 1.0), (0.5, 1.0), (1.0, 1.0)]);
        let r = roc_curve(&[0.4; 4], &[1, 0, 1, 0]).unwrap();
        assert_eq!(r.points, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(r.trapezoid_area(), 0.5);
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
        (2usize..120).prop_flat_map(|n| {
            (
                prop::collection::vec((0u8..12).prop_map(|v| f64::from(v) / 4.0), n),
                prop::collection::vec(0u8..2, n),
            )
        })
    }

    proptest! {
        #[test]
        fn sort_based_equals_pair_count((s, l) in instance()) {
            prop_assume!(l.contains(&0) && l.contains(&1));
            let a = auc(&s, &l).unwrap();
            prop_assert!((a - pair_count(&s, &l)).abs() < 1e-12);
            let r = roc_curve(&s, &l).unwrap();
            prop_assert!((r.trapezoid_area() - a).abs() < 1e-12);
            prop_assert_eq!(r.points[0], (0.0, 0.0));
            prop_assert_eq!(*r.points.last().unwrap(), (1.0, 1.0));
            prop_assert!(r.points.windows(2).all(|w| w[1].0 >= w[0].0 && w[1].1 >= w[0].1));
        }

        #[test]
        fn merged_equals_concatenated((s, l) in instance(), cut in 0usize..120) {
            prop_assume!(l.contains(&0) && l.contains(&1));
            let cut = cut.min(s.len());
            let sorted = |r: std::ops::Range<usize>| {
                let mut v: Vec<(f64, u8)> = r.map(|i| (s[i], l[i])).collect();
                v.sort_by(|x, y| x.0.total_cmp(&y.0));
                v
            };
            let merged = auc_merged(&sorted(0..cut), &sorted(cut..s.len())).unwrap();
            prop_assert_eq!(merged, auc(&s, &l).unwrap());
        }

        #[test]
        fn invariant_under_increasing_transform((s, l) in instance()) {
            prop_assume!(l.contains(&0) && l.contains(&1));
            let t: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 2.0).collect();
            prop_assert_eq!(auc(&s, &l).unwrap(), auc(&t, &l).unwrap());
        }

        #[test]
        fn flipped_labels_complement(v in prop::collection::vec(0.0f64..1.0, 2..80), seed in any::<u64>()) {
            let l: Vec<u8> = v.iter().enumerate().map(|(i, _)| ((seed >> (i % 64)) & 1) as u8).collect();
            prop_assume!(l.contains(&0) && l.contains(&1));
            let mut sorted = v.clone();
            sorted.sort_by(f64::total_cmp);
            prop_assume!(sorted.windows(2).all(|w| w[0] != w[1]));
            let flipped: Vec<u8> = l.iter().map(|&x| 1 - x).collect();
            prop_assert!((auc(&v, &l).unwrap() + auc(&v, &flipped).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
