use serde::{Deserialize, Serialize};

use super::LabeledSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScore {
    pub name: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceReport {
    /// Normalized relevance per column, sorted by descending score.
    pub scores: Vec<FeatureScore>,
    /// Greedy CFS selection, in order of addition.
    pub selected: Vec<String>,
}

impl RelevanceReport {
    pub fn score(&self, name: &str) -> Option<f64> {
        self.scores.iter().find(|s| s.name == name).map(|s| s.score)
    }
}

/// Pearson correlation; 0 when either side has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        0.0
    } else {
        (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
    }
}

/// CFS merit `k * mean(r_cf) / sqrt(k + k(k-1) * mean(r_ff))` of `subset`,
/// using absolute correlations.
pub fn cfs_merit(subset: &[usize], r_cf: &[f64], r_ff: &[Vec<f64>]) -> f64 {
    let k = subset.len();
    if k == 0 {
        return 0.0;
    }
    let mean_cf = subset.iter().map(|&i| r_cf[i]).sum::<f64>() / k as f64;
    let mut ff = 0.0;
    let mut pairs = 0usize;
    for (a, &i) in subset.iter().enumerate() {
        for &j in &subset[a + 1..] {
            ff += r_ff[i][j];
            pairs += 1;
        }
    }
    let mean_ff = if pairs == 0 { 0.0 } else { ff / pairs as f64 };
    let kf = k as f64;
    let denom = (kf + kf * (kf - 1.0) * mean_ff).sqrt();
    kf * mean_cf / denom
}

pub fn relevance_scores(data: &LabeledSet, names: &[String]) -> Result<RelevanceReport> {
    if data.rows.len() < 2 || !data.has_both_labels() {
        return Err(Error::Domain(
            "relevance scoring needs at least 2 rows with both labels present".into(),
        ));
    }
    let width = names.len();
    if data.rows.iter().any(|r| r.features.len() != width) {
        return Err(Error::Schema(format!("rows do not have {width} columns")));
    }
    let labels: Vec<f64> = data.labels().map(f64::from).collect();
    let cols: Vec<Vec<f64>> = (0..width)
        .map(|j| data.rows.iter().map(|r| r.features[j]).collect())
        .collect();
    let r_cf: Vec<f64> = cols.iter().map(|c| pearson(c, &labels).abs()).collect();
    let mut r_ff = vec![vec![0.0; width]; width];
    for i in 0..width {
        for j in i + 1..width {
            let r = pearson(&cols[i], &cols[j]).abs();
            r_ff[i][j] = r;
            r_ff[j][i] = r;
        }
    }

    let max = r_cf.iter().cloned().fold(0.0, f64::max);
    let mut scores: Vec<FeatureScore> = names
        .iter()
        .zip(&r_cf)
        .map(|(n, &r)| FeatureScore {
            name: n.clone(),
            score: if max > 0.0 { r / max } else { 0.0 },
        })
        .collect();
    scores.sort_by(|a, b| b.score.total_cmp(&a.score));

    let mut chosen: Vec<usize> = Vec::new();
    let mut merit = 0.0;
    loop {
        let mut best: Option<(usize, f64)> = None;
        for j in (0..width).filter(|j| !chosen.contains(j)) {
            let mut trial = chosen.clone();
            trial.push(j);
            let m = cfs_merit(&trial, &r_cf, &r_ff);
            if best.is_none_or(|(_, bm)| m > bm) {
                best = Some((j, m));
            }
        }
        match best {
            Some((j, m)) if m > merit => {
                chosen.push(j);
                merit = m;
            }
            _ => break,
        }
    }
    Ok(RelevanceReport {
        scores,
        selected: chosen.into_iter().map(|j| names[j].clone()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::LabeledRow;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn set(rows: Vec<(Vec<f64>, u8)>) -> LabeledSet {
        LabeledSet {
            horizon: 1.0,
            rows: rows
                .into_iter()
                .map(|(features, label)| LabeledRow { features, label })
                .collect(),
            excluded_count: 0,
        }
    }

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn perfect_feature_scores_one_and_constant_scores_zero() {
        let rows = (0..20)
            .map(|i| {
                let y = (i % 2) as u8;
                (vec![f64::from(y), 3.0, (i as f64).sin()], y)
            })
            .collect();
        let r = relevance_scores(&set(rows), &names(3)).unwrap();
        assert_eq!(r.score("f0"), Some(1.0));
        assert_eq!(r.score("f1"), Some(0.0));
        assert_eq!(r.scores[0].score, 1.0);
    }

    #[test]
    fn single_class_is_an_error() {
        let rows = (0..5).map(|i| (vec![i as f64], 1)).collect();
        assert!(relevance_scores(&set(rows), &names(1)).is_err());
    }

    #[test]
    fn noise_feature_is_not_selected() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<(Vec<f64>, u8)> = (0..200)
            .map(|i| {
                let y = u8::from(i % 3 == 0);
                (vec![f64::from(y), rng.random::<f64>()], y)
            })
            .collect();
        let data = set(rows);
        let r = relevance_scores(&data, &names(2)).unwrap();
        assert_eq!(r.selected, vec!["f0".to_string()]);

        // Exhaustive merit over every nonempty subset.
        let labels: Vec<f64> = data.labels().map(f64::from).collect();
        let c0: Vec<f64> = data.rows.iter().map(|r| r.features[0]).collect();
        let c1: Vec<f64> = data.rows.iter().map(|r| r.features[1]).collect();
        let r_cf = [pearson(&c0, &labels).abs(), pearson(&c1, &labels).abs()];
        let rff = pearson(&c0, &c1).abs();
        let merit = |s: &[usize]| -> f64 {
            let k = s.len() as f64;
            let mean_cf = s.iter().map(|&i| r_cf[i]).sum::<f64>() / k;
            let mean_ff = if s.len() == 2 { rff } else { 0.0 };
            k * mean_cf / (k + k * (k - 1.0) * mean_ff).sqrt()
        };
        let subsets: [&[usize]; 3] = [&[0], &[1], &[0, 1]];
        let best = subsets
            .iter()
            .max_by(|a, b| merit(a).total_cmp(&merit(b)))
            .unwrap();
        assert_eq!(*best, &[0][..]);
        assert!(merit(&[0, 1]) < merit(&[0]));
    }
}
