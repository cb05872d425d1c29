use crate::analysis::quantile_sorted;

/// Candidate split thresholds for one column from the values in a node.
///
/// A column whose values are all in {0, 1} yields `[0.5]`. Otherwise the `k`
/// interior type-7 quantiles at `j / (k + 1)`, deduplicated, keeping only cuts
/// that leave rows on both sides. A constant column yields nothing.
pub fn candidate_thresholds(values: &[f64], k: usize) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    if lo == hi {
        return Vec::new();
    }
    if sorted.iter().all(|&v| v == 0.0 || v == 1.0) {
        return vec![0.5];
    }
    let mut cuts: Vec<f64> = (1..=k)
        .map(|j| quantile_sorted(&sorted, j as f64 / (k + 1) as f64))
        .filter(|&t| t > lo && t <= hi)
        .collect();
    cuts.dedup();
    cuts
}
