use serde::{Deserialize, Serialize};

use super::schema::FeatureKind;
use super::Cohort;
use crate::error::{Error, Result};

/// Per-encoded-column fill values learned from a cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FillValues(pub Vec<f64>);

impl FillValues {
    /// Replaces NaN cells in `row`. A categorical feature is missing as a
    /// group, so its one-hot block is filled as a unit.
    pub fn apply(&self, row: &mut [f64]) {
        for (v, &fill) in row.iter_mut().zip(&self.0) {
            if v.is_nan() {
                *v = fill;
            }
        }
    }
}

/// Learns fill values: mean for continuous columns, mode for binary columns,
/// and the most frequent category for categorical features (ties go to the
/// lower value / earlier category).
pub fn learn_fills(cohort: &Cohort) -> Result<FillValues> {
    let schema = &cohort.schema;
    let mut fills = vec![0.0; schema.width()];
    for (fi, f) in schema.features().iter().enumerate() {
        let range = schema.column_range(fi);
        let present = cohort
            .records
            .iter()
            .map(|r| &r.features[range.clone()])
            .filter(|cells| cells.iter().all(|v| !v.is_nan()));
        match f.kind {
            FeatureKind::Continuous => {
                let (sum, n) = present.fold((0.0, 0usize), |(s, n), c| (s + c[0], n + 1));
                if n == 0 {
                    return Err(all_missing(&f.name));
                }
                fills[range.start] = sum / n as f64;
            }
            FeatureKind::Binary => {
                let (ones, n) = present.fold((0usize, 0usize), |(o, n), c| {
                    (o + usize::from(c[0] == 1.0), n + 1)
                });
                if n == 0 {
                    return Err(all_missing(&f.name));
                }
                fills[range.start] = if 2 * ones > n { 1.0 } else { 0.0 };
            }
            FeatureKind::Categorical => {
                let mut counts = vec![0usize; range.len()];
                let mut n = 0;
                for cells in present {
                    n += 1;
                    if let Some(k) = cells.iter().position(|&v| v == 1.0) {
                        counts[k] += 1;
                    }
                }
                if n == 0 {
                    return Err(all_missing(&f.name));
                }
                let best = counts
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
                    .map(|(k, _)| k)
                    .unwrap_or(0);
                fills[range.start + best] = 1.0;
            }
        }
    }
    Ok(FillValues(fills))
}

fn all_missing(name: &str) -> Error {
    Error::Domain(format!("feature `{name}` has no observed values to impute from"))
}

/// Imputes missing cells and returns the fill values used.
pub fn impute_with_fills(cohort: &Cohort) -> Result<(Cohort, FillValues)> {
    let fills = learn_fills(cohort)?;
    let mut out = cohort.clone();
    for r in &mut out.records {
        fills.apply(&mut r.features);
    }
    Ok((out, fills))
}

pub fn impute(cohort: &Cohort) -> Result<Cohort> {
    impute_with_fills(cohort).map(|(c, _)| c)
}
