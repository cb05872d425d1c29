use super::Cohort;
use crate::error::{Error, Result};

/// Binary outcome at a horizon: `Some(1)` survived past it, `Some(0)` died at
/// or before it, `None` censored before it (outcome unknown).
pub fn horizon_label(time: f64, event: bool, horizon: f64) -> Option<u8> {
    if time > horizon {
        Some(1)
    } else if event {
        Some(0)
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRow {
    pub features: Vec<f64>,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub horizon: f64,
    pub rows: Vec<LabeledRow>,
    /// Rows censored at or before the horizon, left out of `rows`.
    pub excluded_count: usize,
}

impl LabeledSet {
    pub fn labels(&self) -> impl Iterator<Item = u8> + '_ {
        self.rows.iter().map(|r| r.label)
    }

    pub fn has_both_labels(&self) -> bool {
        let pos = self.labels().filter(|&l| l == 1).count();
        pos > 0 && pos < self.rows.len()
    }
}

pub fn label_at_horizon(cohort: &Cohort, horizon: f64) -> Result<LabeledSet> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::Domain(format!("horizon must be > 0, got {horizon}")));
    }
    let mut rows = Vec::with_capacity(cohort.len());
    let mut excluded_count = 0;
    for r in &cohort.records {
        match horizon_label(r.time, r.event, horizon) {
            Some(label) => rows.push(LabeledRow {
                features: r.features.clone(),
                label,
            }),
            None => excluded_count += 1,
        }
    }
    Ok(LabeledSet {
        horizon,
        rows,
        excluded_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{FeatureSpec, Record, Schema};
    use proptest::prelude::*;

    #[test]
    fn labeling_rules() {
        assert_eq!(horizon_label(50.0, true, 90.0), Some(0));
        assert_eq!(horizon_label(400.0, false, 90.0), Some(1));
        assert_eq!(horizon_label(50.0, false, 90.0), None);
        assert_eq!(horizon_label(90.0, true, 90.0), Some(0));
        assert_eq!(horizon_label(90.0, false, 90.0), None);
    }

    #[test]
    fn rejects_nonpositive_horizon() {
        let s = Schema::new(vec![FeatureSpec::binary("b")]).unwrap();
        let c = Cohort::new(
            s,
            vec![Record {
                features: vec![1.0],
                time: 1.0,
                event: true,
            }],
        )
        .unwrap();
        assert!(matches!(label_at_horizon(&c, 0.0), Err(Error::Domain(_))));
        assert!(matches!(label_at_horizon(&c, -3.0), Err(Error::Domain(_))));
    }

    proptest! {
        #[test]
        fn partition_and_absorbing_death(
            subjects in prop::collection::vec((0.0f64..1000.0, any::<bool>()), 1..60),
            h1 in 1.0f64..500.0,
            dh in 0.0f64..500.0,
        ) {
            let s = Schema::new(vec![FeatureSpec::binary("b")]).unwrap();
            let records = subjects.iter().map(|&(time, event)| Record { features: vec![0.0], time, event }).collect();
            let c = Cohort::new(s, records).unwrap();
            let l = label_at_horizon(&c, h1).unwrap();
            prop_assert_eq!(l.rows.len() + l.excluded_count, c.len());
            let h2 = h1 + dh;
            for &(t, e) in &subjects {
                if horizon_label(t, e, h1) == Some(0) {
                    prop_assert_eq!(horizon_label(t, e, h2), Some(0));
                }
            }
        }
    }
}
