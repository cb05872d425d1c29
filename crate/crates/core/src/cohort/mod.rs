//! Cohort data model: schema-typed survival records and the preparation steps
//! that turn them into horizon-labeled training data.

mod impute;
mod io;
mod label;
mod relevance;
mod schema;
mod split;
pub mod synth;

pub use impute::{impute, impute_with_fills, learn_fills, FillValues};
pub use io::{decode_feature, load_cohort, load_feature_rows, read_cohort, read_feature_rows, write_cohort};
pub use label::{horizon_label, label_at_horizon, LabeledRow, LabeledSet};
pub use relevance::{cfs_merit, pearson, relevance_scores, RelevanceReport};
pub use schema::{Column, ColumnKind, FeatureKind, FeatureSpec, Schema, EVENT_COLUMN, TIME_COLUMN};
pub use split::{kfold, partition_indices, split_dataset, Fold, SplitBundle};
pub use synth::{synth_cohort, SynthSpec, SyntheticCohort};

use crate::error::{Error, Result};
use crate::learners::SurvivalRows;

/// One subject. Missing encoded cells are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub features: Vec<f64>,
    /// Observed survival or censoring time in days.
    pub time: f64,
    /// `true` when death was observed, `false` when right-censored.
    pub event: bool,
}

impl Record {
    pub fn is_complete(&self) -> bool {
        self.features.iter().all(|v| !v.is_nan())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub schema: Schema,
    pub records: Vec<Record>,
}

impl Cohort {
    pub fn new(schema: Schema, records: Vec<Record>) -> Result<Self> {
        let width = schema.width();
        for (i, r) in records.iter().enumerate() {
            if r.features.len() != width {
                return Err(Error::Schema(format!(
                    "record {i} has {} columns, schema encodes {width}",
                    r.features.len()
                )));
            }
            if !(r.time >= 0.0) || !r.time.is_finite() {
                return Err(Error::Domain(format!(
                    "record {i} has invalid time {}",
                    r.time
                )));
            }
        }
        Ok(Cohort { schema, records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn width(&self) -> usize {
        self.schema.width()
    }

    /// A new cohort holding the records at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Cohort {
        Cohort {
            schema: self.schema.clone(),
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }

    /// Borrowed view of every record at a horizon, for the learners.
    pub fn survival_rows(&self, horizon: f64) -> SurvivalRows<'_> {
        SurvivalRows {
            horizon,
            x: self.records.iter().map(|r| r.features.as_slice()).collect(),
            time: self.records.iter().map(|r| r.time).collect(),
            event: self.records.iter().map(|r| r.event).collect(),
        }
    }
}
