//! Tree of predictors: a binary tree of feature-space clusters, each with its
//! own fitted base learner, combined along the root-to-leaf path by simplex
//! weights.

mod grow;
mod model_io;
mod split;
mod thresholds;
mod weights;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use grow::{grow, GrowthConfig};
pub use model_io::{load_model, load_model_checked, save_model, MODEL_VERSION};
pub use split::{best_split, SideChoice, SplitDecision, TrainSource};
pub use thresholds::candidate_thresholds;
pub use weights::{fit_path_weights, leaf_design, simplex_least_squares, squared_error, WeightMode};

use crate::cohort::{FillValues, Schema};
use crate::error::{Error, Result};
use crate::learners::Predictor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `x_i < threshold`
    Below,
    /// `x_i >= threshold`
    AtOrAbove,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub feature_index: usize,
    pub threshold: f64,
    pub side: Side,
}

impl Constraint {
    pub fn accepts(&self, x: &[f64]) -> bool {
        let v = x[self.feature_index];
        match self.side {
            Side::Below => v < self.threshold,
            Side::AtOrAbove => v >= self.threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Children {
    pub feature_index: usize,
    pub threshold: f64,
    pub below: usize,
    pub at_or_above: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<usize>,
    pub depth: usize,
    /// Path constraints from the root; empty at the root.
    pub constraints: Vec<Constraint>,
    pub predictor: Predictor,
    /// The weakly preceding node whose training rows fitted `predictor`.
    pub train_node_id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub children: Option<Children>,
    /// `1 - AUC` of `predictor` on the first validation rows in this node.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v1_loss: Option<f64>,
    /// Joint first-validation loss of the accepted split, when split.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_loss: Option<f64>,
    pub n_train: usize,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeShape {
    pub nodes: usize,
    pub leaves: usize,
    pub depth: usize,
    pub splits: Vec<SplitSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub node: usize,
    pub feature: String,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeOfPredictors {
    pub nodes: Vec<Node>,
    pub root_id: usize,
    pub horizon: f64,
    pub schema: Schema,
    pub schema_fingerprint: String,
    /// Leaf id -> weights over that leaf's root-to-leaf path.
    pub path_weights: BTreeMap<usize, Vec<f64>>,
    pub weight_mode: WeightMode,
    /// Training-time fill values for missing inputs.
    pub fill_values: Option<FillValues>,
    /// Observed (min, max) of each encoded column in the training rows.
    pub column_ranges: Vec<(f64, f64)>,
}

impl TreeOfPredictors {
    pub fn width(&self) -> usize {
        self.schema.width()
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }

    /// Node ids from the root down to `id`.
    pub fn path_to(&self, id: usize) -> Vec<usize> {
        let mut path = vec![id];
        let mut cur = id;
        while let Some(p) = self.nodes[cur].parent {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    fn check_width(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.width() {
            return Err(Error::Domain(format!(
                "feature vector has width {}, model expects {}",
                x.len(),
                self.width()
            )));
        }
        if x.iter().any(|v| v.is_nan()) {
            return Err(Error::Domain("feature vector has missing values".into()));
        }
        Ok(())
    }

    /// Leaf id and root-to-leaf path; `x_i == threshold` goes to `at_or_above`.
    pub fn route(&self, x: &[f64]) -> Result<(usize, Vec<usize>)> {
        self.check_width(x)?;
        Ok(self.route_unchecked(x))
    }

    pub(crate) fn route_unchecked(&self, x: &[f64]) -> (usize, Vec<usize>) {
        let mut cur = self.root_id;
        let mut path = vec![cur];
        while let Some(c) = self.nodes[cur].children {
            cur = if x[c.feature_index] < c.threshold {
                c.below
            } else {
                c.at_or_above
            };
            path.push(cur);
        }
        (cur, path)
    }

    /// Weighted average of the path predictors' outputs.
    pub fn predict_overall(&self, x: &[f64]) -> Result<f64> {
        self.check_width(x)?;
        let (leaf, path) = self.route_unchecked(x);
        let w = self.path_weights.get(&leaf).ok_or_else(|| {
            Error::Model(format!("no path weights for leaf {leaf}; fit weights first"))
        })?;
        let h: f64 = path
            .iter()
            .zip(w)
            .map(|(&id, wi)| wi * self.nodes[id].predictor.score(x))
            .sum();
        Ok(h.clamp(0.0, 1.0))
    }

    pub fn shape(&self) -> TreeShape {
        let names = self.schema.columns();
        TreeShape {
            nodes: self.nodes.len(),
            leaves: self.leaves().count(),
            depth: self.nodes.iter().map(|n| n.depth).max().unwrap_or(0),
            splits: self
                .nodes
                .iter()
                .filter_map(|n| {
                    n.children.map(|c| SplitSummary {
                        node: n.id,
                        feature: names[c.feature_index].name.clone(),
                        threshold: c.threshold,
                    })
                })
                .collect(),
        }
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use crate::cohort::FeatureSpec;
    use crate::learners::LearnerKind;

    pub fn constant(p: f64, width: usize) -> Predictor {
        Predictor {
            kind: LearnerKind::Linear,
            coefficients: vec![0.0; width],
            intercept: p,
            baseline_survival: None,
            horizon: 90.0,
            trained_on_node: 0,
        }
    }

    /// Root split on column 0 at 0.5; leaves 1 (below) and 2 (at or above).
    pub fn depth_one(root: f64, below: f64, above: f64) -> TreeOfPredictors {
        let schema = Schema::new(vec![FeatureSpec::continuous("a"), FeatureSpec::continuous("b")]).unwrap();
        let node = |id, parent, constraints: Vec<Constraint>, p| Node {
            id,
            parent,
            depth: usize::from(parent.is_some()),
            constraints,
            predictor: constant(p, 2),
            train_node_id: id,
            children: None,
            v1_loss: None,
            split_loss: None,
            n_train: 10,
        };
        let c = |side| Constraint {
            feature_index: 0,
            threshold: 0.5,
            side,
        };
        let mut root_node = node(0, None, vec![], root);
        root_node.children = Some(Children {
            feature_index: 0,
            threshold: 0.5,
            below: 1,
            at_or_above: 2,
        });
        TreeOfPredictors {
            nodes: vec![
                root_node,
                node(1, Some(0), vec![c(Side::Below)], below),
                node(2, Some(0), vec![c(Side::AtOrAbove)], above),
            ],
            root_id: 0,
            horizon: 90.0,
            schema_fingerprint: schema.fingerprint(),
            schema,
            path_weights: BTreeMap::new(),
            weight_mode: WeightMode::Simplex,
            fill_values: None,
            column_ranges: vec![(0.0, 1.0); 2],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::*;

    #[test]
    fn boundary_goes_at_or_above() {
        let t = depth_one(0.4, 0.8, 0.2);
        assert_eq!(t.route(&[0.5, 0.0]).unwrap(), (2, vec![0, 2]));
        assert_eq!(t.route(&[0.4999, 0.0]).unwrap(), (1, vec![0, 1]));
    }

    #[test]
    fn weighted_average_on_path() {
        let mut t = depth_one(0.4, 0.8, 0.3);
        t.path_weights.insert(1, vec![0.25, 0.75]);
        t.path_weights.insert(2, vec![0.5, 0.5]);
        assert!((t.predict_overall(&[0.1, 0.0]).unwrap() - 0.7).abs() < 1e-15);
        assert!((t.predict_overall(&[0.9, 0.0]).unwrap() - 0.35).abs() < 1e-15);
    }

    #[test]
    fn fixed_point_of_equal_predictors() {
        let mut t = depth_one(0.4, 0.4, 0.4);
        t.path_weights.insert(1, vec![0.9, 0.1]);
        t.path_weights.insert(2, vec![0.3, 0.7]);
        for x in [[0.0, 1.0], [1.0, -3.0]] {
            assert!((t.predict_overall(&x).unwrap() - 0.4).abs() < 1e-15);
        }
    }

    #[test]
    fn width_and_missing_checks() {
        let mut t = depth_one(0.4, 0.4, 0.4);
        t.path_weights.insert(1, vec![0.5, 0.5]);
        assert!(t.route(&[0.1]).is_err());
        assert!(t.predict_overall(&[f64::NAN, 0.0]).is_err());
        assert!(t.predict_overall(&[0.9, 0.0]).is_err(), "leaf 2 has no weights");
    }
}
