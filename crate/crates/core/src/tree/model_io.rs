use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Node, TreeOfPredictors, WeightMode};
use crate::cohort::{FillValues, Schema};
use crate::error::{Error, Result};

pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    horizon: f64,
    schema_fingerprint: String,
    schema: Schema,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fill_values: Option<FillValues>,
    column_ranges: Vec<(f64, f64)>,
    weight_mode: WeightMode,
    root_id: usize,
    nodes: Vec<Node>,
    path_weights: BTreeMap<usize, Vec<f64>>,
}

impl TreeOfPredictors {
    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            version: MODEL_VERSION,
            horizon: self.horizon,
            schema_fingerprint: self.schema_fingerprint.clone(),
            schema: self.schema.clone(),
            fill_values: self.fill_values.clone(),
            column_ranges: self.column_ranges.clone(),
            weight_mode: self.weight_mode,
            root_id: self.root_id,
            nodes: self.nodes.clone(),
            path_weights: self.path_weights.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.version != MODEL_VERSION {
            return Err(Error::Model(format!(
                "model version {} is not supported (expected {MODEL_VERSION})",
                file.version
            )));
        }
        let found = file.schema.fingerprint();
        if found != file.schema_fingerprint {
            return Err(Error::FingerprintMismatch {
                expected: file.schema_fingerprint,
                found,
            });
        }
        let tree = TreeOfPredictors {
            nodes: file.nodes,
            root_id: file.root_id,
            horizon: file.horizon,
            schema_fingerprint: file.schema_fingerprint,
            schema: file.schema,
            path_weights: file.path_weights,
            weight_mode: file.weight_mode,
            fill_values: file.fill_values,
            column_ranges: file.column_ranges,
        };
        tree.validate()?;
        Ok(tree)
    }

    /// Structural checks on a deserialized tree.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Model(m));
        if !(self.horizon > 0.0) {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        if self.nodes.is_empty() || self.root_id != 0 {
            return bad("tree must have a root with id 0".into());
        }
        let width = self.width();
        if self.column_ranges.len() != width {
            return bad(format!("{} column ranges for width {width}", self.column_ranges.len()));
        }
        if let Some(f) = &self.fill_values {
            if f.0.len() != width {
                return bad(format!("{} fill values for width {width}", f.0.len()));
            }
        }
        let mut seen_as_child = vec![false; self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            if n.id != i {
                return bad(format!("node at position {i} has id {}", n.id));
            }
            if n.predictor.width() != width {
                return bad(format!("node {i} predictor has width {}", n.predictor.width()));
            }
            n.predictor.validate()?;
            if n.train_node_id > i {
                return bad(format!("node {i} trained on later node {}", n.train_node_id));
            }
            if let Some(c) = n.children {
                for child in [c.below, c.at_or_above] {
                    if child <= i || child >= self.nodes.len() || seen_as_child[child] {
                        return bad(format!("node {i} has invalid child {child}"));
                    }
                    if self.nodes[child].parent != Some(i) {
                        return bad(format!("node {child} does not point back to parent {i}"));
                    }
                    seen_as_child[child] = true;
                }
                if c.feature_index >= width || !c.threshold.is_finite() {
                    return bad(format!("node {i} has an invalid split"));
                }
            }
        }
        if seen_as_child.iter().skip(1).any(|s| !s) {
            return bad("some nodes are unreachable from the root".into());
        }
        for n in self.leaves() {
            let Some(w) = self.path_weights.get(&n.id) else {
                return bad(format!("leaf {} has no path weights", n.id));
            };
            if w.len() != n.depth + 1 || w.iter().any(|v| !v.is_finite()) {
                return bad(format!("leaf {} has malformed path weights", n.id));
            }
            if self.weight_mode == WeightMode::Simplex
                && (w.iter().any(|&v| v < 0.0) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9)
            {
                return bad(format!("leaf {} weights are not on the simplex", n.id));
            }
        }
        if self.path_weights.len() != self.leaves().count() {
            return bad("path weights given for non-leaf nodes".into());
        }
        Ok(())
    }
}

pub fn save_model(tree: &TreeOfPredictors, path: &Path) -> Result<()> {
    tree.validate()?;
    fs::write(path, tree.to_json()? + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<TreeOfPredictors> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    TreeOfPredictors::from_json(&text)
}

/// Loads a model and rejects it unless it was trained on `schema`.
pub fn load_model_checked(path: &Path, schema: &Schema) -> Result<TreeOfPredictors> {
    let tree = load_model(path)?;
    let found = schema.fingerprint();
    if tree.schema_fingerprint != found {
        return Err(Error::FingerprintMismatch {
            expected: tree.schema_fingerprint,
            found,
        });
    }
    Ok(tree)
}
