use std::collections::{BTreeMap, VecDeque};

use log::debug;
use serde::{Deserialize, Serialize};

use super::split::{best_split_in, fit_all, Members, NodeFits};
use super::{Children, Constraint, Node, Side, TrainSource, TreeOfPredictors, WeightMode};
use crate::cohort::Schema;
use crate::error::{Error, Result};
use crate::learners::{fit, fit_best, validation_loss, width_of, BinaryRows, LearnerKind, LearnerOptions, SurvivalRows};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrowthConfig {
    /// Minimum training rows in each child of a split.
    pub min_leaf: usize,
    pub thresholds_per_feature: usize,
    /// A split must lower the node's validation loss by more than this.
    pub min_gain: f64,
    pub max_depth: usize,
    pub learner_kinds: Vec<LearnerKind>,
    pub learner: LearnerOptions,
    pub weight_mode: WeightMode,
    /// Growth itself is deterministic; kept so a run config fully pins a model.
    pub seed: u64,
}

impl Default for GrowthConfig {
    fn default() -> Self {
        GrowthConfig {
            min_leaf: 50,
            thresholds_per_feature: 9,
            min_gain: 1e-4,
            max_depth: 7,
            learner_kinds: LearnerKind::ALL.to_vec(),
            learner: LearnerOptions::default(),
            weight_mode: WeightMode::Simplex,
            seed: 0,
        }
    }
}

impl GrowthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_leaf < 2 {
            return Err(Error::Domain(format!("min_leaf must be at least 2, got {}", self.min_leaf)));
        }
        if self.thresholds_per_feature == 0 {
            return Err(Error::Domain("thresholds_per_feature must be at least 1".into()));
        }
        if !(self.min_gain >= 0.0) {
            return Err(Error::Domain(format!("min_gain must be >= 0, got {}", self.min_gain)));
        }
        if self.learner_kinds.is_empty() {
            return Err(Error::Domain("learner_kinds must not be empty".into()));
        }
        Ok(())
    }
}

/// Grows a tree on training rows `s`, choosing splits and predictors by
/// first-validation loss on `v1`. Path weights are left empty; fit them with
/// [`super::fit_path_weights`].
pub fn grow(
    s: &SurvivalRows<'_>,
    v1: &BinaryRows<'_>,
    schema: &Schema,
    config: &GrowthConfig,
) -> Result<TreeOfPredictors> {
    config.validate()?;
    if s.horizon != v1.horizon {
        return Err(Error::Domain(format!(
            "training horizon {} differs from validation horizon {}",
            s.horizon, v1.horizon
        )));
    }
    for (what, w) in [("training", width_of(&s.x)?), ("validation", width_of(&v1.x)?)] {
        if w != schema.width() && !(what == "validation" && v1.is_empty()) {
            return Err(Error::Domain(format!(
                "{what} rows have width {w}, schema has {}",
                schema.width()
            )));
        }
    }
    if s.x.iter().chain(&v1.x).any(|x| x.iter().any(|v| !v.is_finite())) {
        return Err(Error::Domain("rows contain missing or non-finite values; impute first".into()));
    }
    let mut kinds = config.learner_kinds.clone();
    kinds.sort();
    kinds.dedup();

    // Without both labels on V1 there is nothing to select or split on: the
    // root keeps the first kind that fits and the tree stays a single node.
    let (root_pred, root_loss) = if v1.has_both_labels() {
        let p = fit_best(&kinds, s, v1, &config.learner)?;
        let loss = validation_loss(&p, v1)?;
        (p, Some(loss))
    } else {
        let mut failures = Vec::new();
        let mut found = None;
        for &k in &kinds {
            match fit(k, s, &config.learner) {
                Ok(p) => {
                    found = Some(p);
                    break;
                }
                Err(e) => failures.push(format!("{k}: {e}")),
            }
        }
        let p = found.ok_or_else(|| Error::AllFitsFailed(failures.join("; ")))?;
        (p, None)
    };
    let mut root = Node {
        id: 0,
        parent: None,
        depth: 0,
        constraints: Vec::new(),
        v1_loss: root_loss,
        predictor: root_pred,
        train_node_id: 0,
        children: None,
        split_loss: None,
        n_train: s.len(),
    };
    root.predictor.trained_on_node = 0;
    let mut nodes = vec![root];
    let mut s_members: Vec<Vec<usize>> = vec![(0..s.len()).collect()];
    let mut v_members: Vec<Vec<usize>> = vec![(0..v1.len()).collect()];
    let mut fits: Vec<Option<NodeFits>> = vec![None];

    let mut queue = VecDeque::from([0usize]);
    while let Some(id) = queue.pop_front() {
        if nodes[id].depth >= config.max_depth {
            continue;
        }
        let Some(node_loss) = nodes[id].v1_loss else {
            continue;
        };
        if fits[id].is_none() {
            fits[id] = Some(fit_all(&kinds, &s.select(&s_members[id]), config, id));
        }
        let path = path_ids(&nodes, id);
        let path_fits: Vec<(usize, &NodeFits)> = path
            .iter()
            .map(|&a| (a, fits[a].as_ref().expect("ancestors are fitted before children")))
            .collect();
        let members = Members {
            s: &s_members[id],
            v: &v_members[id],
        };
        let Some(decision) = best_split_in(&path_fits, &members, s, v1, config) else {
            continue;
        };
        if node_loss - decision.joint_loss <= config.min_gain {
            continue;
        }
        debug!(
            "split node {id} on column {} at {} (loss {node_loss:.4} -> {:.4})",
            decision.feature_index, decision.threshold, decision.joint_loss
        );
        let (f, t) = (decision.feature_index, decision.threshold);
        let below_id = nodes.len();
        let above_id = below_id + 1;
        let sides = [
            (below_id, Side::Below, decision.below),
            (above_id, Side::AtOrAbove, decision.at_or_above),
        ];
        let (s_split, v_split) = {
            let (sb, sa): (Vec<usize>, Vec<usize>) = s_members[id].iter().partition(|&&i| s.x[i][f] < t);
            let (vb, va): (Vec<usize>, Vec<usize>) = v_members[id].iter().partition(|&&i| v1.x[i][f] < t);
            ([sb, sa], [vb, va])
        };
        for ((child_id, side, choice), (s_idx, v_idx)) in sides.into_iter().zip(s_split.into_iter().zip(v_split)) {
            let mut constraints = nodes[id].constraints.clone();
            constraints.push(Constraint {
                feature_index: f,
                threshold: t,
                side,
            });
            let train_node_id = match choice.source {
                TrainSource::Ancestor(a) => a,
                TrainSource::Child => child_id,
            };
            let mut predictor = choice.predictor;
            predictor.trained_on_node = train_node_id;
            let v_rows = BinaryRows {
                horizon: v1.horizon,
                x: v_idx.iter().map(|&i| v1.x[i]).collect(),
                y: v_idx.iter().map(|&i| v1.y[i]).collect(),
            };
            let v1_loss = if v_rows.has_both_labels() {
                Some(validation_loss(&predictor, &v_rows)?)
            } else {
                None
            };
            nodes.push(Node {
                id: child_id,
                parent: Some(id),
                depth: nodes[id].depth + 1,
                constraints,
                predictor,
                train_node_id,
                children: None,
                v1_loss,
                split_loss: None,
                n_train: s_idx.len(),
            });
            s_members.push(s_idx);
            v_members.push(v_idx);
            fits.push(None);
            queue.push_back(child_id);
        }
        nodes[id].children = Some(Children {
            feature_index: f,
            threshold: t,
            below: below_id,
            at_or_above: above_id,
        });
        nodes[id].split_loss = Some(decision.joint_loss);
    }

    let column_ranges = (0..schema.width())
        .map(|c| {
            s.x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                (lo.min(x[c]), hi.max(x[c]))
            })
        })
        .collect();
    Ok(TreeOfPredictors {
        nodes,
        root_id: 0,
        horizon: s.horizon,
        schema: schema.clone(),
        schema_fingerprint: schema.fingerprint(),
        path_weights: BTreeMap::new(),
        weight_mode: config.weight_mode,
        fill_values: None,
        column_ranges,
    })
}

fn path_ids(nodes: &[Node], id: usize) -> Vec<usize> {
    let mut path = vec![id];
    let mut cur = id;
    while let Some(p) = nodes[cur].parent {
        path.push(p);
        cur = p;
    }
    path.reverse();
    path
}
