use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{candidate_thresholds, GrowthConfig, TreeOfPredictors};
use crate::analysis::auc_merged;
use crate::learners::{fit, BinaryRows, LearnerKind, Predictor, SurvivalRows};

/// Where a child's predictor was trained. Orders shallowest ancestor first,
/// then the child's own rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainSource {
    Ancestor(usize),
    Child,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SideChoice {
    pub kind: LearnerKind,
    pub source: TrainSource,
    pub predictor: Predictor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitDecision {
    pub feature_index: usize,
    pub threshold: f64,
    pub below: SideChoice,
    pub at_or_above: SideChoice,
    /// `1 - AUC` of the pooled child predictions on the node's first
    /// validation rows.
    pub joint_loss: f64,
}

/// Fits of each learner kind on one node's training rows.
pub(crate) type NodeFits = Vec<(LearnerKind, Predictor)>;

pub(crate) fn fit_all(kinds: &[LearnerKind], s: &SurvivalRows<'_>, config: &GrowthConfig, node: usize) -> NodeFits {
    kinds
        .par_iter()
        .filter_map(|&k| {
            let mut p = fit(k, s, &config.learner).ok()?;
            p.trained_on_node = node;
            Some((k, p))
        })
        .collect()
}

/// Training and validation rows belonging to one node.
pub(crate) struct Members<'m> {
    pub s: &'m [usize],
    pub v: &'m [usize],
}

struct Candidate<'p> {
    kind: LearnerKind,
    source: TrainSource,
    predictor: &'p Predictor,
}

/// Best split of a node over features, thresholds and predictor pairs, or
/// `None` when no admissible split exists. `path_fits` holds, from the root
/// down to the node itself, each node id with its fits.
pub(crate) fn best_split_in(
    path_fits: &[(usize, &NodeFits)],
    members: &Members<'_>,
    s: &SurvivalRows<'_>,
    v1: &BinaryRows<'_>,
    config: &GrowthConfig,
) -> Option<SplitDecision> {
    if members.s.len() < 2 * config.min_leaf {
        return None;
    }
    let v_pos = members.v.iter().filter(|&&i| v1.y[i] > 0.5).count();
    if v_pos == 0 || v_pos == members.v.len() {
        return None;
    }
    let mut kinds = config.learner_kinds.clone();
    kinds.sort();
    kinds.dedup();
    let width = s.x.first().map_or(0, |r| r.len());
    let cuts: Vec<(usize, f64)> = (0..width)
        .flat_map(|f| {
            let values: Vec<f64> = members.s.iter().map(|&i| s.x[i][f]).collect();
            candidate_thresholds(&values, config.thresholds_per_feature)
                .into_iter()
                .map(move |t| (f, t))
        })
        .collect();
    // Candidates come back in (feature, threshold) order, so the first
    // minimum is also the lexicographic tie-break winner.
    let evaluated: Vec<Option<SplitDecision>> = cuts
        .par_iter()
        .map(|&(f, t)| evaluate_cut(f, t, &kinds, path_fits, members, s, v1, config))
        .collect();
    let mut best: Option<SplitDecision> = None;
    for d in evaluated.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| d.joint_loss < b.joint_loss) {
            best = Some(d);
        }
    }
    best
}

#[allow(clippy::too_many_arguments)]
fn evaluate_cut(
    f: usize,
    t: f64,
    kinds: &[LearnerKind],
    path_fits: &[(usize, &NodeFits)],
    members: &Members<'_>,
    s: &SurvivalRows<'_>,
    v1: &BinaryRows<'_>,
    config: &GrowthConfig,
) -> Option<SplitDecision> {
    let (s_below, s_above): (Vec<usize>, Vec<usize>) = members.s.iter().partition(|&&i| s.x[i][f] < t);
    if s_below.len() < config.min_leaf || s_above.len() < config.min_leaf {
        return None;
    }
    let (v_below, v_above): (Vec<usize>, Vec<usize>) = members.v.iter().partition(|&&i| v1.x[i][f] < t);
    let child_below = fit_all(kinds, &s.select(&s_below), config, usize::MAX);
    let child_above = fit_all(kinds, &s.select(&s_above), config, usize::MAX);
    let below = side_candidates(kinds, path_fits, &child_below);
    let above = side_candidates(kinds, path_fits, &child_above);
    if below.is_empty() || above.is_empty() {
        return None;
    }
    let sorted_scores = |c: &Candidate<'_>, rows: &[usize]| {
        let mut v: Vec<(f64, u8)> = rows
            .iter()
            .map(|&i| (c.predictor.score(v1.x[i]), u8::from(v1.y[i] > 0.5)))
            .collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    };
    let below_scores: Vec<_> = below.iter().map(|c| sorted_scores(c, &v_below)).collect();
    let above_scores: Vec<_> = above.iter().map(|c| sorted_scores(c, &v_above)).collect();
    let mut best: Option<(f64, usize, usize)> = None;
    for (a, sa) in below_scores.iter().enumerate() {
        for (b, sb) in above_scores.iter().enumerate() {
            let loss = 1.0 - auc_merged(sa, sb)?;
            if best.is_none_or(|(l, _, _)| loss < l) {
                best = Some((loss, a, b));
            }
        }
    }
    let (joint_loss, a, b) = best?;
    let choice = |c: &Candidate<'_>| SideChoice {
        kind: c.kind,
        source: c.source,
        predictor: c.predictor.clone(),
    };
    Some(SplitDecision {
        feature_index: f,
        threshold: t,
        below: choice(&below[a]),
        at_or_above: choice(&above[b]),
        joint_loss,
    })
}

/// Ordered by (kind, source): for each kind, ancestors shallowest first and
/// then the child's own fit.
fn side_candidates<'p>(
    kinds: &[LearnerKind],
    path_fits: &'p [(usize, &'p NodeFits)],
    child: &'p NodeFits,
) -> Vec<Candidate<'p>> {
    let mut out = Vec::new();
    for &k in kinds {
        for (id, fits) in path_fits {
            if let Some((_, p)) = fits.iter().find(|(fk, _)| *fk == k) {
                out.push(Candidate {
                    kind: k,
                    source: TrainSource::Ancestor(*id),
                    predictor: p,
                });
            }
        }
        if let Some((_, p)) = child.iter().find(|(fk, _)| *fk == k) {
            out.push(Candidate {
                kind: k,
                source: TrainSource::Child,
                predictor: p,
            });
        }
    }
    out
}

/// Best split of `node_id` in a partially grown tree. Membership of the
/// training rows `s` and validation rows `v1` follows the node's constraints.
pub fn best_split(
    tree: &TreeOfPredictors,
    node_id: usize,
    s: &SurvivalRows<'_>,
    v1: &BinaryRows<'_>,
    config: &GrowthConfig,
) -> Option<SplitDecision> {
    let node = tree.nodes.get(node_id)?;
    let inside = |x: &[f64]| node.constraints.iter().all(|c| c.accepts(x));
    let s_idx: Vec<usize> = (0..s.len()).filter(|&i| inside(s.x[i])).collect();
    let v_idx: Vec<usize> = (0..v1.len()).filter(|&i| inside(v1.x[i])).collect();
    let mut kinds = config.learner_kinds.clone();
    kinds.sort();
    kinds.dedup();
    let path = tree.path_to(node_id);
    let fits: Vec<NodeFits> = path
        .iter()
        .map(|&a| {
            let c = &tree.nodes[a].constraints;
            let rows: Vec<usize> = (0..s.len()).filter(|&i| c.iter().all(|k| k.accepts(s.x[i]))).collect();
            fit_all(&kinds, &s.select(&rows), config, a)
        })
        .collect();
    let path_fits: Vec<(usize, &NodeFits)> = path.iter().copied().zip(fits.iter()).collect();
    best_split_in(
        &path_fits,
        &Members { s: &s_idx, v: &v_idx },
        s,
        v1,
        config,
    )
}
