use serde::{Deserialize, Serialize};

use super::bootstrap::auc_ci_bootstrap;
use super::operating::{counts_at_operating_point, FixedRate, OperatingPoint};
use super::roc::roc_curve;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    pub bootstrap_reps: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            bootstrap_reps: 1000,
            level: 0.95,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountsAt {
    pub spec80: OperatingPoint,
    pub sens80: OperatingPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub horizon: f64,
    pub auc: f64,
    pub ci: (f64, f64),
    pub roc_points: Vec<(f64, f64)>,
    pub counts_at: CountsAt,
    pub n_pos: usize,
    pub n_neg: usize,
}

pub fn evaluate_scores(
    horizon: f64,
    scores: &[f64],
    labels: &[u8],
    opts: &EvalOptions,
) -> Result<EvaluationReport> {
    let roc = roc_curve(scores, labels)?;
    let ci = auc_ci_bootstrap(scores, labels, opts.bootstrap_reps, opts.level, opts.seed)?;
    Ok(EvaluationReport {
        horizon,
        auc: roc.auc,
        ci,
        roc_points: roc.points,
        counts_at: CountsAt {
            spec80: counts_at_operating_point(scores, labels, FixedRate::Specificity, 0.8)?,
            sens80: counts_at_operating_point(scores, labels, FixedRate::Sensitivity, 0.8)?,
        },
        n_pos: roc.n_pos,
        n_neg: roc.n_neg,
    })
}
