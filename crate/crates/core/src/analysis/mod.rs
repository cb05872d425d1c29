//! Evaluation metrics and survival-curve analysis.

mod bootstrap;
mod curve;
mod km;
mod loss;
mod matching;
mod operating;
mod report;
mod roc;

pub use bootstrap::{auc_ci_bootstrap, bootstrap_aucs, quantile_sorted};
pub use curve::{individual_curve, SurvivalCurve};
pub use km::{kaplan_meier, StepCurve};
pub use loss::loss_reduction;
pub use matching::{greedy_match, propensity_match, MatchResult};
pub use operating::{all_operating_points, counts_at_operating_point, FixedRate, OperatingPoint};
pub use report::{evaluate_scores, EvalOptions, EvaluationReport};
pub use roc::{auc, roc_curve, RocSummary};
pub(crate) use roc::auc_merged;
