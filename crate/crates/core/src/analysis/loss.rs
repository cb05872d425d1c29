use crate::error::{Error, Result};

/// Percentage reduction in predictive loss (`1 - AUC`) of `auc_ours` relative
/// to `auc_other`.
pub fn loss_reduction(auc_ours: f64, auc_other: f64) -> Result<f64> {
    for a in [auc_ours, auc_other] {
        if !(a > 0.0 && a <= 1.0) {
            return Err(Error::Domain(format!("AUC must be in (0, 1], got {a}")));
        }
    }
    let base = 1.0 - auc_other;
    if base == 0.0 {
        return Err(Error::Domain("reference AUC of 1 leaves no loss to reduce".into()));
    }
    Ok(100.0 * (base - (1.0 - auc_ours)) / base)
}
