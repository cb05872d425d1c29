use rayon::prelude::*;

use super::{
    fit_cox, fit_linear, fit_logistic, BinaryRows, LearnerKind, LearnerOptions, Predictor,
    SurvivalRows,
};
use crate::analysis::auc;
use crate::error::{Error, Result};

/// Fits one learner kind. Linear and logistic use the rows whose horizon
/// outcome is known; Cox uses every row's (time, event).
pub fn fit(kind: LearnerKind, train: &SurvivalRows<'_>, opts: &LearnerOptions) -> Result<Predictor> {
    match kind {
        LearnerKind::Linear => fit_linear(&train.labeled(), opts.ridge_linear),
        LearnerKind::Logistic => fit_logistic(&train.labeled(), opts.ridge_logistic, &opts.newton),
        LearnerKind::Cox => fit_cox(train, opts.ridge_cox, &opts.newton),
    }
}

/// `1 - AUC` of the predictor's scores on `validate`.
pub fn validation_loss(p: &Predictor, validate: &BinaryRows<'_>) -> Result<f64> {
    let scores: Vec<f64> = validate.x.iter().map(|x| p.predict(x)).collect::<Result<_>>()?;
    Ok(1.0 - auc(&scores, &validate.labels())?)
}

/// Fits every kind on `train` and returns the one with the lowest validation
/// loss; ties go to the earlier kind (Linear < Logistic < Cox).
pub fn fit_best(
    kinds: &[LearnerKind],
    train: &SurvivalRows<'_>,
    validate: &BinaryRows<'_>,
    opts: &LearnerOptions,
) -> Result<Predictor> {
    if train.is_empty() || validate.is_empty() {
        return Err(Error::Domain("fit_best needs nonempty train and validate sets".into()));
    }
    if !validate.has_both_labels() {
        return Err(Error::Domain("validation set needs both labels".into()));
    }
    let mut kinds = kinds.to_vec();
    kinds.sort();
    kinds.dedup();
    let results: Vec<(LearnerKind, Result<(Predictor, f64)>)> = kinds
        .par_iter()
        .map(|&k| {
            let r = fit(k, train, opts).and_then(|p| {
                let loss = validation_loss(&p, validate)?;
                Ok((p, loss))
            });
            (k, r)
        })
        .collect();
    let mut best: Option<(Predictor, f64)> = None;
    let mut failures = Vec::new();
    for (k, r) in results {
        match r {
            Ok((p, loss)) => {
                if best.as_ref().is_none_or(|(_, b)| loss < *b) {
                    best = Some((p, loss));
                }
            }
            Err(e) => failures.push(format!("{k}: {e}")),
        }
    }
    best.map(|(p, _)| p)
        .ok_or_else(|| Error::AllFitsFailed(failures.join("; ")))
}
