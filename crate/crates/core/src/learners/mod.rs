//! Base learners. Each fitted learner is a [`Predictor`] mapping an encoded
//! feature vector to a survival probability at a fixed horizon.

mod cox;
mod linear;
mod logistic;
mod newton;
mod select;

use serde::{Deserialize, Serialize};

pub use cox::{breslow_baseline, cox_gradient, cox_objective, fit_cox, fit_cox_traced};
pub use linear::fit_linear;
pub use logistic::{fit_logistic, fit_logistic_traced, logistic_gradient, logistic_objective};
pub use newton::NewtonOptions;
pub use select::{fit, fit_best, validation_loss};

use crate::cohort::horizon_label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LearnerKind {
    Linear,
    Logistic,
    Cox,
}

impl LearnerKind {
    /// Tie-break order: Linear < Logistic < Cox.
    pub const ALL: [LearnerKind; 3] = [LearnerKind::Linear, LearnerKind::Logistic, LearnerKind::Cox];

    pub fn as_str(self) -> &'static str {
        match self {
            LearnerKind::Linear => "Linear",
            LearnerKind::Logistic => "Logistic",
            LearnerKind::Cox => "Cox",
        }
    }
}

impl std::fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ridge penalties and Newton settings shared by the learners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerOptions {
    pub ridge_linear: f64,
    pub ridge_logistic: f64,
    pub ridge_cox: f64,
    pub newton: NewtonOptions,
}

impl Default for LearnerOptions {
    fn default() -> Self {
        LearnerOptions {
            ridge_linear: 1e-6,
            ridge_logistic: 1e-6,
            ridge_cox: 1e-6,
            newton: NewtonOptions::default(),
        }
    }
}

/// Borrowed survival data: features with observed time and event flag.
#[derive(Debug, Clone)]
pub struct SurvivalRows<'a> {
    pub horizon: f64,
    pub x: Vec<&'a [f64]>,
    pub time: Vec<f64>,
    pub event: Vec<bool>,
}

impl<'a> SurvivalRows<'a> {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> SurvivalRows<'a> {
        SurvivalRows {
            horizon: self.horizon,
            x: idx.iter().map(|&i| self.x[i]).collect(),
            time: idx.iter().map(|&i| self.time[i]).collect(),
            event: idx.iter().map(|&i| self.event[i]).collect(),
        }
    }

    /// Rows whose outcome at the horizon is known, labeled 1 = survived.
    pub fn labeled(&self) -> BinaryRows<'a> {
        let mut x = Vec::with_capacity(self.len());
        let mut y = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            if let Some(l) = horizon_label(self.time[i], self.event[i], self.horizon) {
                x.push(self.x[i]);
                y.push(f64::from(l));
            }
        }
        BinaryRows {
            horizon: self.horizon,
            x,
            y,
        }
    }
}

/// Borrowed binary-outcome data (y in {0, 1}).
#[derive(Debug, Clone)]
pub struct BinaryRows<'a> {
    pub horizon: f64,
    pub x: Vec<&'a [f64]>,
    pub y: Vec<f64>,
}

impl<'a> BinaryRows<'a> {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.y.iter().map(|&v| u8::from(v > 0.5)).collect()
    }

    pub fn has_both_labels(&self) -> bool {
        let pos = self.y.iter().filter(|&&v| v > 0.5).count();
        pos > 0 && pos < self.len()
    }
}

impl crate::cohort::LabeledSet {
    pub fn binary_rows(&self) -> BinaryRows<'_> {
        BinaryRows {
            horizon: self.horizon,
            x: self.rows.iter().map(|r| r.features.as_slice()).collect(),
            y: self.rows.iter().map(|r| f64::from(r.label)).collect(),
        }
    }
}

pub(crate) fn width_of(x: &[&[f64]]) -> Result<usize> {
    let w = x.first().map_or(0, |r| r.len());
    if x.iter().any(|r| r.len() != w) {
        return Err(Error::Domain("rows have inconsistent widths".into()));
    }
    Ok(w)
}

/// A fitted base learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictor {
    pub kind: LearnerKind,
    pub coefficients: Vec<f64>,
    /// Always 0 for Cox.
    pub intercept: f64,
    /// Baseline survival `exp(-H0(horizon))`; Cox only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_survival: Option<f64>,
    pub horizon: f64,
    pub trained_on_node: usize,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Predictor {
    pub fn width(&self) -> usize {
        self.coefficients.len()
    }

    fn linear_predictor(&self, x: &[f64]) -> f64 {
        self.coefficients.iter().zip(x).map(|(b, v)| b * v).sum::<f64>() + self.intercept
    }

    /// Survival probability at the horizon. Caller guarantees the width.
    pub fn score(&self, x: &[f64]) -> f64 {
        let eta = self.linear_predictor(x);
        let p = match self.kind {
            LearnerKind::Linear => eta,
            LearnerKind::Logistic => sigmoid(eta),
            LearnerKind::Cox => {
                let s0 = self.baseline_survival.unwrap_or(1.0);
                s0.powf(eta.exp())
            }
        };
        if p.is_nan() {
            0.0
        } else {
            p.clamp(0.0, 1.0)
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.width() {
            return Err(Error::Domain(format!(
                "feature vector has width {}, predictor expects {}",
                x.len(),
                self.width()
            )));
        }
        Ok(self.score(x))
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let finite = self.coefficients.iter().all(|c| c.is_finite()) && self.intercept.is_finite();
        if !finite || !(self.horizon > 0.0) {
            return Err(Error::Model(format!("{} predictor has non-finite parameters", self.kind)));
        }
        match (self.kind, self.baseline_survival) {
            (LearnerKind::Cox, Some(s)) if (0.0..=1.0).contains(&s) => Ok(()),
            (LearnerKind::Cox, _) => Err(Error::Model("Cox predictor needs a baseline survival in [0, 1]".into())),
            _ => Ok(()),
        }
    }
}
