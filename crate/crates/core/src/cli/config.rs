use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::EvalOptions;
use crate::error::{Error, Result};
use crate::learners::LearnerKind;
use crate::tree::{GrowthConfig, WeightMode};

/// Everything that pins a training or cross-validation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Prediction horizons in days, ascending.
    pub horizons: Vec<f64>,
    /// Training rows, first validation, second validation, held-out test.
    pub split: [f64; 4],
    /// Within each cross-validation development fold: training, first
    /// validation, second validation.
    pub cv_split: [f64; 3],
    pub growth: GrowthConfig,
    pub eval: EvalOptions,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            horizons: vec![90.0, 365.0, 1095.0, 3650.0],
            split: [0.48, 0.16, 0.16, 0.2],
            cv_split: [0.6, 0.2, 0.2],
            growth: GrowthConfig::default(),
            eval: EvalOptions::default(),
            seed: 0,
        }
    }
}

fn check_ratios(name: &str, r: &[f64]) -> Result<()> {
    if r.iter().any(|&v| !(v > 0.0)) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("{name} ratios must be positive and sum to 1, got {r:?}")));
    }
    Ok(())
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizons.is_empty() {
            return Err(Error::Domain("at least one horizon is required".into()));
        }
        if !(self.horizons[0] > 0.0) || self.horizons.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain(format!(
                "horizons must be positive and strictly ascending, got {:?}",
                self.horizons
            )));
        }
        check_ratios("split", &self.split)?;
        check_ratios("cv_split", &self.cv_split)?;
        self.growth.validate()?;
        if self.eval.bootstrap_reps < 100 || !(self.eval.level > 0.0 && self.eval.level < 1.0) {
            return Err(Error::Domain("eval needs bootstrap_reps >= 100 and level in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct ConfigOverrides {
    pub horizons: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub min_leaf: Option<usize>,
    pub min_gain: Option<f64>,
    pub max_depth: Option<usize>,
    pub thresholds_per_feature: Option<usize>,
    pub learners: Option<Vec<LearnerKind>>,
    pub weight_mode: Option<WeightMode>,
    pub bootstrap_reps: Option<usize>,
}

impl ConfigOverrides {
    pub fn apply(&self, c: &mut RunConfig) {
        if let Some(h) = &self.horizons {
            c.horizons = h.clone();
        }
        if let Some(s) = self.seed {
            c.seed = s;
            c.growth.seed = s;
            c.eval.seed = s;
        }
        if let Some(v) = self.min_leaf {
            c.growth.min_leaf = v;
        }
        if let Some(v) = self.min_gain {
            c.growth.min_gain = v;
        }
        if let Some(v) = self.max_depth {
            c.growth.max_depth = v;
        }
        if let Some(v) = self.thresholds_per_feature {
            c.growth.thresholds_per_feature = v;
        }
        if let Some(v) = &self.learners {
            c.growth.learner_kinds = v.clone();
        }
        if let Some(v) = self.weight_mode {
            c.growth.weight_mode = v;
        }
        if let Some(v) = self.bootstrap_reps {
            c.eval.bootstrap_reps = v;
        }
    }
}

/// Defaults, then the optional file, then command-line overrides.
pub fn resolve_config(file: Option<&Path>, overrides: &ConfigOverrides) -> Result<RunConfig> {
    let mut c = match file {
        Some(p) => RunConfig::from_json_file(p)?,
        None => RunConfig::default(),
    };
    overrides.apply(&mut c);
    c.validate()?;
    Ok(c)
}
