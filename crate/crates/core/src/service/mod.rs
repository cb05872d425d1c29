//! Request/response handlers over a set of loaded horizon models. The
//! handlers are plain functions of (models, request); the HTTP layer in
//! [`http`] only moves JSON in and out.

#[cfg(feature = "serve")]
pub mod http;

use std::collections::{BTreeMap, BTreeSet};

use log::error;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analysis::individual_curve;
use crate::cohort::{decode_feature, FeatureKind, FeatureSpec, Schema};
use crate::error::{Error, Result};
use crate::tree::{TreeOfPredictors, TreeShape, MODEL_VERSION};

/// Samples in each response's survival curve, spread over [0, last horizon].
pub const CURVE_POINTS: usize = 50;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PredictRequest {
    /// Raw feature values by name; absent or null fields are imputed.
    #[serde(default)]
    pub features: BTreeMap<String, Value>,
    /// Restricts the response to these horizons; all loaded ones by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizons: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonPrediction {
    pub horizon: f64,
    pub probability: f64,
    pub leaf_path: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub predictions: Vec<HorizonPrediction>,
    /// `(t, S(t))` samples, nonincreasing.
    pub survival_curve: Vec<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Toggle {
    pub feature: String,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIfRequest {
    pub base: PredictRequest,
    #[serde(default)]
    pub toggles: Vec<Toggle>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureInfo {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
    /// Training-time fill value in raw form; null when the models store none.
    pub fill: Value,
    /// Observed training range, continuous features only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeInfo {
    pub horizon: f64,
    pub shape: TreeShape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub version: String,
    pub model_version: u32,
    pub horizons: Vec<f64>,
    pub schema: Schema,
    pub schema_fingerprint: String,
    pub features: Vec<FeatureInfo>,
    pub trees: Vec<TreeInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub models: usize,
    pub horizons: Vec<f64>,
}

/// Error body `{code, stage, message}`; `status` is the HTTP status to use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub stage: String,
    pub message: String,
}

impl ServiceError {
    pub fn invalid(code: &str, stage: &str, message: impl Into<String>) -> Self {
        ServiceError {
            status: 400,
            code: code.into(),
            stage: stage.into(),
            message: message.into(),
        }
    }

    pub fn internal(stage: &str, message: impl Into<String>) -> Self {
        ServiceError {
            status: 500,
            code: "internal".into(),
            stage: stage.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for ServiceError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({}): {}", self.code, self.stage, self.message)
    }
}

impl std::error::Error for ServiceError {}

/// Immutable set of horizon models sharing one schema.
#[derive(Debug, Clone)]
pub struct Service {
    models: Vec<TreeOfPredictors>,
    ranges: Vec<(f64, f64)>,
}

fn raw_string(spec: &FeatureSpec, v: &Value) -> std::result::Result<String, ServiceError> {
    match v {
        Value::Null => Ok(String::new()),
        Value::Bool(b) => Ok(if *b { "1" } else { "0" }.into()),
        Value::Number(n) => Ok(n.to_string()),
        Value::String(s) => Ok(s.clone()),
        _ => Err(ServiceError::invalid(
            "invalid_value",
            "encode",
            format!("feature `{}` must be a number, boolean or string", spec.name),
        )),
    }
}

fn raw_json(spec: &FeatureSpec, raw: String) -> Value {
    if raw.is_empty() {
        return Value::Null;
    }
    match spec.kind {
        FeatureKind::Categorical => Value::String(raw),
        _ => raw.parse::<f64>().ok().and_then(serde_json::Number::from_f64).map_or(Value::Null, Value::Number),
    }
}

impl Service {
    /// Models must share one schema and have distinct horizons.
    pub fn new(mut models: Vec<TreeOfPredictors>) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::Model("no models to serve".into()));
        }
        models.sort_by(|a, b| a.horizon.total_cmp(&b.horizon));
        let fp = models[0].schema_fingerprint.clone();
        for m in &models {
            m.validate()?;
            if m.schema_fingerprint != fp {
                return Err(Error::FingerprintMismatch {
                    expected: fp,
                    found: m.schema_fingerprint.clone(),
                });
            }
        }
        if models.windows(2).any(|w| w[0].horizon == w[1].horizon) {
            return Err(Error::Model("two models share a horizon".into()));
        }
        let width = models[0].width();
        let ranges = (0..width)
            .map(|c| {
                models.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), m| {
                    (lo.min(m.column_ranges[c].0), hi.max(m.column_ranges[c].1))
                })
            })
            .collect();
        Ok(Service { models, ranges })
    }

    pub fn schema(&self) -> &Schema {
        &self.models[0].schema
    }

    pub fn horizons(&self) -> Vec<f64> {
        self.models.iter().map(|m| m.horizon).collect()
    }

    pub fn models(&self) -> &[TreeOfPredictors] {
        &self.models
    }

    /// Encoded row with NaN for omitted features, plus range warnings.
    fn encode(&self, features: &BTreeMap<String, Value>) -> std::result::Result<(Vec<f64>, Vec<String>), ServiceError> {
        let schema = self.schema();
        let mut row = vec![f64::NAN; schema.width()];
        let mut warnings = Vec::new();
        for (name, value) in features {
            let fi = schema.feature_index(name).ok_or_else(|| {
                ServiceError::invalid("unknown_feature", "validate", format!("unknown feature `{name}`"))
            })?;
            let spec = &schema.features()[fi];
            let range = schema.column_range(fi);
            let raw = raw_string(spec, value)?;
            spec.encode(&raw, &mut row[range.clone()])
                .map_err(|e| ServiceError::invalid("invalid_value", "encode", e.to_string()))?;
            if spec.kind == FeatureKind::Continuous && !raw.is_empty() {
                let (lo, hi) = self.ranges[range.start];
                let v = row[range.start];
                if v < lo || v > hi {
                    warnings.push(format!("feature `{name}` = {v} is outside the training range [{lo}, {hi}]"));
                }
            }
        }
        Ok((row, warnings))
    }

    fn select(&self, horizons: &Option<Vec<f64>>) -> std::result::Result<Vec<&TreeOfPredictors>, ServiceError> {
        let Some(hs) = horizons else {
            return Ok(self.models.iter().collect());
        };
        let mut picked = BTreeSet::new();
        for &h in hs {
            let i = self.models.iter().position(|m| m.horizon == h).ok_or_else(|| {
                ServiceError::invalid(
                    "unknown_horizon",
                    "validate",
                    format!("no model for horizon {h}; loaded: {:?}", self.horizons()),
                )
            })?;
            picked.insert(i);
        }
        if picked.is_empty() {
            return Err(ServiceError::invalid("unknown_horizon", "validate", "horizons list is empty"));
        }
        Ok(picked.into_iter().map(|i| &self.models[i]).collect())
    }

    pub fn handle_predict(&self, req: &PredictRequest) -> std::result::Result<PredictResponse, ServiceError> {
        let models = self.select(&req.horizons)?;
        let (row, warnings) = self.encode(&req.features)?;
        let mut predictions = Vec::with_capacity(models.len());
        for m in models {
            let mut x = row.clone();
            if let Some(f) = &m.fill_values {
                f.apply(&mut x);
            }
            if let Some(c) = x.iter().position(|v| v.is_nan()) {
                return Err(ServiceError::invalid(
                    "missing_value",
                    "impute",
                    format!(
                        "`{}` is required: the model stores no fill value",
                        self.schema().features()[self.schema().columns()[c].feature].name
                    ),
                ));
            }
            let (probability, leaf_path) = m
                .predict_overall(&x)
                .and_then(|p| Ok((p, m.route(&x)?.1)))
                .map_err(|e| {
                    error!("prediction failed at horizon {}: {e}", m.horizon);
                    ServiceError::internal("predict", e.to_string())
                })?;
            predictions.push(HorizonPrediction {
                horizon: m.horizon,
                probability,
                leaf_path,
            });
        }
        let hs: Vec<f64> = predictions.iter().map(|p| p.horizon).collect();
        let ps: Vec<f64> = predictions.iter().map(|p| p.probability).collect();
        let curve = individual_curve(&ps, &hs).map_err(|e| {
            error!("curve construction failed: {e}");
            ServiceError::internal("curve", e.to_string())
        })?;
        Ok(PredictResponse {
            survival_curve: curve.sample(*hs.last().expect("at least one horizon"), CURVE_POINTS),
            predictions,
            warnings,
        })
    }

    /// Base response followed by one response per toggle, each applied to
    /// its own copy of the base request.
    pub fn handle_whatif(&self, req: &WhatIfRequest) -> std::result::Result<Vec<PredictResponse>, ServiceError> {
        let mut out = vec![self.handle_predict(&req.base)?];
        for t in &req.toggles {
            let mut r = req.base.clone();
            r.features.insert(t.feature.clone(), t.value.clone());
            out.push(self.handle_predict(&r)?);
        }
        Ok(out)
    }

    pub fn handle_model_info(&self) -> ModelInfo {
        let schema = self.schema();
        let fills = self.models[0].fill_values.as_ref();
        let features = schema
            .features()
            .iter()
            .enumerate()
            .map(|(fi, f)| {
                let cols = schema.column_range(fi);
                let fill = fills.map_or(Value::Null, |fv| raw_json(f, decode_feature(schema, fi, &fv.0[cols.clone()])));
                FeatureInfo {
                    name: f.name.clone(),
                    kind: f.kind,
                    categories: f.categories.clone(),
                    fill,
                    range: (f.kind == FeatureKind::Continuous).then(|| self.ranges[cols.start]),
                }
            })
            .collect();
        ModelInfo {
            version: env!("CARGO_PKG_VERSION").into(),
            model_version: MODEL_VERSION,
            horizons: self.horizons(),
            schema: schema.clone(),
            schema_fingerprint: self.models[0].schema_fingerprint.clone(),
            features,
            trees: self
                .models
                .iter()
                .map(|m| TreeInfo {
                    horizon: m.horizon,
                    shape: m.shape(),
                })
                .collect(),
        }
    }

    pub fn health(&self) -> Health {
        Health {
            status: "ok".into(),
            models: self.models.len(),
            horizons: self.horizons(),
        }
    }
}
