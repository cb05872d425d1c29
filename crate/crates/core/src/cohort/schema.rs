use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Binary,
    Continuous,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
}

impl FeatureSpec {
    pub fn binary(name: &str) -> Self {
        FeatureSpec {
            name: name.to_string(),
            kind: FeatureKind::Binary,
            categories: None,
        }
    }

    pub fn continuous(name: &str) -> Self {
        FeatureSpec {
            name: name.to_string(),
            kind: FeatureKind::Continuous,
            categories: None,
        }
    }

    pub fn categorical(name: &str, categories: &[&str]) -> Self {
        FeatureSpec {
            name: name.to_string(),
            kind: FeatureKind::Categorical,
            categories: Some(categories.iter().map(|c| c.to_string()).collect()),
        }
    }

    /// Number of numeric columns after encoding.
    pub fn width(&self) -> usize {
        match self.kind {
            FeatureKind::Categorical => self.categories.as_ref().map_or(0, Vec::len),
            _ => 1,
        }
    }

    /// Encodes one raw cell into `out` (length `self.width()`). An empty cell
    /// marks every output column missing (NaN).
    pub fn encode(&self, raw: &str, out: &mut [f64]) -> Result<()> {
        debug_assert_eq!(out.len(), self.width());
        let raw = raw.trim();
        if raw.is_empty() {
            out.fill(f64::NAN);
            return Ok(());
        }
        match self.kind {
            FeatureKind::Binary => {
                out[0] = match raw {
                    "0" | "false" | "0.0" => 0.0,
                    "1" | "true" | "1.0" => 1.0,
                    other => {
                        return Err(Error::Schema(format!(
                            "feature `{}` is binary, got `{other}`",
                            self.name
                        )))
                    }
                };
            }
            FeatureKind::Continuous => {
                let v: f64 = raw.parse().map_err(|_| {
                    Error::Schema(format!(
                        "feature `{}` is continuous, got `{raw}`",
                        self.name
                    ))
                })?;
                if !v.is_finite() {
                    return Err(Error::Schema(format!(
                        "feature `{}` has non-finite value `{raw}`",
                        self.name
                    )));
                }
                out[0] = v;
            }
            FeatureKind::Categorical => {
                let cats = self.categories.as_deref().unwrap_or_default();
                let hit = cats.iter().position(|c| c == raw).ok_or_else(|| {
                    Error::Schema(format!(
                        "unknown category `{raw}` for feature `{}`",
                        self.name
                    ))
                })?;
                out.fill(0.0);
                out[hit] = 1.0;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Binary,
    Continuous,
    OneHot,
}

/// One encoded numeric column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub feature: usize,
    pub kind: ColumnKind,
}

/// Ordered, validated list of features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<FeatureSpec>", into = "Vec<FeatureSpec>")]
pub struct Schema {
    features: Vec<FeatureSpec>,
    columns: Vec<Column>,
}

pub const TIME_COLUMN: &str = "time";
pub const EVENT_COLUMN: &str = "event";

impl Schema {
    pub fn new(features: Vec<FeatureSpec>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Schema("schema has no features".into()));
        }
        let mut seen = HashSet::new();
        for f in &features {
            if f.name.is_empty() {
                return Err(Error::Schema("feature with empty name".into()));
            }
            if f.name == TIME_COLUMN || f.name == EVENT_COLUMN {
                return Err(Error::Schema(format!(
                    "`{}` is a reserved column name",
                    f.name
                )));
            }
            if !seen.insert(f.name.as_str()) {
                return Err(Error::Schema(format!("duplicate feature `{}`", f.name)));
            }
            match (f.kind, &f.categories) {
                (FeatureKind::Categorical, Some(c)) if c.len() >= 2 => {
                    let distinct: HashSet<_> = c.iter().collect();
                    if distinct.len() != c.len() {
                        return Err(Error::Schema(format!(
                            "feature `{}` lists a category twice",
                            f.name
                        )));
                    }
                }
                (FeatureKind::Categorical, _) => {
                    return Err(Error::Schema(format!(
                        "categorical feature `{}` needs at least 2 categories",
                        f.name
                    )))
                }
                (_, Some(_)) => {
                    return Err(Error::Schema(format!(
                        "only categorical features take categories (`{}`)",
                        f.name
                    )))
                }
                _ => {}
            }
        }
        let mut columns = Vec::new();
        for (i, f) in features.iter().enumerate() {
            match f.kind {
                FeatureKind::Binary => columns.push(Column {
                    name: f.name.clone(),
                    feature: i,
                    kind: ColumnKind::Binary,
                }),
                FeatureKind::Continuous => columns.push(Column {
                    name: f.name.clone(),
                    feature: i,
                    kind: ColumnKind::Continuous,
                }),
                FeatureKind::Categorical => {
                    for c in f.categories.as_deref().unwrap_or_default() {
                        columns.push(Column {
                            name: format!("{}={}", f.name, c),
                            feature: i,
                            kind: ColumnKind::OneHot,
                        });
                    }
                }
            }
        }
        Ok(Schema { features, columns })
    }

    pub fn from_json_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let specs: Vec<FeatureSpec> = serde_json::from_str(&text)?;
        Schema::new(specs)
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    /// Encoded width.
    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// Range of encoded columns belonging to feature `i`.
    pub fn column_range(&self, i: usize) -> std::ops::Range<usize> {
        let start: usize = self.features[..i].iter().map(FeatureSpec::width).sum();
        start..start + self.features[i].width()
    }

    /// Hex SHA-256 of the ordered schema's canonical JSON.
    pub fn fingerprint(&self) -> String {
        let canonical =
            serde_json::to_string(&self.features).expect("schema serialization is infallible");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

impl TryFrom<Vec<FeatureSpec>> for Schema {
    type Error = Error;

    fn try_from(features: Vec<FeatureSpec>) -> Result<Self> {
        Schema::new(features)
    }
}

impl From<Schema> for Vec<FeatureSpec> {
    fn from(s: Schema) -> Self {
        s.features
    }
}
