//! Synthetic cohorts with planted region structure.
//!
//! Each region of feature space carries its own proportional-hazards model
//! with cumulative hazard `H(t | x) = exp(beta . x) * (lambda * t)^shape`
//! (`shape = 1` gives exponential event times). Censoring times are drawn
//! independently from `Uniform(0, c_max)`, with `c_max` solved so that the
//! expected censored fraction equals `censor_rate`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Exp1, Normal, Uniform};
use serde::{Deserialize, Serialize};

use super::schema::{FeatureSpec, Schema};
use super::{Cohort, Record};
use crate::error::{Error, Result};
use crate::tree::{Constraint, Side};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum FeatureDistribution {
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
    Bernoulli { p: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthFeature {
    pub name: String,
    pub distribution: FeatureDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionConstraint {
    pub feature: String,
    pub threshold: f64,
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    /// Conjunction of threshold constraints; empty matches everything.
    #[serde(default)]
    pub constraints: Vec<RegionConstraint>,
    pub coefficients: Vec<f64>,
    pub baseline_hazard: f64,
    #[serde(default = "default_shape")]
    pub shape: f64,
}

fn default_shape() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub features: Vec<SynthFeature>,
    /// Matched in order; a record belongs to the first region it satisfies.
    pub regions: Vec<Region>,
    pub censor_rate: f64,
    pub n: usize,
    pub seed: u64,
}

/// Generated cohort plus the ground truth used to produce it.
#[derive(Debug, Clone)]
pub struct SyntheticCohort {
    pub cohort: Cohort,
    /// Region index of each record.
    pub regions: Vec<usize>,
    /// Upper bound of the uniform censoring distribution (`None` if uncensored).
    pub censor_max: Option<f64>,
}

/// Ground-truth sidecar written next to a synthetic cohort.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthSidecar {
    pub region_of_row: Vec<usize>,
    pub regions: Vec<Region>,
    pub censor_max: Option<f64>,
}

impl SyntheticCohort {
    pub fn sidecar(&self, spec: &SynthSpec) -> TruthSidecar {
        TruthSidecar {
            region_of_row: self.regions.clone(),
            regions: spec.regions.clone(),
            censor_max: self.censor_max,
        }
    }
}

impl SynthSpec {
    pub fn schema(&self) -> Result<Schema> {
        Schema::new(
            self.features
                .iter()
                .map(|f| match f.distribution {
                    FeatureDistribution::Bernoulli { .. } => FeatureSpec::binary(&f.name),
                    _ => FeatureSpec::continuous(&f.name),
                })
                .collect(),
        )
    }

    /// Two regions split on `x0` at 0.5 with opposite-sign coefficients on
    /// four normal covariates.
    pub fn planted_two_region(n: usize, censor_rate: f64, seed: u64) -> Self {
        let beta = [1.2, -0.9, 0.7, 0.0];
        let mut features = vec![SynthFeature {
            name: "x0".into(),
            distribution: FeatureDistribution::Uniform { lo: 0.0, hi: 1.0 },
        }];
        for i in 1..=4 {
            features.push(SynthFeature {
                name: format!("x{i}"),
                distribution: FeatureDistribution::Normal { mean: 0.0, sd: 1.0 },
            });
        }
        let region = |sign: f64, side: Side| Region {
            constraints: vec![RegionConstraint {
                feature: "x0".into(),
                threshold: 0.5,
                side,
            }],
            coefficients: std::iter::once(0.0)
                .chain(beta.iter().map(|b| sign * b))
                .collect(),
            baseline_hazard: 1.0 / 365.0,
            shape: 1.0,
        };
        SynthSpec {
            features,
            regions: vec![region(1.0, Side::Below), region(-1.0, Side::AtOrAbove)],
            censor_rate,
            n,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(Error::Domain(format!("synthetic n must be >= 10, got {}", self.n)));
        }
        if self.regions.is_empty() {
            return Err(Error::Domain("synthetic spec needs at least one region".into()));
        }
        if !(0.0..1.0).contains(&self.censor_rate) {
            return Err(Error::Domain(format!(
                "censor_rate must be in [0, 1), got {}",
                self.censor_rate
            )));
        }
        for f in &self.features {
            let ok = match f.distribution {
                FeatureDistribution::Uniform { lo, hi } => lo < hi,
                FeatureDistribution::Normal { sd, .. } => sd > 0.0,
                FeatureDistribution::Bernoulli { p } => (0.0..=1.0).contains(&p),
            };
            if !ok {
                return Err(Error::Domain(format!(
                    "invalid distribution for feature `{}`",
                    f.name
                )));
            }
        }
        for (k, r) in self.regions.iter().enumerate() {
            if r.coefficients.len() != self.features.len() {
                return Err(Error::Domain(format!(
                    "region {k} has {} coefficients for {} features",
                    r.coefficients.len(),
                    self.features.len()
                )));
            }
            if !(r.baseline_hazard > 0.0) || !(r.shape > 0.0) {
                return Err(Error::Domain(format!(
                    "region {k} needs baseline_hazard > 0 and shape > 0"
                )));
            }
        }
        Ok(())
    }
}

fn sample_feature(d: &FeatureDistribution, rng: &mut ChaCha8Rng) -> f64 {
    match *d {
        FeatureDistribution::Uniform { lo, hi } => Uniform::new(lo, hi).expect("lo < hi").sample(rng),
        FeatureDistribution::Normal { mean, sd } => Normal::new(mean, sd).expect("sd > 0").sample(rng),
        FeatureDistribution::Bernoulli { p } => f64::from(u8::from(rng.random_bool(p))),
    }
}

/// Solves `mean_i min(1, t_i / c) = rate` for `c` by bisection.
fn censor_bound(times: &[f64], rate: f64) -> f64 {
    let frac = |c: f64| times.iter().map(|&t| (t / c).min(1.0)).sum::<f64>() / times.len() as f64;
    let (mut lo, mut hi) = (1e-12_f64, times.iter().cloned().fold(1.0, f64::max));
    while frac(hi) > rate {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if frac(mid) > rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

pub fn synth_cohort(spec: &SynthSpec) -> Result<SyntheticCohort> {
    spec.validate()?;
    let schema = spec.schema()?;
    let compiled: Vec<Vec<Constraint>> = spec
        .regions
        .iter()
        .map(|r| {
            r.constraints
                .iter()
                .map(|c| {
                    let feature_index = schema.feature_index(&c.feature).ok_or_else(|| {
                        Error::Domain(format!("region constraint names unknown feature `{}`", c.feature))
                    })?;
                    Ok(Constraint {
                        feature_index,
                        threshold: c.threshold,
                        side: c.side,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut xs = Vec::with_capacity(spec.n);
    let mut regions = Vec::with_capacity(spec.n);
    let mut event_times = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let x: Vec<f64> = spec
            .features
            .iter()
            .map(|f| sample_feature(&f.distribution, &mut rng))
            .collect();
        let k = compiled
            .iter()
            .position(|cs| cs.iter().all(|c| c.accepts(&x)))
            .ok_or_else(|| Error::Domain(format!("record {i} falls in no region")))?;
        let r = &spec.regions[k];
        let eta: f64 = r.coefficients.iter().zip(&x).map(|(b, v)| b * v).sum();
        let e: f64 = Exp1.sample(&mut rng);
        let t = (e / eta.exp()).powf(1.0 / r.shape) / r.baseline_hazard;
        xs.push(x);
        regions.push(k);
        event_times.push(t);
    }

    let censor_max = (spec.censor_rate > 0.0).then(|| censor_bound(&event_times, spec.censor_rate));
    let records = xs
        .into_iter()
        .zip(&event_times)
        .map(|(features, &t)| match censor_max {
            Some(cmax) => {
                let c = rng.random::<f64>() * cmax;
                Record {
                    features,
                    time: t.min(c),
                    event: t <= c,
                }
            }
            None => Record {
                features,
                time: t,
                event: true,
            },
        })
        .collect();
    Ok(SyntheticCohort {
        cohort: Cohort::new(schema, records)?,
        regions,
        censor_max,
    })
}
