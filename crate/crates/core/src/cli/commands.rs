use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::error::{StageError, Staged};
use crate::analysis::{auc, evaluate_scores, EvalOptions, EvaluationReport};
use crate::cohort::{
    impute_with_fills, kfold, label_at_horizon, load_cohort, load_feature_rows, relevance_scores,
    split_dataset, synth_cohort, write_cohort, Cohort, FillValues, RelevanceReport, Schema, SynthSpec,
};
use crate::error::Error;
use crate::learners::{fit, BinaryRows, LearnerKind};
use crate::tree::{fit_path_weights, grow, load_model, load_model_checked, save_model, SplitSummary, TreeOfPredictors, TreeShape};

type CmdResult<T> = Result<T, StageError>;

pub fn model_file_name(horizon: f64) -> String {
    format!("model_h{horizon}.json")
}

fn load_inputs(data: &Path, schema: &Path) -> CmdResult<Cohort> {
    let schema = Schema::from_json_file(schema).stage("schema", schema.display())?;
    load_cohort(data, &schema).stage("load", data.display())
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> CmdResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(Error::from).stage("output", path.display())?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e)).stage("output", path.display())
}

/// `1 - AUC` of the overall predictor, or `None` if the rows lack a class.
fn overall_loss(tree: &TreeOfPredictors, rows: &BinaryRows<'_>) -> CmdResult<Option<f64>> {
    if !rows.has_both_labels() {
        return Ok(None);
    }
    let scores = overall_scores(tree, &rows.x)?;
    Ok(Some(1.0 - auc(&scores, &rows.labels()).stage("evaluate", format!("h={}", tree.horizon))?))
}

fn overall_scores(tree: &TreeOfPredictors, x: &[&[f64]]) -> CmdResult<Vec<f64>> {
    x.iter()
        .map(|r| tree.predict_overall(r))
        .collect::<crate::Result<_>>()
        .stage("predict", format!("h={}", tree.horizon))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HorizonReport {
    pub horizon: f64,
    pub n_train: usize,
    pub n_v1: usize,
    pub n_v2: usize,
    pub n_test: usize,
    /// Rows censored before the horizon, excluded from labeled sets.
    pub excluded_censored: usize,
    pub v1_loss: Option<f64>,
    pub v2_loss: Option<f64>,
    pub test_auc: Option<f64>,
    pub shape: TreeShape,
    /// Leaves whose path weights fell back to uniform.
    pub uniform_weight_leaves: Vec<usize>,
    pub relevance: Option<RelevanceReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub tool_version: String,
    pub generated_at_unix: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: RunConfig,
    pub n_rows: usize,
    pub fill_values: FillValues,
    pub horizons: Vec<HorizonReport>,
    pub models: Vec<String>,
    pub metadata: ReportMetadata,
}

fn metadata() -> ReportMetadata {
    ReportMetadata {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        generated_at_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
    }
}

/// Labels, splits, grows and weights one horizon's tree from an imputed cohort.
pub fn train_horizon(
    cohort: &Cohort,
    fills: &FillValues,
    horizon: f64,
    config: &RunConfig,
) -> CmdResult<(TreeOfPredictors, HorizonReport)> {
    let tag = format!("h={horizon}");
    let labeled = label_at_horizon(cohort, horizon).stage("label", &tag)?;
    if !labeled.has_both_labels() {
        let survived = labeled.labels().filter(|&l| l == 1).count();
        return Err(StageError::new(
            "label",
            tag,
            Error::Domain(format!(
                "need both outcomes at the horizon; {} labeled rows ({survived} survived, {} censored rows excluded)",
                labeled.rows.len(),
                labeled.excluded_count
            )),
        ));
    }
    let bundle = split_dataset(cohort, config.split, config.seed).stage("split", &tag)?;
    let s = bundle.s.survival_rows(horizon);
    let v1 = bundle.v1.survival_rows(horizon).labeled();
    let v2 = bundle.v2.survival_rows(horizon).labeled();
    let test = bundle.t.survival_rows(horizon).labeled();
    let mut tree = grow(&s, &v1, &cohort.schema, &config.growth).stage("grow", &tag)?;
    let uniform = fit_path_weights(&mut tree, &v2).stage("weights", &tag)?;
    tree.fill_values = Some(fills.clone());
    let names: Vec<String> = cohort.schema.columns().iter().map(|c| c.name.clone()).collect();
    let relevance = label_at_horizon(&bundle.s, horizon)
        .and_then(|l| relevance_scores(&l, &names))
        .ok();
    let report = HorizonReport {
        horizon,
        n_train: bundle.s.len(),
        n_v1: bundle.v1.len(),
        n_v2: bundle.v2.len(),
        n_test: bundle.t.len(),
        excluded_censored: labeled.excluded_count,
        v1_loss: overall_loss(&tree, &v1)?,
        v2_loss: overall_loss(&tree, &v2)?,
        test_auc: overall_loss(&tree, &test)?.map(|l| 1.0 - l),
        shape: tree.shape(),
        uniform_weight_leaves: uniform,
        relevance,
    };
    Ok((tree, report))
}

pub struct TrainOutcome {
    pub model_paths: Vec<PathBuf>,
    pub report_path: PathBuf,
    pub report: TrainReport,
}

/// Trains one model per horizon and writes `model_h{h}.json` files plus
/// `train_report.json` to `out`. On failure nothing written here remains.
pub fn cmd_train(data: &Path, schema: &Path, config: &RunConfig, out: &Path) -> CmdResult<TrainOutcome> {
    config.validate().stage("config", "run config")?;
    let raw = load_inputs(data, schema)?;
    let (cohort, fills) = impute_with_fills(&raw).stage("impute", data.display())?;
    let trained: Vec<(TreeOfPredictors, HorizonReport)> = config
        .horizons
        .par_iter()
        .map(|&h| train_horizon(&cohort, &fills, h, config))
        .collect::<CmdResult<_>>()?;

    fs::create_dir_all(out).map_err(|e| Error::io(out, e)).stage("output", out.display())?;
    let mut written: Vec<PathBuf> = Vec::new();
    let result = (|| {
        let mut names = Vec::new();
        for (tree, _) in &trained {
            let name = model_file_name(tree.horizon);
            let path = out.join(&name);
            written.push(path.clone());
            save_model(tree, &path).stage("save", path.display())?;
            info!("wrote {}", path.display());
            names.push(name);
        }
        let report = TrainReport {
            config: config.clone(),
            n_rows: cohort.len(),
            fill_values: fills.clone(),
            horizons: trained.iter().map(|(_, r)| r.clone()).collect(),
            models: names,
            metadata: metadata(),
        };
        let report_path = out.join("train_report.json");
        written.push(report_path.clone());
        write_json(&report, &report_path)?;
        Ok((report, report_path))
    })();
    match result {
        Ok((report, report_path)) => {
            written.pop();
            Ok(TrainOutcome {
                model_paths: written,
                report_path,
                report,
            })
        }
        Err(e) => {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            Err(e)
        }
    }
}

fn impute_rows(tree: &TreeOfPredictors, rows: &mut [Vec<f64>], input: &Path) -> CmdResult<()> {
    for (i, row) in rows.iter_mut().enumerate() {
        if let Some(f) = &tree.fill_values {
            f.apply(row);
        }
        if row.iter().any(|v| v.is_nan()) {
            return Err(StageError::new(
                "impute",
                input.display().to_string(),
                Error::Domain(format!("row {i} has missing values and the model stores no fill values")),
            ));
        }
    }
    Ok(())
}

/// Writes `row_id,probability` for every data row. With `schema`, the model
/// must have been trained on exactly that schema.
pub fn cmd_predict(model: &Path, data: &Path, schema: Option<&Path>, out: &Path) -> CmdResult<usize> {
    let tree = match schema {
        Some(sp) => {
            let s = Schema::from_json_file(sp).stage("schema", sp.display())?;
            load_model_checked(model, &s).stage("model", model.display())?
        }
        None => load_model(model).stage("model", model.display())?,
    };
    let mut rows = load_feature_rows(data, &tree.schema).stage("load", data.display())?;
    impute_rows(&tree, &mut rows, data)?;
    let x: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    let probs = overall_scores(&tree, &x)?;
    let mut w = csv::Writer::from_path(out)
        .map_err(|e| Error::Domain(e.to_string()))
        .stage("output", out.display())?;
    let mut emit = |rec: [String; 2]| {
        w.write_record(&rec)
            .map_err(|e| Error::Domain(e.to_string()))
            .stage("output", out.display())
    };
    emit(["row_id".into(), "probability".into()])?;
    for (i, p) in probs.iter().enumerate() {
        emit([i.to_string(), p.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(out, e)).stage("output", out.display())?;
    Ok(probs.len())
}

/// Scores a labeled data file with a saved model and writes the report.
pub fn cmd_evaluate(model: &Path, data: &Path, opts: &EvalOptions, out: &Path) -> CmdResult<EvaluationReport> {
    let tree = load_model(model).stage("model", model.display())?;
    let cohort = load_cohort(data, &tree.schema).stage("load", data.display())?;
    let mut rows: Vec<Vec<f64>> = cohort.records.iter().map(|r| r.features.clone()).collect();
    impute_rows(&tree, &mut rows, data)?;
    let records = cohort
        .records
        .iter()
        .zip(rows)
        .map(|(r, features)| crate::cohort::Record { features, ..r.clone() })
        .collect();
    let cohort = Cohort::new(tree.schema.clone(), records).stage("impute", data.display())?;
    let labeled = label_at_horizon(&cohort, tree.horizon).stage("label", data.display())?;
    let rows = labeled.binary_rows();
    let scores = overall_scores(&tree, &rows.x)?;
    let report = evaluate_scores(tree.horizon, &scores, &rows.labels(), opts).stage("evaluate", data.display())?;
    write_json(&report, out)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GlobalScore {
    pub kind: LearnerKind,
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub n_dev: usize,
    pub n_test: usize,
    pub tops_auc: f64,
    pub root_split: Option<SplitSummary>,
    pub tree_nodes: usize,
    pub global: Vec<GlobalScore>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HorizonCv {
    pub horizon: f64,
    pub folds: Vec<FoldReport>,
    pub mean_tops_auc: f64,
    /// Mean over folds of each global learner's test AUC (folds where it
    /// failed to fit are skipped).
    pub mean_global: Vec<GlobalScore>,
}

impl HorizonCv {
    pub fn best_global(&self) -> Option<&GlobalScore> {
        self.mean_global
            .iter()
            .filter(|g| g.auc.is_some())
            .max_by(|a, b| a.auc.partial_cmp(&b.auc).expect("finite AUCs"))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub seed: u64,
    pub horizons: Vec<HorizonCv>,
}

fn cv_fold(fold_idx: usize, dev: &Cohort, test: &Cohort, horizon: f64, config: &RunConfig) -> CmdResult<FoldReport> {
    let tag = format!("fold {fold_idx}, h={horizon}");
    let (dev, fills) = impute_with_fills(dev).stage("impute", &tag)?;
    let mut test = test.clone();
    for r in &mut test.records {
        fills.apply(&mut r.features);
    }
    let r = config.cv_split;
    let sub = crate::cohort::partition_indices(dev.len(), &r, config.seed).stage("split", &tag)?;
    let (s, v1, v2) = (dev.subset(&sub[0]), dev.subset(&sub[1]), dev.subset(&sub[2]));
    let s_rows = s.survival_rows(horizon);
    let v1_rows = v1.survival_rows(horizon).labeled();
    let v2_rows = v2.survival_rows(horizon).labeled();
    let mut tree = grow(&s_rows, &v1_rows, &dev.schema, &config.growth).stage("grow", &tag)?;
    fit_path_weights(&mut tree, &v2_rows).stage("weights", &tag)?;
    let test_rows = test.survival_rows(horizon).labeled();
    let tops_auc = 1.0
        - overall_loss(&tree, &test_rows)?.ok_or_else(|| {
            StageError::new("evaluate", tag.clone(), Error::Domain("test fold lacks one outcome".into()))
        })?;
    let dev_rows = dev.survival_rows(horizon);
    let labels = test_rows.labels();
    let global = LearnerKind::ALL
        .iter()
        .map(|&kind| {
            let auc = match fit(kind, &dev_rows, &config.growth.learner) {
                Ok(p) => {
                    let scores: Vec<f64> = test_rows.x.iter().map(|x| p.score(x)).collect();
                    auc(&scores, &labels).ok()
                }
                Err(e) => {
                    warn!("{tag}: global {kind} failed: {e}");
                    None
                }
            };
            GlobalScore { kind, auc }
        })
        .collect();
    let shape = tree.shape();
    Ok(FoldReport {
        fold: fold_idx,
        n_dev: dev.len(),
        n_test: test.len(),
        tops_auc,
        root_split: shape.splits.iter().find(|s| s.node == 0).cloned(),
        tree_nodes: shape.nodes,
        global,
    })
}

/// k-fold cross-validation of ToPs against the three global learners.
pub fn run_cv(cohort: &Cohort, config: &RunConfig, k: usize) -> CmdResult<CvReport> {
    config.validate().stage("config", "run config")?;
    let folds = kfold(cohort, k, config.seed).stage("split", format!("k={k}"))?;
    let mut horizons = Vec::new();
    for &h in &config.horizons {
        let reports: Vec<FoldReport> = folds
            .par_iter()
            .enumerate()
            .map(|(i, f)| cv_fold(i, &f.development, &f.test, h, config))
            .collect::<CmdResult<_>>()?;
        let mean = |v: Vec<f64>| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        let mean_global = LearnerKind::ALL
            .iter()
            .enumerate()
            .map(|(i, &kind)| GlobalScore {
                kind,
                auc: mean(reports.iter().filter_map(|r| r.global[i].auc).collect()),
            })
            .collect();
        horizons.push(HorizonCv {
            horizon: h,
            mean_tops_auc: mean(reports.iter().map(|r| r.tops_auc).collect()).unwrap_or(f64::NAN),
            folds: reports,
            mean_global,
        });
    }
    Ok(CvReport {
        k,
        seed: config.seed,
        horizons,
    })
}

pub fn cmd_cv(data: &Path, schema: &Path, config: &RunConfig, k: usize, out: &Path) -> CmdResult<CvReport> {
    let cohort = load_inputs(data, schema)?;
    let report = run_cv(&cohort, config, k)?;
    write_json(&report, out)?;
    Ok(report)
}

pub struct SynthOutputs {
    pub csv: PathBuf,
    pub truth: PathBuf,
    pub schema: PathBuf,
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map_or_else(|| "cohort".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.{suffix}.json"))
}

/// Writes the synthetic cohort CSV, a `<stem>.truth.json` sidecar with region
/// assignments and true models, and a `<stem>.schema.json` for training.
pub fn cmd_synth(spec_path: &Path, out: &Path) -> CmdResult<SynthOutputs> {
    let text = fs::read_to_string(spec_path)
        .map_err(|e| Error::io(spec_path, e))
        .stage("spec", spec_path.display())?;
    let spec: SynthSpec = serde_json::from_str(&text).map_err(Error::from).stage("spec", spec_path.display())?;
    let synth = synth_cohort(&spec).stage("synth", spec_path.display())?;
    let file = fs::File::create(out).map_err(|e| Error::io(out, e)).stage("output", out.display())?;
    write_cohort(&synth.cohort, std::io::BufWriter::new(file)).stage("output", out.display())?;
    let outputs = SynthOutputs {
        csv: out.to_path_buf(),
        truth: sibling(out, "truth"),
        schema: sibling(out, "schema"),
    };
    write_json(&synth.sidecar(&spec), &outputs.truth)?;
    write_json(&synth.cohort.schema, &outputs.schema)?;
    Ok(outputs)
}

/// Loads every `model*.json` in `dir`, sorted by file name.
pub fn load_models_dir(dir: &Path) -> CmdResult<Vec<TreeOfPredictors>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e)).stage("models", dir.display())?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            name.starts_with("model") && name.ends_with(".json")
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(StageError::new(
            "models",
            dir.display().to_string(),
            Error::Model("no model*.json files found".into()),
        ));
    }
    paths
        .iter()
        .map(|p| load_model(p).stage("models", p.display()))
        .collect()
}
