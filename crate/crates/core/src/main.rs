use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use tops_core::cli::{
    cmd_cv, cmd_evaluate, cmd_predict, cmd_synth, cmd_train, load_models_dir, resolve_config, ConfigOverrides,
    StageError, EXIT_DATA, EXIT_USAGE,
};
use tops_core::learners::LearnerKind;
use tops_core::service::{http, Service};
use tops_core::tree::WeightMode;

#[derive(Parser)]
#[command(name = "tops", version, about = "Trees of predictors for survival at fixed horizons")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Learner {
    Linear,
    Logistic,
    Cox,
}

#[derive(Clone, Copy, ValueEnum)]
enum Weights {
    Simplex,
    Unconstrained,
}

#[derive(clap::Args, Default)]
struct Overrides {
    /// Comma-separated horizons in days.
    #[arg(long, value_delimiter = ',')]
    horizons: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    min_leaf: Option<usize>,
    #[arg(long)]
    min_gain: Option<f64>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    thresholds: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    learners: Option<Vec<Learner>>,
    #[arg(long)]
    weights: Option<Weights>,
    #[arg(long)]
    bootstrap_reps: Option<usize>,
}

impl Overrides {
    fn to_config(&self) -> ConfigOverrides {
        ConfigOverrides {
            horizons: self.horizons.clone(),
            seed: self.seed,
            min_leaf: self.min_leaf,
            min_gain: self.min_gain,
            max_depth: self.max_depth,
            thresholds_per_feature: self.thresholds,
            learners: self.learners.as_ref().map(|v| {
                v.iter()
                    .map(|l| match l {
                        Learner::Linear => LearnerKind::Linear,
                        Learner::Logistic => LearnerKind::Logistic,
                        Learner::Cox => LearnerKind::Cox,
                    })
                    .collect()
            }),
            weight_mode: self.weights.map(|w| match w {
                Weights::Simplex => WeightMode::Simplex,
                Weights::Unconstrained => WeightMode::Unconstrained,
            }),
            bootstrap_reps: self.bootstrap_reps,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train one model per horizon.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Write per-row survival probabilities.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Reject the model unless it was trained on this schema.
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write an evaluation report for labeled data.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// k-fold cross-validation against the global learners.
    Cv {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Generate a synthetic cohort from a spec file.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the models in a directory over HTTP.
    Serve {
        #[arg(long)]
        models: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
    },
}

fn config_for(file: Option<&PathBuf>, o: &Overrides) -> Result<tops_core::cli::RunConfig, StageError> {
    resolve_config(file.map(PathBuf::as_path), &o.to_config()).map_err(|e| {
        let input = file.map_or_else(|| "command line".to_string(), |p| p.display().to_string());
        StageError::new("config", input, e)
    })
}

fn run(cli: Cli) -> Result<(), StageError> {
    match cli.command {
        Command::Train {
            data,
            schema,
            config,
            out,
            overrides,
        } => {
            let cfg = config_for(config.as_ref(), &overrides)?;
            let done = cmd_train(&data, &schema, &cfg, &out)?;
            for p in &done.model_paths {
                println!("{}", p.display());
            }
            println!("{}", done.report_path.display());
        }
        Command::Predict {
            model,
            data,
            schema,
            out,
        } => {
            let n = cmd_predict(&model, &data, schema.as_deref(), &out)?;
            println!("wrote {n} predictions to {}", out.display());
        }
        Command::Evaluate {
            model,
            data,
            config,
            out,
            overrides,
        } => {
            let cfg = config_for(config.as_ref(), &overrides)?;
            let r = cmd_evaluate(&model, &data, &cfg.eval, &out)?;
            println!("horizon {}: AUC {:.4} [{:.4}, {:.4}]", r.horizon, r.auc, r.ci.0, r.ci.1);
        }
        Command::Cv {
            data,
            schema,
            config,
            k,
            out,
            overrides,
        } => {
            let cfg = config_for(config.as_ref(), &overrides)?;
            let r = cmd_cv(&data, &schema, &cfg, k, &out)?;
            for h in &r.horizons {
                let best = h.best_global().and_then(|g| g.auc.map(|a| format!("{} {a:.4}", g.kind)));
                println!(
                    "horizon {}: ToPs mean AUC {:.4}; best global {}",
                    h.horizon,
                    h.mean_tops_auc,
                    best.unwrap_or_else(|| "n/a".into())
                );
            }
        }
        Command::Synth { spec, out } => {
            let o = cmd_synth(&spec, &out)?;
            println!("{}\n{}\n{}", o.csv.display(), o.truth.display(), o.schema.display());
        }
        Command::Serve { models, port, host } => {
            let loaded = load_models_dir(&models)?;
            let service = Service::new(loaded).map_err(|e| StageError::new("models", models.display().to_string(), e))?;
            let addr = SocketAddr::new(host, port);
            let rt = tokio::runtime::Runtime::new()
                .map_err(|e| StageError::new("serve", addr.to_string(), tops_core::Error::io(&models, e)))?;
            rt.block_on(http::serve(Arc::new(service), addr))
                .map_err(|e| StageError::new("serve", addr.to_string(), tops_core::Error::io(&models, e)))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(u8::try_from(e.exit_code()).unwrap_or(EXIT_DATA as u8))
        }
    }
}
