//! Command implementations behind the `tops` binary. Each command returns a
//! [`StageError`] naming the failing stage and input.

mod commands;
mod config;
mod error;

pub use commands::{
    cmd_cv, cmd_evaluate, cmd_predict, cmd_synth, cmd_train, load_models_dir, model_file_name, run_cv, train_horizon,
    CvReport, FoldReport, GlobalScore, HorizonCv, HorizonReport, ReportMetadata, SynthOutputs, TrainOutcome, TrainReport,
};
pub use config::{resolve_config, ConfigOverrides, RunConfig};
pub use error::{StageError, EXIT_DATA, EXIT_NUMERIC, EXIT_USAGE};
