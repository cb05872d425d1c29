use std::fmt;

use crate::error::Error;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

/// A command failure tagged with the pipeline stage and the input involved.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub input: String,
    pub source: Error,
}

impl StageError {
    pub fn new(stage: &'static str, input: impl Into<String>, source: Error) -> Self {
        StageError {
            stage,
            input: input.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.stage == "config" {
            EXIT_USAGE
        } else if self.source.is_numeric() {
            EXIT_NUMERIC
        } else {
            EXIT_DATA
        }
    }
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", self.stage, self.input, self.source)
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

/// Attaches a stage tag and input name to a library result.
pub(crate) trait Staged<T> {
    fn stage(self, stage: &'static str, input: impl fmt::Display) -> Result<T, StageError>;
}

impl<T> Staged<T> for crate::error::Result<T> {
    fn stage(self, stage: &'static str, input: impl fmt::Display) -> Result<T, StageError> {
        self.map_err(|e| StageError::new(stage, input.to_string(), e))
    }
}
