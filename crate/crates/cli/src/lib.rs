//! Command-line pipelines over `lenspose-core`: simulation, reconstruction,
//! inference, evaluation and gradient checks.

pub mod cli;
pub mod commands;
pub mod config;

use std::fmt;

pub use cli::{run, Cli};
pub use config::PipelineConfig;

/// Bad invocation, as opposed to bad data.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Usage and configuration errors exit with 2, everything else with 1.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if cause
            .downcast_ref::<lenspose_core::Error>()
            .is_some_and(|e| e.kind() == "config")
        {
            return EXIT_USAGE;
        }
    }
    EXIT_DATA
}
