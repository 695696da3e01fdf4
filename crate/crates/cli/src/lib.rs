//! Batch front end for the HDGCN toolkit: training, evaluation, attention
//! inspection and propagation analysis.

pub mod commands;
pub mod config;

use hdgcn::Error;

pub use commands::{
    cmd_eval, cmd_inspect, cmd_propagate, cmd_train, CheckpointMeta, EvalMetrics, FeatureSpec,
    PropagationReport, TrainMetrics, TrainRun,
};
pub use config::RunConfig;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_SHAPE: u8 = 3;
pub const EXIT_CORRUPT: u8 = 4;

/// Process exit status for a failed command.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Dimension { .. } => EXIT_SHAPE,
        Error::Corrupt(_) => EXIT_CORRUPT,
        _ => EXIT_USAGE,
    }
}
