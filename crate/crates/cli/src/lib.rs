//! Command implementations behind the `plstm` binary.
//!
//! Every command takes plain argument structs and a writer for its console
//! output, so it can be driven in-process. Errors carry a stable exit code:
//! 2 for data and I/O problems, 3 for configuration problems.

pub mod checkpoint;
pub mod commands;
pub mod config;
mod error;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use commands::{
    cmd_benchmark, cmd_eval, cmd_stats, cmd_train, BenchmarkArgs, EvalArgs, StatsArgs, TrainArgs,
};
pub use config::RunConfig;
pub use error::CliError;
