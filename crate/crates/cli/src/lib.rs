//! Command-line tools and the reward-scoring HTTP service.
//!
//! The `tablerl` binary exposes `score`, `eval`, `passk`, `train-toy`,
//! `render` and `serve`. Every subcommand reads the same flat run config
//! (`--config`) and accepts `--seed` and `--out-dir`.

pub mod commands;
pub mod config;
pub mod judge;
pub mod service;

pub use commands::{run, Cli};
pub use config::RunConfig;
