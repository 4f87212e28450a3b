//! File formats, run configuration, metrics logging and the `uai` command
//! line, on top of `uai-core`.

pub mod cli;
pub mod embeddings;
pub mod error;
pub mod fsutil;
pub mod metrics;
pub mod rttm;
pub mod settings;
pub mod trials;

pub use error::{Error, Result};
