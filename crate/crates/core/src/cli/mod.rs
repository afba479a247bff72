//! Command implementations behind the `transitivity` binary.

pub mod commands;
pub mod config;
pub mod report;
pub mod validate;

pub use commands::{analyze, generate, run, AnalyzeSummary, GenerateSummary, RunOptions, RunSummary};
pub use config::RunConfig;
pub use report::AnalysisReport;
pub use validate::{run_validation, ValidationOptions, ValidationReport};
