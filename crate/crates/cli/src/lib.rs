//! Std companion to `rllcap-core`: model/bench configuration files, the
//! benchmark harness with CSV and JSON-lines output, and the pieces the
//! `rllcap` binary is built from.

pub mod bench;
pub mod modelspec;
pub mod report;

pub use bench::{BenchConfig, BenchOutput, BenchRecord, BenchSummary, Reference};
pub use modelspec::{ConfigError, ModelSpec};
