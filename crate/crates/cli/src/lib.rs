//! Command-line orchestration for the compressible-flow laboratory:
//! configuration parsing, the observed simulation loop with NDJSON/CSV/
//! snapshot artifacts, the oracle verification suite, and offline
//! re-analysis of stored snapshots.

pub mod analyze;
pub mod config;
pub mod output;
pub mod run;
pub mod verify;

pub use config::Config;
pub use run::{run_simulation, RunArtifacts};
