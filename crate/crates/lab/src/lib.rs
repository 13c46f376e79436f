//! Experiment runner for `ddlab-core`.
//!
//! A run resolves an [`config::ExperimentConfig`], executes the matching
//! pipeline from [`experiments`], writes snapshots, `diagnostics.json` and a
//! [`manifest::RunManifest`] into a run directory, and finally renders the
//! CSV, JSON and gnuplot outputs through [`report::report`].

use std::path::PathBuf;

pub mod config;
pub mod experiments;
pub mod manifest;
pub mod report;

pub use config::{ExperimentConfig, ExperimentId};
pub use manifest::{run, RunManifest, RunStatus};
pub use report::report;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("configuration: {0}")]
    Config(String),

    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),

    #[error(transparent)]
    Core(#[from] ddlab_core::Error),

    #[error("io: {0}")]
    Io(String),

    #[error("malformed run directory: {0}")]
    Format(String),

    #[error("manifest lists no snapshots")]
    EmptySnapshotIndex,

    #[error("snapshot {0} listed in the manifest is missing")]
    MissingSnapshot(String),

    #[error("snapshot {file}: checksum {actual} does not match manifest {expected}")]
    ChecksumMismatch { file: String, expected: String, actual: String },

    #[error("run aborted: non-finite state after t = {t}; partial manifest at {}", .manifest.display())]
    Aborted { t: f64, manifest: PathBuf },
}

impl LabError {
    pub(crate) fn io(path: &std::path::Path, e: impl std::fmt::Display) -> LabError {
        LabError::Io(format!("{}: {e}", path.display()))
    }
}
