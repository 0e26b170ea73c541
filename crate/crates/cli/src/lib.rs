//! Command line driver for the mean curvature flow simulator.

pub mod config;
pub mod run;

use thiserror::Error;

pub use config::{build_config, flag_pairs, parse_config, parse_pairs, Command, RunConfig};
pub use run::{execute, RunSummary};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown key {0}")]
    UnknownKey(String),
    #[error("{key}: {message}")]
    Invalid { key: String, message: String },
    #[error("malformed flag {0:?} (expected --key value or --key=value)")]
    Flag(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Mesh(#[from] mcf_core::mesh::MeshError),
    #[error(transparent)]
    Flow(#[from] mcf_core::flow::FlowError),
    #[error(transparent)]
    Analysis(#[from] mcf_core::analysis::AnalysisError),
    #[error("convergence study stopped: {0}")]
    Study(String),
}

impl CliError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
