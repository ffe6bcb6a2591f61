//! Command line pipeline and HTTP service around `toponet`.
//!
//! Commands read tick CSVs from the data root, write hash-stamped artifacts
//! to the output directory, and `serve` exposes the same analyses as JSON.

pub mod artifact;
pub mod cli;
pub mod commands;
pub mod config;
pub mod data;
pub mod server;

use thiserror::Error;

pub use cli::{Cli, Command, Overrides, ProtocolCommand};
pub use commands::run_pipeline;
pub use config::RunConfig;
pub use data::DataStore;

#[derive(Debug, Error)]
pub enum ShellError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error(transparent)]
    Validate(#[from] toponet::validate::ValidateError),
    #[error(transparent)]
    Network(#[from] toponet::network::NetworkError),
    #[error(transparent)]
    Ingest(#[from] toponet::ingest::IngestError),
    #[error(transparent)]
    Figure(#[from] toponet::figures::FigureError),
    #[error(transparent)]
    Render(#[from] toponet::render::RenderError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl ShellError {
    /// Errors caused by the request or the data rather than the service.
    pub fn is_client_error(&self) -> bool {
        use toponet::validate::ValidateError as V;
        match self {
            Self::Config(_) | Self::Data(_) | Self::NotFound(_) | Self::Ingest(_) => true,
            Self::Validate(e) => !matches!(e, V::Network(_) | V::Regress(_)),
            _ => false,
        }
    }
}
