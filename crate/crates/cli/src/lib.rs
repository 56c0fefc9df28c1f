//! Command-line front end: configuration, output formats and the
//! subcommands of the `relcrawl` binary.

pub mod commands;
pub mod config;
pub mod output;

use relcrawl::CrawlError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Crawl(#[from] CrawlError),
}

impl CliError {
    /// Process exit status: 2 for bad inputs, 3 for numerical failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Crawl(e) if e.is_domain_error() || matches!(e, CrawlError::ContinuationFailed(_)) => 2,
            CliError::Crawl(_) => 3,
        }
    }
}
