//! Companion to `pvqmle-core`: CSV and JSON formats, the parallel Monte
//! Carlo harness, the application pipeline and the `pvqmle` command line.

pub mod application;
pub mod experiments;
pub mod io;

pub use pvqmle_core;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] pvqmle_core::Error),
    #[error(transparent)]
    Data(#[from] io::DataError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
