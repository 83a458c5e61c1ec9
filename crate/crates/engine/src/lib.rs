//! Storage, remote providers, HTTP service and CLI around `evidence-core`.

pub mod adjudications;
pub mod cli;
pub mod config;
pub mod engine;
pub mod error;
pub mod fixtures;
pub mod jsonl;
pub mod remote;
pub mod report;
pub mod runs;
pub mod scripts;
pub mod service;
pub mod snapshot;
pub mod store;

pub use error::{EngineError, Result};
