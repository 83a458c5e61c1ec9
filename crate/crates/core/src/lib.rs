//! Core of the evidence-synthesis engine.
//!
//! Everything in this crate is pure computation over in-memory values and
//! builds without `std`: section-aware chunking, the three retrieval
//! structures and their fusion, provider contracts with deterministic stubs,
//! the multi-agent orchestration state machine, the schema library, and the
//! adjudication metrics. File formats, HTTP and the CLI live in the
//! `evidence-engine` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod domain;
pub mod eval;
pub mod ingest;
pub mod pipeline;
pub mod providers;
pub mod retrieval;
pub mod taxonomy;
pub mod text;

pub use domain::{Domain, MoleculeId, StudyStage};
