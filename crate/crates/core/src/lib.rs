//! Document-level event argument extraction by template generation, with a
//! per-document event memory, memory retrieval and constraint-aware decoding.

pub mod constraints;
pub mod constrained_decoding;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod exec;
pub mod generation;
pub mod jsonl;
pub mod memory;
pub mod ontology;
pub mod retrieval;
pub mod template;

pub use error::{Error, Result};
pub use exec::Execution;
