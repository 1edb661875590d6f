//! Admission-level outcome prediction from multi-source EHR event streams.
//!
//! The pipeline: stream events from per-source tables, select a cohort of
//! single-stay admissions, window events to the first 24 hours in the ICU,
//! tokenize them per source, integer-encode against per-source vocabularies,
//! train an embedding-bag classifier (forward, exact backprop and Adam are
//! implemented here, no autodiff), and compare models with bootstrap
//! confidence intervals and paired permutation tests. A seeded synthetic
//! data generator with a known Bayes ceiling closes the loop end to end.
//!
//! This crate is `no_std` + `alloc`; file IO, the CLI and all on-disk
//! formats live in the companion `tokenbag-cli` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod dataset;
pub mod metrics;
pub mod nncore;
pub mod schema;
pub mod synthgen;
pub mod tokenizer;
pub mod trainer;
pub mod vocab;

pub use schema::SourceKind;
