//! File formats, streaming ingestion and the `tokenbag` command-line tool.
//!
//! Stages hand off through files: CSV tables in, a JSONL token corpus, a
//! JSON split file, binary-exact model checkpoints, and JSON evaluation
//! reports out. Every invocation drops a run manifest with content digests
//! beside its outputs so each stage is re-runnable and auditable.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod formats;
pub mod ingest;
pub mod manifest;

pub use commands::{run_from_args, Cli};
