//! Benchmark harness, artifact layout and training workflows behind the
//! `aeos` command-line tool.

pub mod config;
pub mod files;
pub mod harness;
pub mod pipeline;
pub mod report;
