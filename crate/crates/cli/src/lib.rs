//! Pipeline orchestration and subcommand plumbing for the synthesis CLI.

pub mod commands;
pub mod config;
pub mod pipeline;
