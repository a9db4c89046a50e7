//! Command-line experiments, reproducibility manifests and the acceptance suite.

pub mod acceptance;
pub mod commands;
pub mod config;
pub mod context;
pub mod emit;
pub mod error;
pub mod records;
pub mod manifest;
