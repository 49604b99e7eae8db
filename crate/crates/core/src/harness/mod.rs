//! Configuration, feature ingestion, experiment drivers and report output.

pub mod cli;
pub mod config;
pub mod data;
pub mod experiments;
pub mod report;
