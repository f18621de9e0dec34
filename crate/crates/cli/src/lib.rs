//! Scenario-file handling, report rendering, and subcommand flows behind the
//! `evodyn` binary. Exposed as a library so integration tests can drive the
//! same code paths the binary does.

pub mod commands;
pub mod config;
pub mod plot;
pub mod report;
