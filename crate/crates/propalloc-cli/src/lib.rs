//! Library surface of the harness: scenario configs, runners, and report
//! emission. The `propalloc` binary is a thin argument parser over these.

pub mod config;
pub mod report;
pub mod scenario;
