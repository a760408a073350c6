//! Configuration, scenario orchestration, sweeps and report writers.

pub mod config;
pub mod report;
pub mod scenario;
pub mod sweep;
pub mod units;
