//! Library half of the `lune` binary, exposed so tests can drive runs
//! in-process.

pub mod config;
pub mod report;
pub mod run;
