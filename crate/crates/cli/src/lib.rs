//! Command-line and HTTP front ends for the `cldmap` texture analysis
//! library.

pub mod artifacts;
pub mod commands;
pub mod service;
