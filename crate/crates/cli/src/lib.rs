//! Support code for the `emgm` command-line tool.

pub mod config;
pub mod plot;
