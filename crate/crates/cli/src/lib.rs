//! Configuration, single runs and parameter-sweep campaigns on top of
//! `dtrp-core`, with CSV and JSON output.

pub mod campaign;
pub mod config;
pub mod output;
pub mod runner;
