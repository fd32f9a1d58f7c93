//! Command-line front end for the `minmix` solver.

pub mod config;
pub mod run;
