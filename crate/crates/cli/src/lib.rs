//! Experiment driver: expert training, imitation runs, ablations, analyses
//! and reports over a flat key=value configuration.

pub mod commands;
pub mod config;
pub mod plot;
