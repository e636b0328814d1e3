//! Experiment runner for billiard OTOC studies.

pub mod cache;
pub mod commands;
pub mod config;
pub mod output;
pub mod pipeline;
pub mod presets;
pub mod validate;
