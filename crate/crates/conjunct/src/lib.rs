//! Files, checkpoints and the command line around `conjunct-core`.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod formats;
pub mod synth;
pub mod workflow;

pub use conjunct_core as core;
