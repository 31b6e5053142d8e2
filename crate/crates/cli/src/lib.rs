//! Library side of the `ludict` command: corpus manifests, synthetic
//! corpora, reports and the drivers behind each subcommand.

pub mod bench;
pub mod commands;
pub mod confusion;
pub mod error;
pub mod manifest;
pub mod pipeline;
pub mod synth;

pub use ludict_core as core;
