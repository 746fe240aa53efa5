//! Command-line front end for `ggrician`: `synth`, `fit`, `compare` and `map`.
//!
//! Each command writes its outputs and a `manifest.json` into `--out`.

pub mod args;
pub mod commands;
pub mod error;
pub mod manifest;

pub use args::Cli;
pub use commands::run;
pub use error::{CliError, CliResult};
pub use manifest::{RunManifest, MANIFEST_FILE};
