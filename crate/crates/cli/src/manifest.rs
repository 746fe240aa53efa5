use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CliResult;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Record of one CLI run, written next to its outputs.
///
/// `args` is the argument list the run was invoked with (without the program
/// name); running the same tool version with those arguments reproduces every
/// output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub args: Vec<String>,
    pub inputs: Vec<String>,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
    pub seed: u64,
    /// Every resolved setting, defaults included.
    pub config: serde_json::Value,
    pub duration_seconds: f64,
    /// Command-specific result, e.g. the full parameter map.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<serde_json::Value>,
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(dir.join(MANIFEST_FILE), text + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    /// `args` with the value of `--out` replaced.
    pub fn args_with_out(&self, out: &Path) -> Vec<String> {
        let mut args = self.args.clone();
        let out = out.display().to_string();
        let mut i = 0;
        while i < args.len() {
            if args[i] == "--out" && i + 1 < args.len() {
                args[i + 1] = out.clone();
                i += 1;
            } else if args[i].starts_with("--out=") {
                args[i] = format!("--out={out}");
            }
            i += 1;
        }
        args
    }
}
