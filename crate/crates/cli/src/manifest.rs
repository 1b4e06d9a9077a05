use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTiming {
    pub phase: String,
    pub seconds: f64,
}

/// Everything needed to rerun a command and check its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub params: Map<String, Value>,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    pub timings: Vec<PhaseTiming>,
}

impl RunManifest {
    pub(crate) fn new(subcommand: &str) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            params: Map::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings: Vec::new(),
        }
    }

    pub(crate) fn param(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        let value = serde_json::to_value(value).expect("parameters serialize");
        self.params.insert(key.to_string(), value);
        self
    }

    pub(crate) fn timed<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.push(PhaseTiming {
            phase: phase.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }

    /// Writes `contents` to `dir/name` and lists it as an output.
    pub(crate) fn write(&mut self, dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(CliError::io(&path))?;
        self.outputs.push(path.display().to_string());
        Ok(path)
    }

    pub(crate) fn write_json(&mut self, dir: &Path, name: &str, value: &impl Serialize) -> CliResult<PathBuf> {
        let text = serde_json::to_string_pretty(value).expect("outputs serialize");
        self.write(dir, name, &text)
    }

    /// Writes the manifest itself as `dir/<stem>.manifest.json`.
    pub(crate) fn finish(self, dir: &Path, stem: &str) -> CliResult<PathBuf> {
        let path = dir.join(format!("{stem}.manifest.json"));
        let text = serde_json::to_string_pretty(&self).expect("manifest serializes");
        std::fs::write(&path, text).map_err(CliError::io(&path))?;
        Ok(path)
    }
}
