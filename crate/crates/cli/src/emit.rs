//! Per-run output directory handling: every file a subcommand writes is
//! recorded (name + SHA-256) and summarized in a `manifest.json` that also
//! embeds the fully-resolved scenario. Manifests carry no timestamps, so a
//! repeated run with the same inputs produces a byte-identical manifest.

use std::fs;
use std::path::{Path, PathBuf};

use beamrx::scenario::Scenario;
use beamrx::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
struct OutputEntry {
    file: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'static str,
    command: &'a str,
    seed: u64,
    scenario_sha256: String,
    scenario: &'a Scenario,
    outputs: &'a [OutputEntry],
}

pub struct Out {
    dir: PathBuf,
    entries: Vec<OutputEntry>,
}

impl Out {
    pub fn new(dir: &Path) -> Result<Out> {
        fs::create_dir_all(dir)?;
        Ok(Out { dir: dir.to_path_buf(), entries: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.path(name), bytes)?;
        self.entries
            .push(OutputEntry { file: name.to_string(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    /// Records a file some other writer already produced in the directory.
    pub fn record(&mut self, name: &str) -> Result<()> {
        let bytes = fs::read(self.path(name))?;
        self.entries
            .push(OutputEntry { file: name.to_string(), sha256: sha256_hex(&bytes) });
        Ok(())
    }

    /// Writes `manifest.json` and returns its path. The scenario hash covers
    /// the resolved scenario exactly as embedded.
    pub fn finish(self, command: &str, scenario: &Scenario) -> Result<PathBuf> {
        let scenario_text = serde_json::to_string(scenario)
            .map_err(|e| Error::Config(format!("scenario encode: {e}")))?;
        let manifest = Manifest {
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed: scenario.seed,
            scenario_sha256: sha256_hex(scenario_text.as_bytes()),
            scenario,
            outputs: &self.entries,
        };
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::Config(format!("manifest encode: {e}")))?;
        let path = self.dir.join("manifest.json");
        fs::write(&path, text)?;
        Ok(path)
    }
}
