//! Config digests and run manifests.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, SknaError};
use crate::fsio::write_atomic;

/// SHA-256 over the canonical JSON form of `value` (object keys sorted,
/// shortest round-trip float text). Any parameter change changes the digest.
pub fn digest<T: Serialize + ?Sized>(value: &T) -> String {
    let canonical = serde_json::to_value(value)
        .and_then(|v| serde_json::to_string(&v))
        .expect("config types serialize to JSON");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

pub fn digest_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: PathBuf,
    pub sha256: String,
}

/// What a command read, how it was configured, and what it wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub inputs: Vec<PathBuf>,
    pub output_dir: PathBuf,
    pub config: serde_json::Value,
    pub config_digest: String,
    pub outputs: Vec<OutputFile>,
    /// Assumptions the run relied on that the inputs did not pin down.
    pub assumptions: Vec<String>,
}

impl RunManifest {
    pub fn new<C: Serialize>(
        command: &str,
        inputs: Vec<PathBuf>,
        output_dir: &Path,
        config: &C,
    ) -> Self {
        let config = serde_json::to_value(config).expect("config types serialize to JSON");
        Self {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs,
            output_dir: output_dir.to_path_buf(),
            config_digest: digest(&config),
            config,
            outputs: Vec::new(),
            assumptions: Vec::new(),
        }
    }

    /// Records an output written under the output directory.
    pub fn add_output(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).map_err(|e| SknaError::io(path, e))?;
        let rel = path
            .strip_prefix(&self.output_dir)
            .unwrap_or(path)
            .to_path_buf();
        self.outputs.push(OutputFile {
            path: rel,
            sha256: digest_bytes(&bytes),
        });
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, |w| {
            serde_json::to_writer_pretty(&mut *w, self)?;
            writeln!(w)
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::fsio::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| SknaError::format(format!("{}: {e}", path.display())))
    }
}
