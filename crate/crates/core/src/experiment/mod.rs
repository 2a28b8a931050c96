//! Config-driven experiments that write plot-ready CSV/JSON files plus a hashed manifest.

mod config;
mod estimation;
mod priors;
mod transient;
pub mod verify;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::write_bytes;

pub use config::{
    default_front_filter, default_short_filter, default_systems, EstimationConfig,
    ExperimentConfig, OrderConfig, PreHistory, TransientConfig, TransientInput,
    CONFIG_SCHEMA_VERSION,
};
pub use estimation::{run_estimation_experiment, true_gfrf_on_grid, EstimationSummary};
pub use priors::{export_priors, PriorSummary};
pub use transient::{run_transient_experiment, IdentityCheck, TransientSummary};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Run record: configuration, seed, crate version and a content hash per output file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    pub command: String,
    pub crate_version: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub files: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(
            dir.join(MANIFEST_FILE),
        )?)?)
    }

    /// Re-hash every listed file and compare.
    pub fn verify_files(&self, dir: &Path) -> Result<()> {
        for e in &self.files {
            let bytes = fs::read(dir.join(&e.path))?;
            if hex::encode(Sha256::digest(&bytes)) != e.sha256 {
                return Err(Error::Internal(format!(
                    "{} does not match its hash",
                    e.path
                )));
            }
        }
        Ok(())
    }
}

/// Collects output files and their hashes for one run.
pub(crate) struct RunOutput {
    dir: PathBuf,
    files: Vec<ManifestEntry>,
}

impl RunOutput {
    pub(crate) fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub(crate) fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_bytes(&self.dir.join(name), bytes)?;
        self.files.push(ManifestEntry {
            path: name.to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
            bytes: bytes.len(),
        });
        Ok(())
    }

    pub(crate) fn write_with(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut Vec<u8>) -> Result<()>,
    ) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }

    pub(crate) fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    pub(crate) fn finish(
        mut self,
        command: &str,
        config: &ExperimentConfig,
    ) -> Result<Vec<String>> {
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest {
            schema_version: CONFIG_SCHEMA_VERSION,
            command: command.to_string(),
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.signal.seed,
            config: config.clone(),
            files: self.files.clone(),
        };
        let mut s = serde_json::to_string_pretty(&manifest)?;
        s.push('\n');
        write_bytes(&self.dir.join(MANIFEST_FILE), s.as_bytes())?;
        let mut names: Vec<String> = self.files.into_iter().map(|e| e.path).collect();
        names.push(MANIFEST_FILE.to_string());
        Ok(names)
    }
}
