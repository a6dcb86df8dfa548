use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSeed {
    pub cell: usize,
    pub key: String,
    /// Decimal; TOML integers stop at `i64::MAX`.
    pub seed: String,
    pub subset_seed: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checksum {
    pub file: String,
    pub sha256: String,
}

/// Provenance of one output directory: enough to re-run it exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: Vec<String>,
    pub started: String,
    pub finished: String,
    pub pointer_width: u32,
    pub exit_status: String,
    /// Resolved sweep config as TOML.
    pub config: String,
    pub seeds: Vec<CellSeed>,
    pub dataset_checksums: Vec<Checksum>,
}

impl RunManifest {
    pub fn new(command: Vec<String>) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command,
            started: now(),
            finished: String::new(),
            pointer_width: usize::BITS,
            exit_status: String::new(),
            config: String::new(),
            seeds: Vec::new(),
            dataset_checksums: Vec::new(),
        }
    }

    pub fn record_plan(&mut self, plan: &super::SweepPlan) {
        self.config = plan.config.to_toml();
        self.seeds = plan
            .cells
            .iter()
            .map(|c| CellSeed {
                cell: c.index,
                key: c.key.to_string(),
                seed: c.seed.to_string(),
                subset_seed: c.subset_seed.to_string(),
            })
            .collect();
    }

    pub fn record_checksums(&mut self, checksums: &[(String, String)]) {
        self.dataset_checksums = checksums
            .iter()
            .map(|(file, sha256)| Checksum {
                file: file.clone(),
                sha256: sha256.clone(),
            })
            .collect();
    }

    pub fn finish(&mut self, status: &str) {
        self.finished = now();
        self.exit_status = status.into();
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let text = toml::to_string(self).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(&path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339()
}
