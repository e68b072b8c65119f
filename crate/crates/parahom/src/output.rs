//! Output directory: CSV, JSON and SVG files plus a manifest.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{AppError, AppResult};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let d = Sha256::digest(bytes);
    d.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestEntry {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_sha256: String,
    pub seeds: Vec<u64>,
    pub outputs: Vec<ManifestEntry>,
}

/// Writes files into one directory and records their hashes.
pub struct OutputDir {
    root: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl OutputDir {
    pub fn create(root: &Path) -> AppResult<Self> {
        std::fs::create_dir_all(root).map_err(|e| AppError::io(root, e))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            entries: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> AppResult<()> {
        let p = self.root.join(name);
        std::fs::write(&p, bytes).map_err(|e| AppError::io(&p, e))?;
        self.entries.retain(|e| e.file != name);
        self.entries.push(ManifestEntry {
            file: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn write_csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> AppResult<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| AppError::io(self.root.join(name), e.into_error()))?;
        self.write_bytes(name, &bytes)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> AppResult<()> {
        let mut s = serde_json::to_string_pretty(value).expect("report values serialize");
        s.push('\n');
        self.write_bytes(name, s.as_bytes())
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> AppResult<()> {
        self.write_bytes(name, text.as_bytes())
    }

    /// Writes `manifest.json` last.
    pub fn finish(mut self, command: &str, config_bytes: &[u8], seeds: &[u64]) -> AppResult<PathBuf> {
        let manifest = Manifest {
            tool: "parahom",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config_sha256: sha256_hex(config_bytes),
            seeds: seeds.to_vec(),
            outputs: std::mem::take(&mut self.entries),
        };
        let mut s = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        s.push('\n');
        let p = self.root.join("manifest.json");
        std::fs::write(&p, s).map_err(|e| AppError::io(&p, e))?;
        Ok(p)
    }
}
