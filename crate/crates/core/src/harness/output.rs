//! CSV emission with a provenance comment line, and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::ExperimentError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// SHA-256 over `blob <len>\0<content>`, the git object hashing scheme.
pub fn git_blob_sha256(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

/// Identifies a run in every output header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub experiment: String,
    pub seed: u64,
    pub config_hash: String,
}

/// Write `rows` under `header` to `path`, preceded by a `#` provenance line.
pub fn write_csv(
    path: &Path,
    prov: &Provenance,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<(), ExperimentError> {
    let mut buf = Vec::new();
    writeln!(buf, "# experiment={} seed={} config_sha256={}", prov.experiment, prov.seed, prov.config_hash)?;
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
    }
    fs::write(path, buf)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestFile {
    pub path: String,
    pub experiment: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub seed: u64,
    pub config_sha256: String,
    pub experiments: Vec<String>,
    pub failed: Vec<String>,
    pub files: Vec<ManifestFile>,
}

impl Manifest {
    pub fn new(seed: u64, config_sha256: String) -> Self {
        Manifest { seed, config_sha256, experiments: Vec::new(), failed: Vec::new(), files: Vec::new() }
    }

    pub fn record(&mut self, out_dir: &Path, experiment: &str, files: &[PathBuf]) -> Result<(), ExperimentError> {
        self.experiments.push(experiment.to_string());
        for f in files {
            let bytes = fs::read(f)?;
            let rel = f.strip_prefix(out_dir).unwrap_or(f).display().to_string();
            self.files.push(ManifestFile { path: rel, experiment: experiment.to_string(), sha256: git_blob_sha256(&bytes) });
        }
        Ok(())
    }

    pub fn write(&self, out_dir: &Path) -> Result<PathBuf, ExperimentError> {
        let path = out_dir.join("manifest.toml");
        let text = toml::to_string(self).map_err(|e| ExperimentError::Failed { id: "manifest".into(), msg: e.to_string() })?;
        fs::write(&path, text)?;
        Ok(path)
    }
}

/// Compact, round-trippable float formatting.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}
