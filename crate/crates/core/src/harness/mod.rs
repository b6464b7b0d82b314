//! Experiment driver: configuration, grid, per-experiment runners and the
//! output bundle.

pub mod experiments;
pub mod grid;
pub mod output;
pub mod settings;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{ConfigError, ExperimentError};
use crate::scenario::Scenario;

pub use grid::{generate_grid, GridSpec};
pub use output::{Manifest, Provenance};
pub use settings::ExperimentSettings;

/// A parsed configuration file: scenario, experiment settings and the hash of its text.
#[derive(Debug, Clone)]
pub struct Config {
    pub scenario: Scenario,
    pub settings: ExperimentSettings,
    pub hash: String,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        Ok(Config {
            scenario: Scenario::from_toml_str(text)?,
            settings: ExperimentSettings::from_toml_str(text)?,
            hash: output::sha256_hex(text.as_bytes()),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|e| ConfigError::Io { path: path.display().to_string(), source: e })?;
        Config::from_toml_str(&text)
    }

    /// The bundled default configuration.
    pub fn bundled() -> Self {
        Config::from_toml_str(Scenario::table1_source()).expect("bundled config is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentId {
    SuccessProb,
    LocalizationPdf,
    CrlbCdf,
    GroupingMap,
    SumRateCdf,
    FovOpt,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 6] = [
        ExperimentId::SuccessProb,
        ExperimentId::LocalizationPdf,
        ExperimentId::CrlbCdf,
        ExperimentId::GroupingMap,
        ExperimentId::SumRateCdf,
        ExperimentId::FovOpt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::SuccessProb => "success_prob",
            ExperimentId::LocalizationPdf => "localization_pdf",
            ExperimentId::CrlbCdf => "crlb_cdf",
            ExperimentId::GroupingMap => "grouping_map",
            ExperimentId::SumRateCdf => "sum_rate_cdf",
            ExperimentId::FovOpt => "fov_opt",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ExperimentId::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| ExperimentError::UnknownExperiment(s.to_string()))
    }
}

/// Run one experiment, writing its CSVs into `out_dir`; returns the files written.
pub fn run(id: ExperimentId, cfg: &Config, seed: u64, out_dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    fs::create_dir_all(out_dir)?;
    let prov = Provenance { experiment: id.name().to_string(), seed, config_hash: cfg.hash.clone() };
    match id {
        ExperimentId::SuccessProb => experiments::write_success_prob(cfg, &prov, out_dir),
        ExperimentId::LocalizationPdf => experiments::write_localization_pdf(cfg, &prov, out_dir),
        ExperimentId::CrlbCdf => experiments::write_crlb_cdf(cfg, &prov, out_dir),
        ExperimentId::GroupingMap => experiments::write_grouping_map(cfg, &prov, out_dir),
        ExperimentId::SumRateCdf => experiments::write_sum_rate_cdf(cfg, &prov, out_dir),
        ExperimentId::FovOpt => experiments::write_fov_opt(cfg, &prov, out_dir),
    }
}

/// Outcome of a full bundle run.
#[derive(Debug)]
pub struct BundleReport {
    pub manifest: Manifest,
    pub manifest_path: PathBuf,
    pub failures: Vec<(ExperimentId, ExperimentError)>,
}

/// Run every experiment; failures are collected per experiment and the
/// manifest is written regardless.
pub fn run_all(cfg: &Config, seed: u64, out_dir: &Path) -> Result<BundleReport, ExperimentError> {
    fs::create_dir_all(out_dir)?;
    let mut manifest = Manifest::new(seed, cfg.hash.clone());
    let mut failures = Vec::new();
    for id in ExperimentId::ALL {
        match run(id, cfg, seed, out_dir) {
            Ok(files) => manifest.record(out_dir, id.name(), &files)?,
            Err(e) => {
                manifest.failed.push(id.name().to_string());
                failures.push((id, e));
            }
        }
    }
    let manifest_path = manifest.write(out_dir)?;
    Ok(BundleReport { manifest, manifest_path, failures })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn experiment_names_round_trip() {
        for id in ExperimentId::ALL {
            assert_eq!(id.name().parse::<ExperimentId>().unwrap(), id);
        }
        assert!("bogus".parse::<ExperimentId>().is_err());
    }

    #[test]
    fn bundled_config_hash_is_stable() {
        assert_eq!(Config::bundled().hash, Config::bundled().hash);
        assert_eq!(Config::bundled().hash.len(), 64);
    }
}
