use serde::Deserialize;

use super::grid::GridSpec;
use crate::error::ConfigError;

/// Sweep ranges and trial counts, read from the `[experiments]` table.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSettings {
    /// α sweep over (alpha_min, alpha_max].
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub alpha_step: f64,
    pub success_mc_trials: usize,
    pub crlb_trials: usize,
    pub localization_trials: usize,
    pub fov_candidates_deg: Vec<f64>,
    pub pdf_bins: usize,
    /// Users per group in the success-probability sweep.
    pub success_group_size: usize,
    pub grid: GridSpec,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        ExperimentSettings {
            alpha_min: 0.25,
            alpha_max: 0.97,
            alpha_step: 0.01,
            success_mc_trials: 20_000,
            crlb_trials: 200,
            localization_trials: 50,
            fov_candidates_deg: vec![20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0, 54.0, 55.0, 60.0, 65.0, 70.0],
            pdf_bins: 14,
            success_group_size: 4,
            grid: GridSpec::default(),
        }
    }
}

#[derive(Deserialize)]
struct Doc {
    #[serde(default)]
    experiments: ExperimentSettings,
}

impl ExperimentSettings {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        let doc: Doc = toml::from_str(s)?;
        doc.experiments.validate()?;
        Ok(doc.experiments)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(format!("experiments: {m}")));
        if !(self.alpha_min > 0.0 && self.alpha_min < self.alpha_max && self.alpha_max < 1.0) {
            return bad("alpha range must satisfy 0 < alpha_min < alpha_max < 1");
        }
        if !(self.alpha_step > 0.0) {
            return bad("alpha_step must be positive");
        }
        if self.success_mc_trials == 0 || self.crlb_trials == 0 || self.localization_trials == 0 {
            return bad("trial counts must be at least 1");
        }
        if self.fov_candidates_deg.is_empty() {
            return bad("empty FOV candidate list");
        }
        if self.fov_candidates_deg.iter().any(|f| !(*f > 0.0 && *f < 90.0)) {
            return bad("FOV candidates must lie in (0, 90) degrees");
        }
        if self.pdf_bins == 0 {
            return bad("pdf_bins must be at least 1");
        }
        if self.success_group_size == 0 {
            return bad("success_group_size must be at least 1");
        }
        Ok(())
    }

    /// α values of the sweep, (alpha_min, alpha_max] on the step lattice.
    pub fn alphas(&self) -> Vec<f64> {
        let n = ((self.alpha_max - self.alpha_min) / self.alpha_step + 1e-9).floor() as usize;
        (1..=n).map(|k| ((self.alpha_min + k as f64 * self.alpha_step) * 1e9).round() / 1e9).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_sweep_lattice() {
        let a = ExperimentSettings::default().alphas();
        assert_eq!(a.len(), 72);
        assert_eq!(a[0], 0.26);
        assert_eq!(*a.last().unwrap(), 0.97);
    }

    #[test]
    fn bundled_config_matches_defaults() {
        let s = ExperimentSettings::from_toml_str(crate::scenario::Scenario::table1_source()).unwrap();
        assert_eq!(s, ExperimentSettings::default());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ExperimentSettings::from_toml_str("[experiments]\ncrlb_trials = 0\n").is_err());
        assert!(ExperimentSettings::from_toml_str("[experiments]\nfov_candidates_deg = []\n").is_err());
        assert!(ExperimentSettings::from_toml_str("[experiments]\nbogus = 1\n").is_err());
    }
}
