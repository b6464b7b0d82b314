use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::scenario::{Point2, Scenario};

/// Uniform grid on the user plane, centred in the room.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub spacing_m: f64,
    /// Minimum clearance to every wall.
    pub margin_m: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { spacing_m: 0.3, margin_m: 0.05 }
    }
}

fn axis(len: f64, spacing: f64, margin: f64) -> Vec<f64> {
    let usable = len - 2.0 * margin;
    if usable < 0.0 {
        return Vec::new();
    }
    let n = (usable / spacing + 1e-9).floor() as usize + 1;
    let offset = (len - (n - 1) as f64 * spacing) / 2.0;
    // snap to 1 nm so printed coordinates stay clean
    (0..n).map(|i| ((offset + i as f64 * spacing) * 1e9).round() / 1e9).collect()
}

/// Grid points in row-major order (x fastest); the index is the location id.
pub fn generate_grid(scn: &Scenario, spec: &GridSpec) -> Result<Vec<Point2>, ConfigError> {
    if spec.spacing_m + 1e-12 < scn.lidal.resolution_m {
        return Err(ConfigError::Invalid(format!(
            "grid spacing {} m is below the {} m localization resolution",
            spec.spacing_m, scn.lidal.resolution_m
        )));
    }
    if spec.margin_m < 0.0 {
        return Err(ConfigError::Invalid("grid margin must be nonnegative".into()));
    }
    let [w, h, _] = scn.room.dimensions_m;
    let xs = axis(w, spec.spacing_m, spec.margin_m);
    let ys = axis(h, spec.spacing_m, spec.margin_m);
    Ok(ys.iter().flat_map(|&y| xs.iter().map(move |&x| Point2::new(x, y))).collect())
}
