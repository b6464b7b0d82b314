//! Immutable room, access-point, receiver and system parameters.

use std::path::Path;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

pub type Point3 = Vector3<f64>;
pub type Point2 = Vector2<f64>;

/// Speed of light in vacuum (m/s).
pub const C: f64 = 299_792_458.0;

const TABLE1: &str = include_str!("../configs/table1.cfg");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Room {
    pub dimensions_m: [f64; 3],
    /// Height of the user receiver and of the reflecting cross-section (h').
    pub user_height_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Surfaces {
    pub target_mean: f64,
    pub target_sigma: f64,
    pub walls: f64,
    pub floor: f64,
    pub ceiling: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccessPoints {
    pub positions_m: Vec<[f64; 3]>,
    pub half_power_semi_angle_deg: f64,
    pub optical_power_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Receiver {
    pub pd_area_m2: f64,
    pub filter_gain: f64,
    pub concentrator_gain: f64,
    pub refractive_index: f64,
    pub responsivity_a_per_w: f64,
    pub fov_deg: f64,
    pub bandwidth_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectionFunction {
    /// `P_D = ½ erfc(x)`, spans [0, 1].
    Erfc,
    /// `P_D = ½ Q(x)` with the Gaussian tail Q, spans [0, ½].
    Q,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LidalNoise {
    pub thermal_w2: f64,
    pub shot_coeff_w: f64,
    pub ambient_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lidal {
    pub fov_deg: f64,
    pub pulse_power_w: f64,
    pub pulse_width_s: f64,
    pub time_slot_s: f64,
    pub bandwidth_hz: f64,
    pub time_bin_s: f64,
    pub footprint_diameter_m: f64,
    pub footprint_overlap_m: f64,
    pub resolution_m: f64,
    pub cross_section_m2: f64,
    pub bistatic_links: usize,
    pub snapshots: usize,
    /// Cost of missing a present user (γ_FP).
    pub cost_missed: f64,
    /// Cost of declaring an absent user present (γ_FA).
    pub cost_false_alarm: f64,
    pub detection_function: DetectionFunction,
    pub trace_start_s: f64,
    pub trace_bins: usize,
    pub noise: LidalNoise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrlbNoise {
    /// Per-footprint noise standard deviation on the received power (W).
    pub sigma_w: f64,
    /// Correlation coefficient between bistatic footprints.
    pub bistatic_correlation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Noma {
    pub generation_size: usize,
    pub coded_packets: usize,
    pub retransmissions: usize,
    /// ζ / B_w in bits/s/Hz.
    pub throughput_bps_per_hz: f64,
    pub mu: f64,
    pub noise_variance_a2: f64,
    pub imperfect_error_radius_m: f64,
    pub group_size: usize,
    pub max_intensity_w: f64,
    pub dc_bias_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub room: Room,
    pub surfaces: Surfaces,
    pub access_points: AccessPoints,
    pub receiver: Receiver,
    pub lidal: Lidal,
    pub crlb: CrlbNoise,
    pub noma: Noma,
}

/// Footprints that observe one target: a monostatic transceiver and the
/// transmitters whose bistatic echoes it receives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Footprints {
    pub mono: usize,
    pub bistatic: Vec<usize>,
}

impl Footprints {
    /// Monostatic index first, then bistatic ones.
    pub fn all(&self) -> Vec<usize> {
        std::iter::once(self.mono).chain(self.bistatic.iter().copied()).collect()
    }
}

impl Scenario {
    /// The bundled default configuration.
    pub fn table1() -> Scenario {
        Scenario::from_toml_str(TABLE1).expect("bundled config is valid")
    }

    pub fn table1_source() -> &'static str {
        TABLE1
    }

    pub fn from_toml_str(s: &str) -> Result<Scenario, ConfigError> {
        let scn: Scenario = toml::from_str(s)?;
        scn.validate()?;
        Ok(scn)
    }

    pub fn load(path: &Path) -> Result<Scenario, ConfigError> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), source: e })?;
        Scenario::from_toml_str(&s)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        let [x, y, z] = self.room.dimensions_m;
        if !(x > 0.0 && y > 0.0 && z > 0.0) {
            return bad("room dimensions must be positive");
        }
        if !(self.room.user_height_m > 0.0 && self.room.user_height_m < z) {
            return bad("user height must lie strictly between floor and ceiling");
        }
        let ap = &self.access_points;
        if ap.positions_m.len() < 3 {
            return bad("at least three access points are needed for localization");
        }
        if ap.positions_m.iter().any(|p| p[2] <= self.room.user_height_m) {
            return bad("access points must sit above the user plane");
        }
        if !(ap.half_power_semi_angle_deg > 0.0 && ap.half_power_semi_angle_deg < 90.0) {
            return bad("half-power semi-angle must lie in (0, 90) degrees");
        }
        let rx = &self.receiver;
        let l = &self.lidal;
        let positive = [
            ap.optical_power_w,
            rx.pd_area_m2,
            rx.filter_gain,
            rx.concentrator_gain,
            rx.responsivity_a_per_w,
            rx.bandwidth_hz,
            l.pulse_power_w,
            l.pulse_width_s,
            l.time_slot_s,
            l.bandwidth_hz,
            l.time_bin_s,
            l.footprint_diameter_m,
            l.resolution_m,
            l.cross_section_m2,
            l.cost_missed,
            l.cost_false_alarm,
            self.crlb.sigma_w,
            self.noma.throughput_bps_per_hz,
            self.noma.mu,
            self.noma.noise_variance_a2,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return bad("lengths, areas, powers, gains and bandwidths must be positive");
        }
        for fov in [rx.fov_deg, l.fov_deg] {
            if !(fov > 0.0 && fov <= 90.0) {
                return bad("fields of view must lie in (0, 90] degrees");
            }
        }
        let s = &self.surfaces;
        for r in [s.target_mean, s.walls, s.floor, s.ceiling] {
            if !(0.0..=1.0).contains(&r) {
                return bad("reflectivities must lie in [0, 1]");
            }
        }
        if s.target_sigma < 0.0 {
            return bad("reflectivity sigma must be nonnegative");
        }
        let n = &l.noise;
        if n.thermal_w2 < 0.0 || n.shot_coeff_w < 0.0 || n.ambient_w < 0.0 {
            return bad("noise parameters must be nonnegative");
        }
        if l.bistatic_links < 2 || l.bistatic_links >= ap.positions_m.len() {
            return bad("bistatic_links must be at least 2 and below the AP count");
        }
        if l.snapshots == 0 {
            return bad("snapshots must be at least 1");
        }
        let pulse_bins = (l.pulse_width_s / l.time_bin_s).round() as usize;
        if pulse_bins == 0 || pulse_bins >= l.trace_bins {
            return bad("pulse must span at least one bin and fit in the trace");
        }
        if !(-1.0..1.0).contains(&self.crlb.bistatic_correlation) {
            return bad("bistatic correlation must lie in (-1, 1)");
        }
        let nm = &self.noma;
        if nm.generation_size == 0 || nm.coded_packets < nm.generation_size {
            return bad("need 1 <= generation_size <= coded_packets");
        }
        if nm.retransmissions == 0 || nm.group_size == 0 {
            return bad("retransmissions and group_size must be at least 1");
        }
        if nm.imperfect_error_radius_m < 0.0 {
            return bad("imperfect error radius must be nonnegative");
        }
        if !(nm.dc_bias_w > 0.0 && nm.max_intensity_w > nm.dc_bias_w) {
            return bad("need 0 < dc_bias < max_intensity");
        }
        Ok(())
    }

    pub fn ap_count(&self) -> usize {
        self.access_points.positions_m.len()
    }

    pub fn ap(&self, k: usize) -> Point3 {
        Point3::from(self.access_points.positions_m[k])
    }

    /// Projection of AP `k` on the floor plane.
    pub fn ap_xy(&self, k: usize) -> Point2 {
        let p = self.access_points.positions_m[k];
        Point2::new(p[0], p[1])
    }

    /// A point on the user plane.
    pub fn user_point(&self, xy: Point2) -> Point3 {
        Point3::new(xy.x, xy.y, self.room.user_height_m)
    }

    /// Vertical distance between the APs and the user plane (η).
    ///
    /// Uses the first AP; all configured APs are expected to share a height.
    pub fn eta(&self) -> f64 {
        self.access_points.positions_m[0][2] - self.room.user_height_m
    }

    pub fn footprint_radius(&self) -> f64 {
        self.lidal.footprint_diameter_m / 2.0
    }

    pub fn pulse_bins(&self) -> usize {
        (self.lidal.pulse_width_s / self.lidal.time_bin_s).round() as usize
    }

    pub fn in_room(&self, xy: Point2) -> bool {
        let [x, y, _] = self.room.dimensions_m;
        (0.0..=x).contains(&xy.x) && (0.0..=y).contains(&xy.y)
    }

    /// All APs with their planar distance to `xy`, nearest first, ties by index.
    pub fn aps_by_distance(&self, xy: Point2) -> Vec<(usize, f64)> {
        let mut v: Vec<(usize, f64)> =
            (0..self.ap_count()).map(|k| (k, (self.ap_xy(k) - xy).norm())).collect();
        v.sort_by(|a, b| {
            if (a.1 - b.1).abs() <= 1e-12 {
                a.0.cmp(&b.0)
            } else {
                a.1.total_cmp(&b.1)
            }
        });
        v
    }

    /// Monostatic footprint is the nearest AP; the bistatic transmitters are
    /// the next `bistatic_links` nearest APs.
    pub fn footprints(&self, xy: Point2) -> Footprints {
        self.footprints_with_mono(xy, self.aps_by_distance(xy)[0].0)
    }

    /// As [`Scenario::footprints`] but with a chosen monostatic AP.
    pub fn footprints_with_mono(&self, xy: Point2, mono: usize) -> Footprints {
        let bistatic = self
            .aps_by_distance(xy)
            .into_iter()
            .map(|(k, _)| k)
            .filter(|&k| k != mono)
            .take(self.lidal.bistatic_links)
            .collect();
        Footprints { mono, bistatic }
    }

    pub fn with_lidal_fov(&self, fov_deg: f64) -> Scenario {
        let mut s = self.clone();
        s.lidal.fov_deg = fov_deg;
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_config_matches_table() {
        let s = Scenario::table1();
        assert_eq!(s.room.dimensions_m, [4.0, 8.0, 3.0]);
        assert_eq!(s.ap_count(), 8);
        assert_eq!(s.access_points.half_power_semi_angle_deg, 75.0);
        assert_eq!(s.access_points.optical_power_w, 18.0);
        assert_eq!(s.receiver.pd_area_m2, 20e-6);
        assert_eq!(s.receiver.concentrator_gain, 3.77);
        assert_eq!(s.receiver.responsivity_a_per_w, 0.4);
        assert_eq!(s.receiver.fov_deg, 40.0);
        assert_eq!(s.lidal.fov_deg, 54.0);
        assert_eq!(s.lidal.time_bin_s, 1e-11);
        assert_eq!(s.pulse_bins(), 200);
        assert!((s.eta() - 2.2).abs() < 1e-12);
        assert_eq!(s.noma.generation_size, 3);
    }

    #[test]
    fn rejects_bad_semi_angle() {
        let src = Scenario::table1_source().replace("half_power_semi_angle_deg = 75.0", "half_power_semi_angle_deg = 90.0");
        assert!(matches!(Scenario::from_toml_str(&src), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn rejects_unknown_keys() {
        let src = Scenario::table1_source().replace("[room]", "[room]\nbogus = 1");
        assert!(matches!(Scenario::from_toml_str(&src), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn center_tie_breaks_by_index() {
        let s = Scenario::table1();
        let order = s.aps_by_distance(Point2::new(2.0, 4.0));
        let first: Vec<usize> = order.iter().take(4).map(|x| x.0).collect();
        assert_eq!(first, vec![1, 2, 5, 6]);
    }

    #[test]
    fn footprints_exclude_mono() {
        let s = Scenario::table1();
        let f = s.footprints(Point2::new(1.2, 1.1));
        assert_eq!(f.mono, 0);
        assert_eq!(f.bistatic.len(), 3);
        assert!(!f.bistatic.contains(&0));
    }
}
