//! Lambertian LOS channel, reflected-pulse powers and receiver noise.
//!
//! All transmitters and receivers point straight down from the ceiling and all
//! user-side surfaces (communication PD, reflecting cross-section) face
//! straight up, so every cosine is a height difference over a range.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::OpticsError;
use crate::scenario::{Point3, Scenario};

/// Lambertian emission order from the half-power semi-angle.
pub fn lambertian_order(phi_half_deg: f64) -> Result<f64, OpticsError> {
    if !(phi_half_deg > 0.0 && phi_half_deg < 90.0) {
        return Err(OpticsError::SemiAngleOutOfRange(phi_half_deg));
    }
    Ok(-std::f64::consts::LN_2 / phi_half_deg.to_radians().cos().ln())
}

impl Scenario {
    /// Lambertian order of the APs.
    pub fn m(&self) -> f64 {
        lambertian_order(self.access_points.half_power_semi_angle_deg).expect("validated scenario")
    }
}

/// Geometry of a down-facing emitter above an up-facing surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelGeometry {
    /// Irradiance angle at the emitter (rad).
    pub phi: f64,
    /// Incidence angle at the receiving surface (rad).
    pub psi: f64,
    /// Line-of-sight distance Λ (m).
    pub los: f64,
    /// Height difference η (m).
    pub eta: f64,
    /// Planar distance l (m).
    pub planar: f64,
}

impl ChannelGeometry {
    /// `None` when `low` is not strictly below `high`.
    pub fn between(high: Point3, low: Point3) -> Option<ChannelGeometry> {
        let eta = high.z - low.z;
        if eta <= 0.0 {
            return None;
        }
        let planar = ((high.x - low.x).powi(2) + (high.y - low.y).powi(2)).sqrt();
        let los = (planar * planar + eta * eta).sqrt();
        let ang = (eta / los).clamp(-1.0, 1.0).acos();
        Some(ChannelGeometry { phi: ang, psi: ang, los, eta, planar })
    }

    pub fn cos(&self) -> f64 {
        self.eta / self.los
    }
}

/// (m+1)A_PD/(2π)·T_f·g_c, the constant in front of the LOS gain.
pub fn delta_c(scn: &Scenario) -> f64 {
    let rx = &scn.receiver;
    (scn.m() + 1.0) * rx.pd_area_m2 / (2.0 * PI) * rx.filter_gain * rx.concentrator_gain
}

/// P_t(m+1)A_PD/(2π²)·d_A·ρ·T_f·g_c, the constant in front of both reflection powers.
pub fn delta_l(scn: &Scenario, rho: f64) -> f64 {
    let rx = &scn.receiver;
    scn.lidal.pulse_power_w * (scn.m() + 1.0) * rx.pd_area_m2 / (2.0 * PI * PI)
        * scn.lidal.cross_section_m2
        * rho
        * rx.filter_gain
        * rx.concentrator_gain
}

/// DC gain of the LOS link from `ap` to a user PD, zero outside the user FOV.
pub fn los_channel_gain(scn: &Scenario, ap: Point3, user: Point3) -> f64 {
    let Some(g) = ChannelGeometry::between(ap, user) else {
        return 0.0;
    };
    if g.psi > scn.receiver.fov_deg.to_radians() {
        return 0.0;
    }
    let m = scn.m();
    let rx = &scn.receiver;
    (m + 1.0) * rx.pd_area_m2 / (2.0 * PI * g.los * g.los)
        * g.phi.cos().powf(m)
        * g.psi.cos()
        * rx.filter_gain
        * rx.concentrator_gain
}

fn inside_lidal_fov(scn: &Scenario, psi: f64) -> bool {
    psi <= scn.lidal.fov_deg.to_radians()
}

/// Echo power collected at `rx` from a pulse sent by `tx` and reflected by the
/// target cross-section at `target`.
pub fn bistatic_reflection_power(scn: &Scenario, tx: Point3, target: Point3, rx: Point3, rho: f64) -> f64 {
    let (Some(out), Some(back)) = (ChannelGeometry::between(tx, target), ChannelGeometry::between(rx, target))
    else {
        return 0.0;
    };
    // ψ: incidence at the receiver
    if !inside_lidal_fov(scn, back.psi) {
        return 0.0;
    }
    let m = scn.m();
    let (r1, r2) = (out.los, back.los);
    let cos_theta = out.cos(); // irradiance at tx
    let cos_phi = out.cos(); // incidence on the target
    let cos_phi1 = back.cos(); // irradiance from the target
    let cos_psi = back.cos();
    delta_l(scn, rho) / (r1 * r1 * r2 * r2) * cos_theta.powf(m) * cos_psi * cos_phi * cos_phi1
}

/// Echo power at a collocated transmitter/receiver.
pub fn monostatic_reflection_power(scn: &Scenario, transceiver: Point3, target: Point3, rho: f64) -> f64 {
    let Some(g) = ChannelGeometry::between(transceiver, target) else {
        return 0.0;
    };
    if !inside_lidal_fov(scn, g.psi) {
        return 0.0;
    }
    delta_l(scn, rho) / g.los.powi(4) * g.psi.cos().powf(scn.m() + 3.0)
}

/// Draw a diffuse reflectivity from N(mean, σ) clamped to [0, 1].
pub fn draw_reflectivity<R: Rng + ?Sized>(scn: &Scenario, rng: &mut R) -> f64 {
    let s = &scn.surfaces;
    if s.target_sigma == 0.0 {
        return s.target_mean.clamp(0.0, 1.0);
    }
    let n = Normal::new(s.target_mean, s.target_sigma).expect("validated sigma");
    n.sample(rng).clamp(0.0, 1.0)
}

pub fn sample_reflectivity(scn: &Scenario, seed: u64) -> f64 {
    draw_reflectivity(scn, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// LiDAL receiver noise variance: thermal plus a shot term linear in the received power.
pub fn receiver_noise_variance(scn: &Scenario, received_power: f64) -> f64 {
    let n = &scn.lidal.noise;
    n.thermal_w2 + n.shot_coeff_w * received_power.max(0.0)
}

/// Background power from higher-order surface reflections that enter the LiDAL FOV.
pub fn ambient_power(scn: &Scenario) -> f64 {
    let s = &scn.surfaces;
    let mean_refl = (s.walls + s.floor + s.ceiling) / 3.0;
    scn.lidal.noise.ambient_w * mean_refl * (1.0 - scn.lidal.fov_deg.to_radians().cos())
}

/// Per-bin noise variance of a LiDAL trace at the given echo power.
pub fn trace_noise_variance(scn: &Scenario, signal_power: f64) -> f64 {
    receiver_noise_variance(scn, ambient_power(scn) + signal_power)
}
