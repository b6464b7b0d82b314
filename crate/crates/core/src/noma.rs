//! Downlink NOMA: power allocation, per-user rates, imperfect-CSI gains and
//! the analytic packet success probabilities of RLNC-NOMA, NOMA and their
//! OMA counterparts.
//!
//! Users in a group are indexed 1..M in ascending access distance, so user 1
//! has the strongest channel and the smallest power coefficient.

use crate::error::NomaError;
use crate::optics::delta_c;
use crate::scenario::{Point2, Scenario};

/// Link and coding parameters shared by every user of a group.
#[derive(Debug, Clone, PartialEq)]
pub struct NomaParams {
    pub f: usize,
    pub tau_hat: usize,
    pub v: usize,
    /// ζ / B_w in bits/s/Hz.
    pub throughput: f64,
    pub bandwidth_hz: f64,
    pub mu: f64,
    pub responsivity: f64,
    pub noise_var: f64,
    pub p_t: f64,
    pub dc_bias: f64,
    pub max_intensity: f64,
}

impl NomaParams {
    pub fn from_scenario(scn: &Scenario) -> Self {
        let n = &scn.noma;
        NomaParams {
            f: n.generation_size,
            tau_hat: n.coded_packets,
            v: n.retransmissions,
            throughput: n.throughput_bps_per_hz,
            bandwidth_hz: scn.receiver.bandwidth_hz,
            mu: n.mu,
            responsivity: scn.receiver.responsivity_a_per_w,
            noise_var: n.noise_variance_a2,
            p_t: scn.access_points.optical_power_w,
            dc_bias: n.dc_bias_w,
            max_intensity: n.max_intensity_w,
        }
    }

    /// SINR needed to carry ζ over B_w: 2^(ζ/B_w) − 1.
    pub fn sinr_threshold(&self) -> f64 {
        2f64.powf(self.throughput) - 1.0
    }

    /// Same, for one of `m` orthogonal slots of width B_w/m.
    pub fn oma_sinr_threshold(&self, m: usize) -> f64 {
        2f64.powf(self.throughput * m as f64) - 1.0
    }
}

/// Power coefficients α_1..α_M.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    alphas: Vec<f64>,
}

impl PowerAllocation {
    /// Checks 0 ≤ α ≤ 1, Σα = 1, ascending order and both DC-bias constraints.
    pub fn new(alphas: Vec<f64>, p: &NomaParams) -> Result<Self, NomaError> {
        if alphas.is_empty() {
            return Err(NomaError::InvalidAllocation("empty allocation".into()));
        }
        if alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(NomaError::InvalidAllocation("0 <= alpha <= 1".into()));
        }
        let sum: f64 = alphas.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(NomaError::InvalidAllocation(format!("sum alpha = 1 (got {sum})")));
        }
        if alphas.windows(2).any(|w| w[0] > w[1] + 1e-15) {
            return Err(NomaError::InvalidAllocation("ascending alpha order".into()));
        }
        if p.p_t * sum > p.dc_bias + 1e-12 {
            return Err(NomaError::InvalidAllocation("P_t sum(alpha) <= I_dc".into()));
        }
        if p.p_t * sum > p.max_intensity - p.dc_bias + 1e-12 {
            return Err(NomaError::InvalidAllocation("P_t sum(alpha) <= A - I_dc".into()));
        }
        Ok(PowerAllocation { alphas })
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    /// SIC ordering α_i² > α_(i+1)²·(2^(ζ/B_w) − 1) for every i < M.
    pub fn check_ordering(&self, p: &NomaParams) -> Result<(), NomaError> {
        let thr = p.sinr_threshold();
        for i in 0..self.alphas.len().saturating_sub(1) {
            if self.alphas[i].powi(2) <= self.alphas[i + 1].powi(2) * thr {
                return Err(NomaError::InfeasibleOrdering { user: i + 1 });
            }
        }
        Ok(())
    }
}

/// α_M given to the weakest user; the rest follow a geometric ladder
/// α_i = α_M q^(M−i) with q chosen so the coefficients sum to one.
pub fn geometric_split(alpha_m: f64, m: usize) -> Option<Vec<f64>> {
    if m == 0 || !(alpha_m > 0.0 && alpha_m <= 1.0) || alpha_m * (m as f64) < 1.0 - 1e-12 {
        return None;
    }
    let total = |q: f64| alpha_m * (0..m).map(|j| q.powi(j as i32)).sum::<f64>();
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) > 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let q = 0.5 * (lo + hi);
    let mut a: Vec<f64> = (0..m).map(|j| alpha_m * q.powi((m - 1 - j) as i32)).collect();
    // absorb bisection residue in the weakest user's partner so Σα = 1 exactly
    let s: f64 = a.iter().sum();
    a[0] += 1.0 - s;
    Some(a)
}

/// Achievable rate (bits/s) of user `i` (0-based) with channel gain `gain`.
pub fn achievable_rate(gain: f64, i: usize, alloc: &PowerAllocation, p: &NomaParams) -> Result<f64, NomaError> {
    let a = alloc.alphas();
    if i >= a.len() {
        return Err(NomaError::BadUserIndex { index: i, size: a.len() });
    }
    let sig = (p.responsivity * gain * p.p_t).powi(2);
    let interference: f64 = a[i + 1..].iter().map(|x| x * x).sum::<f64>() * sig;
    let sinr = p.mu * sig * a[i] * a[i] / (interference + p.noise_var);
    Ok(p.bandwidth_hz * (1.0 + sinr).log2())
}

/// Rate of user `i` in an equal-slot OMA baseline with the same coefficients.
pub fn oma_rate(gain: f64, i: usize, alloc: &PowerAllocation, p: &NomaParams) -> Result<f64, NomaError> {
    let a = alloc.alphas();
    if i >= a.len() {
        return Err(NomaError::BadUserIndex { index: i, size: a.len() });
    }
    let snr = p.mu * (p.responsivity * gain * p.p_t * a[i]).powi(2) / p.noise_var;
    Ok(p.bandwidth_hz / a.len() as f64 * (1.0 + snr).log2())
}

/// Ω: the rate requirement of the rate expression inverted into a channel-power scale,
/// σ²(2^(ζ/B_w) − 1)/(μ𝕽²ℏ²).
pub fn omega(gain: f64, p: &NomaParams) -> Result<f64, NomaError> {
    omega_with_threshold(gain, p.sinr_threshold(), p)
}

fn omega_with_threshold(gain: f64, thr: f64, p: &NomaParams) -> Result<f64, NomaError> {
    if !(gain > 0.0) {
        return Err(NomaError::DegenerateChannel(0));
    }
    Ok(p.noise_var * thr / (p.mu * (p.responsivity * gain).powi(2)))
}

/// ε of user `i` (0-based): Ω over the SIC-effective power.
pub fn epsilon_ratio(omega: f64, i: usize, alloc: &PowerAllocation, p: &NomaParams) -> Result<f64, NomaError> {
    let a = alloc.alphas();
    if i >= a.len() {
        return Err(NomaError::BadUserIndex { index: i, size: a.len() });
    }
    let denom = if i + 1 < a.len() {
        let d = a[i] * a[i] - a[i + 1] * a[i + 1] * p.sinr_threshold();
        if d <= 0.0 {
            return Err(NomaError::InfeasibleOrdering { user: i + 1 });
        }
        d
    } else {
        a[i] * a[i]
    };
    Ok(omega / (p.p_t * p.p_t * denom))
}

/// OMA counterpart of ε: no interference, slot-scaled threshold.
pub fn oma_epsilon(gain: f64, i: usize, alloc: &PowerAllocation, p: &NomaParams) -> Result<f64, NomaError> {
    let a = alloc.alphas();
    if i >= a.len() {
        return Err(NomaError::BadUserIndex { index: i, size: a.len() });
    }
    let om = omega_with_threshold(gain, p.oma_sinr_threshold(a.len()), p).map_err(|_| NomaError::DegenerateChannel(i))?;
    Ok(om / (p.p_t * p.p_t * a[i] * a[i]))
}

/// δ = 1 − e^(−ε) Σ_(v=1..V) ε^(v−1)/(v−1)!.
pub fn packet_failure_prob(eps: f64, v: usize) -> f64 {
    if eps == 0.0 {
        return 0.0;
    }
    if eps.is_infinite() {
        return 1.0;
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..v {
        term *= eps / k as f64;
        sum += term;
    }
    (1.0 - (-eps).exp() * sum).clamp(0.0, 1.0)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Probability that fewer than `f` of `tau` transmissions survive a loss rate `delta`.
pub fn rlnc_failure(delta: f64, f: usize, tau: usize) -> f64 {
    (0..f)
        .map(|l| binomial(tau, l) * delta.powi((tau - l) as i32) * (1.0 - delta).powi(l as i32))
        .sum::<f64>()
        .clamp(0.0, 1.0)
}

/// p̂_s = Π_i [1 − Σ_(λ<f) C(τ̂,λ) δ_i^(τ̂−λ) (1−δ_i)^λ].
pub fn rlnc_noma_success(deltas: &[f64], f: usize, tau_hat: usize) -> f64 {
    deltas.iter().map(|&d| 1.0 - rlnc_failure(d, f, tau_hat)).product::<f64>().clamp(0.0, 1.0)
}

/// p_s = Π_i (1 − δ_i)^f.
pub fn noma_success(deltas: &[f64], f: usize) -> f64 {
    deltas.iter().map(|&d| (1.0 - d).powi(f as i32)).product::<f64>().clamp(0.0, 1.0)
}

/// Gain ratio power allocation: α_i ∝ (ℏ_1/ℏ_i)^i, gains in SIC order.
pub fn grpa_allocation(gains: &[f64], p: &NomaParams) -> Result<PowerAllocation, NomaError> {
    if let Some(i) = gains.iter().position(|g| !(*g > 0.0)) {
        return Err(NomaError::DegenerateChannel(i));
    }
    let w: Vec<f64> = gains.iter().enumerate().map(|(i, g)| (gains[0] / g).powi(i as i32 + 1)).collect();
    let s: f64 = w.iter().sum();
    let mut a: Vec<f64> = w.iter().map(|x| x / s).collect();
    a.sort_by(f64::total_cmp);
    PowerAllocation::new(a, p)
}

/// LOS gain at access distance Λ inflated by a location error B:
/// Δ_c η^(m+1) / (Λ² + B²)^((m+3)/2).
pub fn gain_with_error(scn: &Scenario, access_distance: f64, b: f64) -> f64 {
    let m = scn.m();
    delta_c(scn) * scn.eta().powf(m + 1.0) / (access_distance.powi(2) + b * b).powf((m + 3.0) / 2.0)
}

/// Δℏ*: gain change caused by a location error bound B^L.
pub fn csi_error_approx(scn: &Scenario, access_distance: f64, b_l: f64) -> f64 {
    gain_with_error(scn, access_distance, b_l) - gain_with_error(scn, access_distance, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CsiMode {
    Perfect,
    Imperfect,
    LidalApprox,
}

impl CsiMode {
    pub const ALL: [CsiMode; 3] = [CsiMode::Perfect, CsiMode::Imperfect, CsiMode::LidalApprox];

    pub fn name(self) -> &'static str {
        match self {
            CsiMode::Perfect => "perfect",
            CsiMode::Imperfect => "imperfect",
            CsiMode::LidalApprox => "lidal_approx",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserState {
    pub id: usize,
    pub true_position: Point2,
    pub estimated_position: Point2,
    /// LOS distance to every AP.
    pub access_distances: Vec<f64>,
    pub ap: usize,
    /// ℏ: exact LOS gain to the serving AP.
    pub true_gain: f64,
    /// ℏ*: gain seen through a fixed, LiDAL-free location error radius.
    pub estimated_gain: f64,
    /// Δℏ*: gain change at the LiDAL error bound.
    pub gain_error: f64,
    pub b_l: f64,
    pub group: usize,
    pub order: usize,
}

impl UserState {
    pub fn new(scn: &Scenario, id: usize, xy: Point2, ap: usize, b_l: f64) -> Self {
        let p = scn.user_point(xy);
        let access_distances: Vec<f64> = (0..scn.ap_count()).map(|k| (scn.ap(k) - p).norm()).collect();
        let lam = access_distances[ap];
        UserState {
            id,
            true_position: xy,
            estimated_position: xy,
            true_gain: gain_with_error(scn, lam, 0.0),
            estimated_gain: gain_with_error(scn, lam, scn.noma.imperfect_error_radius_m),
            gain_error: csi_error_approx(scn, lam, b_l),
            access_distances,
            ap,
            b_l,
            group: 0,
            order: 0,
        }
    }

    pub fn access_distance(&self) -> f64 {
        self.access_distances[self.ap]
    }

    pub fn gain(&self, mode: CsiMode) -> f64 {
        match mode {
            CsiMode::Perfect => self.true_gain,
            CsiMode::Imperfect => self.estimated_gain,
            CsiMode::LidalApprox => self.true_gain + self.gain_error,
        }
    }
}

/// Sum of the users' achievable rates with the gains of `mode`; users in SIC order.
pub fn group_sum_rate(group: &[UserState], alloc: &PowerAllocation, mode: CsiMode, p: &NomaParams) -> Result<f64, NomaError> {
    if group.len() != alloc.len() {
        return Err(NomaError::InvalidAllocation("one coefficient per user".into()));
    }
    group.iter().enumerate().map(|(i, u)| achievable_rate(u.gain(mode), i, alloc, p)).sum()
}

/// Success probabilities of the four schemes at one power split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeSuccess {
    pub rlnc_noma: f64,
    pub noma: f64,
    pub rlnc_oma: f64,
    pub oma: f64,
}

/// Per-user packet loss rates (δ) under NOMA and under OMA.
pub fn scheme_deltas(gains: &[f64], alloc: &PowerAllocation, p: &NomaParams) -> Result<(Vec<f64>, Vec<f64>), NomaError> {
    alloc.check_ordering(p)?;
    let mut dn = Vec::with_capacity(gains.len());
    let mut doma = Vec::with_capacity(gains.len());
    for (i, &g) in gains.iter().enumerate() {
        let om = omega(g, p).map_err(|_| NomaError::DegenerateChannel(i))?;
        dn.push(packet_failure_prob(epsilon_ratio(om, i, alloc, p)?, p.v));
        doma.push(packet_failure_prob(oma_epsilon(g, i, alloc, p)?, p.v));
    }
    Ok((dn, doma))
}

/// Evaluate all four schemes for users with `gains` (SIC order) under `alloc`.
pub fn scheme_success(gains: &[f64], alloc: &PowerAllocation, p: &NomaParams) -> Result<SchemeSuccess, NomaError> {
    let (dn, doma) = scheme_deltas(gains, alloc, p)?;
    Ok(SchemeSuccess {
        rlnc_noma: rlnc_noma_success(&dn, p.f, p.tau_hat),
        noma: noma_success(&dn, p.f),
        rlnc_oma: rlnc_noma_success(&doma, p.f, p.tau_hat),
        oma: noma_success(&doma, p.f),
    })
}
