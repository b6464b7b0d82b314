//! MIMO-LiDAL sensing: reflected pulse traces, cross-correlation presence
//! statistic and TOA, likelihood-ratio detection, and least-squares
//! trilateration.
//!
//! Every link of a target shares the receiver of its monostatic footprint:
//! the monostatic transceiver fires and listens for its own echo, and each
//! bistatic transmitter's echo is collected by that same receiver.

use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::erfc;

use crate::error::LidalError;
use crate::optics::{
    bistatic_reflection_power, draw_reflectivity, monostatic_reflection_power, trace_noise_variance,
};
use crate::scenario::{DetectionFunction, Footprints, Point2, Point3, Scenario, C};

/// Received power per time bin.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseTrace {
    pub samples: Vec<f64>,
    pub bin_s: f64,
    /// Absolute index of the first bin (time = index · bin_s).
    pub start_bin: i64,
    pub tx: usize,
    pub rx: usize,
}

impl PulseTrace {
    pub fn start_s(&self) -> f64 {
        self.start_bin as f64 * self.bin_s
    }

    pub fn slot_duration_s(&self) -> f64 {
        self.samples.len() as f64 * self.bin_s
    }
}

/// Propagation delay of an echo from `tx` via `target` to `rx`.
pub fn echo_delay(tx: Point3, target: Point3, rx: Point3) -> f64 {
    ((tx - target).norm() + (target - rx).norm()) / C
}

/// Echo power on the link `tx → target → rx`.
pub fn echo_power(scn: &Scenario, tx: usize, rx: usize, target: Point3, rho: f64) -> f64 {
    if tx == rx {
        monostatic_reflection_power(scn, scn.ap(rx), target, rho)
    } else {
        bistatic_reflection_power(scn, scn.ap(tx), target, scn.ap(rx), rho)
    }
}

/// Unit rectangular template as long as the transmitted pulse.
pub fn rect_template(scn: &Scenario) -> Vec<f64> {
    vec![1.0; scn.pulse_bins()]
}

/// Noise-free trace: a rectangular pulse whose centre bin is the quantized delay.
pub fn render_echo(scn: &Scenario, tx: usize, rx: usize, target: Option<Point2>, rho: f64) -> PulseTrace {
    let bin = scn.lidal.time_bin_s;
    let start_bin = (scn.lidal.trace_start_s / bin).round() as i64;
    let mut samples = vec![0.0; scn.lidal.trace_bins];
    if let Some(xy) = target {
        let t = scn.user_point(xy);
        let p = echo_power(scn, tx, rx, t, rho);
        if p > 0.0 {
            let w = scn.pulse_bins() as i64;
            let centre = (echo_delay(scn.ap(tx), t, scn.ap(rx)) / bin).round() as i64;
            let first = centre - w / 2 - start_bin;
            for i in first.max(0)..(first + w).min(samples.len() as i64) {
                samples[i as usize] = p;
            }
        }
    }
    PulseTrace { samples, bin_s: bin, start_bin, tx, rx }
}

/// Add per-bin Gaussian receiver noise whose variance follows the local echo power.
pub fn add_noise<R: Rng + ?Sized>(scn: &Scenario, trace: &mut PulseTrace, rng: &mut R) {
    let floor = trace_noise_variance(scn, 0.0).sqrt();
    let mut last = (0.0, floor);
    for s in trace.samples.iter_mut() {
        if *s != last.0 {
            last = (*s, trace_noise_variance(scn, *s).sqrt());
        }
        let z: f64 = rng.sample(StandardNormal);
        *s += last.1 * z;
    }
}

/// One noisy snapshot with a freshly drawn reflectivity.
pub fn simulate_pulse_trace<R: Rng + ?Sized>(
    scn: &Scenario,
    tx: usize,
    rx: usize,
    target: Option<Point2>,
    rng: &mut R,
) -> PulseTrace {
    let rho = draw_reflectivity(scn, rng);
    let mut tr = render_echo(scn, tx, rx, target, rho);
    add_noise(scn, &mut tr, rng);
    tr
}

/// Cross-correlation of `samples` with `template` at every full-overlap lag.
pub fn cross_correlation(samples: &[f64], template: &[f64]) -> Vec<f64> {
    let w = template.len();
    if w == 0 || w > samples.len() {
        return Vec::new();
    }
    let n = samples.len() - w + 1;
    if template.iter().all(|&t| t == template[0]) {
        // moving sum via prefix sums
        let mut prefix = Vec::with_capacity(samples.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for &s in samples {
            acc += s;
            prefix.push(acc);
        }
        (0..n).map(|j| template[0] * (prefix[j + w] - prefix[j])).collect()
    } else {
        (0..n).map(|j| samples[j..j + w].iter().zip(template).map(|(a, b)| a * b).sum()).collect()
    }
}

/// Lag of the cross-correlation maximum (first maximum on ties).
pub fn ccm_lag(samples: &[f64], template: &[f64]) -> Result<usize, LidalError> {
    let cc = cross_correlation(samples, template);
    let (mut best, mut lo, mut hi) = (0usize, f64::INFINITY, f64::NEG_INFINITY);
    for (j, &v) in cc.iter().enumerate() {
        if v > hi {
            hi = v;
            best = j;
        }
        lo = lo.min(v);
    }
    if cc.is_empty() || !(hi > 0.0) || (cc.len() > 1 && hi == lo) {
        return Err(LidalError::NoEcho);
    }
    Ok(best)
}

/// Time of arrival: the centre of the best-matching template window.
pub fn ccm_toa(trace: &PulseTrace, template: &[f64]) -> Result<f64, LidalError> {
    let j = ccm_lag(&trace.samples, template)? as i64;
    Ok((trace.start_bin + j + template.len() as i64 / 2) as f64 * trace.bin_s)
}

/// Presence statistic: mean received power over the window starting at `lag`.
pub fn window_mean(samples: &[f64], lag: usize, w: usize) -> f64 {
    samples[lag..lag + w].iter().sum::<f64>() / w as f64
}

/// Likelihood-ratio threshold between H0: N(0, σ̂_t²) and H1: N(μ, σ²) with σ² = β_σ σ̂_t².
pub fn detection_threshold(
    mu: f64,
    sigma: f64,
    beta_sigma: f64,
    gamma_fp: f64,
    gamma_fa: f64,
    sigma_t: f64,
) -> Result<f64, LidalError> {
    if !(beta_sigma > 1.0) {
        return Err(LidalError::DegenerateBeta(beta_sigma));
    }
    let b1 = beta_sigma - 1.0;
    let rad = mu * mu / (b1 * b1) + mu * mu / b1
        + 2.0 * sigma * sigma / b1 * ((gamma_fp / gamma_fa).ln() - (sigma_t / sigma).ln());
    if rad < 0.0 {
        return Err(LidalError::NegativeRadicand(rad));
    }
    Ok(rad.sqrt() - mu / b1)
}

/// `½ erfc((D − μ)/(√2 σ))`: probability that N(μ, σ²) exceeds D.
pub fn detection_probability(d_th: f64, mu: f64, sigma: f64) -> f64 {
    detection_probability_with(DetectionFunction::Erfc, d_th, mu, sigma)
}

pub fn detection_probability_with(func: DetectionFunction, d_th: f64, mu: f64, sigma: f64) -> f64 {
    let x = (d_th - mu) / (std::f64::consts::SQRT_2 * sigma);
    let p = match func {
        DetectionFunction::Erfc => 0.5 * erfc(x),
        // Gaussian tail Q(x) = ½ erfc(x/√2)
        DetectionFunction::Q => 0.5 * 0.5 * erfc(x / std::f64::consts::SQRT_2),
    };
    p.clamp(0.0, 1.0)
}

/// Distribution of the presence statistic on one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkStatistics {
    /// Mean echo power at the mean reflectivity.
    pub mu: f64,
    /// Noise-only standard deviation of the statistic (σ̂_t).
    pub sigma_t: f64,
    /// Target-induced standard deviation (σ̂_s): reflectivity spread plus signal shot noise.
    pub sigma_s: f64,
}

impl LinkStatistics {
    pub fn sigma(&self) -> f64 {
        (self.sigma_t * self.sigma_t + self.sigma_s * self.sigma_s).sqrt()
    }

    pub fn beta(&self) -> f64 {
        1.0 + (self.sigma_s / self.sigma_t).powi(2)
    }
}

pub fn link_statistics(scn: &Scenario, tx: usize, rx: usize, target: Point2) -> LinkStatistics {
    let w = scn.pulse_bins() as f64;
    let rho = scn.surfaces.target_mean;
    let mu = echo_power(scn, tx, rx, scn.user_point(target), rho);
    let var_t = trace_noise_variance(scn, 0.0) / w;
    let shot = (trace_noise_variance(scn, mu) - trace_noise_variance(scn, 0.0)) / w;
    let spread = if rho > 0.0 { (mu / rho * scn.surfaces.target_sigma).powi(2) } else { 0.0 };
    LinkStatistics { mu, sigma_t: var_t.sqrt(), sigma_s: (shot + spread).sqrt() }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionDecision {
    pub indicator: bool,
    pub threshold: f64,
    pub statistic: f64,
    pub tx: usize,
    pub rx: usize,
}

/// Threshold for a link; `-∞` when the likelihood ratio never falls below the
/// test ratio (the detector always declares presence).
pub fn link_threshold(scn: &Scenario, stats: &LinkStatistics) -> Result<f64, LidalError> {
    let l = &scn.lidal;
    match detection_threshold(stats.mu, stats.sigma(), stats.beta(), l.cost_missed, l.cost_false_alarm, stats.sigma_t) {
        Err(LidalError::NegativeRadicand(_)) => Ok(f64::NEG_INFINITY),
        r => r,
    }
}

/// Single-snapshot detection probability of one link.
pub fn link_detection_probability(scn: &Scenario, tx: usize, rx: usize, target: Point2) -> f64 {
    let st = link_statistics(scn, tx, rx, target);
    if st.mu <= 0.0 {
        return 0.0;
    }
    match link_threshold(scn, &st) {
        Ok(d) => detection_probability_with(scn.lidal.detection_function, d, st.mu, st.sigma()),
        Err(_) => 0.0,
    }
}

/// Probability that at least one of `s` independent snapshots clears the threshold.
pub fn over_snapshots(p: f64, s: usize) -> f64 {
    1.0 - (1.0 - p).powi(s as i32)
}

/// Comparator over S snapshots: maximum statistic at the CCM lag against the threshold.
pub fn detect<R: Rng + ?Sized>(scn: &Scenario, tx: usize, rx: usize, target: Option<Point2>, at: Point2, rng: &mut R) -> DetectionDecision {
    let st = link_statistics(scn, tx, rx, at);
    let d = link_threshold(scn, &st).unwrap_or(f64::INFINITY);
    let tpl = rect_template(scn);
    let mut best = f64::NEG_INFINITY;
    for _ in 0..scn.lidal.snapshots {
        let tr = simulate_pulse_trace(scn, tx, rx, target, rng);
        if let Ok(lag) = ccm_lag(&tr.samples, &tpl) {
            best = best.max(window_mean(&tr.samples, lag, tpl.len()));
        }
    }
    DetectionDecision { indicator: best >= d, threshold: d, statistic: best, tx, rx }
}

/// Product of the per-footprint detection probabilities (S-snapshot combined).
pub fn localization_probability(scn: &Scenario, target: Point2) -> Result<f64, LidalError> {
    let fp = scn.footprints(target);
    let factors = footprint_detection_probabilities(scn, &fp, target)?;
    Ok(factors.iter().product())
}

/// Monostatic factor first, then bistatic ones.
pub fn footprint_detection_probabilities(scn: &Scenario, fp: &Footprints, target: Point2) -> Result<Vec<f64>, LidalError> {
    let t = scn.user_point(target);
    let rho = scn.surfaces.target_mean;
    if echo_power(scn, fp.mono, fp.mono, t, rho) <= 0.0 {
        return Err(LidalError::Unlocatable(format!("outside monostatic footprint {}", fp.mono)));
    }
    let covered = fp.bistatic.iter().filter(|&&k| echo_power(scn, k, fp.mono, t, rho) > 0.0).count();
    if covered < 2 {
        return Err(LidalError::Unlocatable(format!("only {covered} bistatic links")));
    }
    let s = scn.lidal.snapshots;
    Ok(fp
        .all()
        .into_iter()
        .map(|k| over_snapshots(link_detection_probability(scn, k, fp.mono, target), s))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    /// Direct solution of the 2×2 normal equations.
    Normal,
    /// Bi-conjugate gradient stabilized iteration on the normal equations.
    BiCgStab,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocationEstimate {
    pub x: f64,
    pub y: f64,
    pub residual: f64,
    pub footprints: Vec<usize>,
}

impl LocationEstimate {
    pub fn xy(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

/// Ranges from the TOAs of one target.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeSet {
    pub mono: f64,
    pub bistatic: Vec<f64>,
    pub toa: Vec<f64>,
}

impl RangeSet {
    /// `toa[0]` is the monostatic round trip; the rest are bistatic paths.
    pub fn from_toa(toa: Vec<f64>) -> Self {
        let mono = toa[0] * C / 2.0;
        let bistatic = toa[1..].iter().map(|t| t * C - mono).collect();
        RangeSet { mono, bistatic, toa }
    }

    /// Range to each footprint transmitter, monostatic first.
    pub fn all(&self) -> Vec<f64> {
        std::iter::once(self.mono).chain(self.bistatic.iter().copied()).collect()
    }
}

/// Linearized least-squares position from ranges to transmitters at a common height.
///
/// Differences of squared 3-D ranges equal differences of squared planar
/// distances when all transmitters share a height, so 3-D ranges enter directly.
pub fn trilaterate(ranges: &[f64], aps: &[Point2], solver: Solver) -> Result<LocationEstimate, LidalError> {
    let k = aps.len();
    if k < 3 || ranges.len() != k {
        return Err(LidalError::TooFewFootprints { need: 3, got: k.min(ranges.len()) });
    }
    let (x1, r1) = (aps[0], ranges[0]);
    let (mut ata, mut atb) = (nalgebra::Matrix2::zeros(), nalgebra::Vector2::zeros());
    let mut rows = Vec::with_capacity(k - 1);
    for i in 1..k {
        let a = aps[i] - x1;
        let b = 0.5 * (r1 * r1 - ranges[i] * ranges[i] - x1.norm_squared() + aps[i].norm_squared());
        ata += a * a.transpose();
        atb += a * b;
        rows.push((a, b));
    }
    let det = ata.determinant();
    if !(det.abs() > 1e-10 * ata.trace().powi(2)) {
        return Err(LidalError::IllPosed("transmitter projections are collinear"));
    }
    let sol = match solver {
        Solver::Normal => ata.try_inverse().ok_or(LidalError::IllPosed("singular normal matrix"))? * atb,
        Solver::BiCgStab => bicgstab2(&ata, &atb),
    };
    let residual = rows.iter().map(|(a, b)| (a.dot(&sol) - b).powi(2)).sum::<f64>().sqrt();
    Ok(LocationEstimate { x: sol.x, y: sol.y, residual, footprints: Vec::new() })
}

fn bicgstab2(a: &nalgebra::Matrix2<f64>, b: &nalgebra::Vector2<f64>) -> nalgebra::Vector2<f64> {
    let mut x = nalgebra::Vector2::zeros();
    let mut r = b - a * x;
    let r0 = r;
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let (mut v, mut p) = (nalgebra::Vector2::zeros(), nalgebra::Vector2::zeros());
    let tol = 1e-15 * b.norm().max(f64::MIN_POSITIVE);
    for _ in 0..50 {
        if r.norm() <= tol {
            break;
        }
        let rho_new = r0.dot(&r);
        if rho_new == 0.0 {
            break;
        }
        let beta = rho_new / rho * alpha / omega;
        rho = rho_new;
        p = r + beta * (p - omega * v);
        v = a * p;
        alpha = rho / r0.dot(&v);
        let s = r - alpha * v;
        if s.norm() <= tol {
            x += alpha * p;
            break;
        }
        let t = a * s;
        omega = t.dot(&s) / t.dot(&t);
        x += alpha * p + omega * s;
        r = s - omega * t;
    }
    x
}

/// Per-link traces, TOAs and the resulting estimate for one target.
#[derive(Debug, Clone)]
pub struct LidalObservation {
    pub footprints: Footprints,
    pub traces: Vec<PulseTrace>,
    pub ranges: RangeSet,
    pub estimate: LocationEstimate,
}

/// Simulate all links of a target, range them and trilaterate.
///
/// `rng = None` renders noise-free traces at the mean reflectivity.
pub fn observe<R: Rng + ?Sized>(scn: &Scenario, target: Point2, mut rng: Option<&mut R>) -> Result<LidalObservation, LidalError> {
    let fp = scn.footprints(target);
    let tpl = rect_template(scn);
    let mut traces = Vec::with_capacity(fp.bistatic.len() + 1);
    let mut toa = Vec::with_capacity(fp.bistatic.len() + 1);
    for tx in fp.all() {
        let tr = match rng.as_deref_mut() {
            Some(r) => simulate_pulse_trace(scn, tx, fp.mono, Some(target), r),
            None => render_echo(scn, tx, fp.mono, Some(target), scn.surfaces.target_mean),
        };
        toa.push(ccm_toa(&tr, &tpl)?);
        traces.push(tr);
    }
    let ranges = RangeSet::from_toa(toa);
    let aps: Vec<Point2> = fp.all().into_iter().map(|k| scn.ap_xy(k)).collect();
    let mut est = trilaterate(&ranges.all(), &aps, Solver::Normal)?;
    let [w, h, _] = scn.room.dimensions_m;
    est.x = est.x.clamp(0.0, w);
    est.y = est.y.clamp(0.0, h);
    est.footprints = fp.all();
    Ok(LidalObservation { footprints: fp, traces, ranges, estimate: est })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_log_terms_vanish() {
        let (mu, sigma, beta) = (2.0, 1.0, 2.0);
        let d = detection_threshold(mu, sigma, beta, 5.0, 5.0, sigma).unwrap();
        let b1 = beta - 1.0;
        let expect = (mu * mu / (b1 * b1) + mu * mu / b1).sqrt() - mu / b1;
        assert!((d - expect).abs() < 1e-12);
    }

    #[test]
    fn asymmetric_costs_lower_threshold() {
        let (mu, sigma, beta, st) = (3.0, 1.2, 2.5, 1.2 / 2.5f64.sqrt());
        let even = detection_threshold(mu, sigma, beta, 1.0, 1.0, st).unwrap();
        let skew = detection_threshold(mu, sigma, beta, 1.0, 100.0, st).unwrap();
        assert!(skew < even);
        assert!(detection_probability(skew, mu, sigma) > detection_probability(even, mu, sigma));
    }

    #[test]
    fn threshold_errors() {
        assert_eq!(detection_threshold(1.0, 1.0, 1.0, 1.0, 1.0, 1.0), Err(LidalError::DegenerateBeta(1.0)));
        assert!(matches!(
            detection_threshold(1e-3, 1.0, 1.01, 1.0, 100.0, 0.995),
            Err(LidalError::NegativeRadicand(_))
        ));
    }

    #[test]
    fn detection_probability_limits() {
        assert!((detection_probability(1.0, 1.0, 0.3) - 0.5).abs() < 1e-15);
        assert!((detection_probability(-1e9, 0.0, 1.0) - 1.0).abs() < 1e-15);
        assert!(detection_probability(1e9, 0.0, 1.0) < 1e-15);
        let mut prev = 1.0;
        for i in -20..20 {
            let p = detection_probability(i as f64 * 0.1, 0.0, 1.0);
            assert!(p <= prev);
            prev = p;
        }
        assert!((detection_probability_with(DetectionFunction::Q, 0.0, 0.0, 1.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn autocorrelation_peaks_at_zero_lag() {
        let s: Vec<f64> = (0..50).map(|i| ((i * 7919) % 13) as f64 - 3.0).collect();
        assert_eq!(ccm_lag(&s, &s).unwrap(), 0);
    }

    #[test]
    fn flat_trace_has_no_echo() {
        assert_eq!(ccm_lag(&[0.0; 100], &[1.0; 10]), Err(LidalError::NoEcho));
    }

    #[test]
    fn direct_and_prefix_correlation_agree() {
        let s: Vec<f64> = (0..300).map(|i| (i as f64 * 0.37).sin()).collect();
        let flat = cross_correlation(&s, &[2.0; 17]);
        let mut tpl = vec![2.0; 17];
        tpl[16] = 2.0 + 1e-300; // forces the direct path
        let direct = cross_correlation(&s, &tpl);
        for (a, b) in flat.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn trilaterate_noise_free() {
        let aps = [Point2::new(1.0, 1.0), Point2::new(1.0, 3.0), Point2::new(3.0, 1.0)];
        let t = Point2::new(2.0, 2.0);
        let r: Vec<f64> = aps.iter().map(|a| ((a - t).norm_squared() + 2.2f64.powi(2)).sqrt()).collect();
        for solver in [Solver::Normal, Solver::BiCgStab] {
            let e = trilaterate(&r, &aps, solver).unwrap();
            assert!((e.x - 2.0).abs() < 1e-9 && (e.y - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn collinear_is_ill_posed() {
        let aps = [Point2::new(1.0, 1.0), Point2::new(1.0, 3.0), Point2::new(1.0, 5.0)];
        assert!(matches!(trilaterate(&[1.0, 2.0, 3.0], &aps, Solver::Normal), Err(LidalError::IllPosed(_))));
    }

    #[test]
    fn localization_is_product_of_factors() {
        let scn = Scenario::table1();
        let t = Point2::new(1.45, 2.2);
        let f = footprint_detection_probabilities(&scn, &scn.footprints(t), t).unwrap();
        let p = localization_probability(&scn, t).unwrap();
        assert_eq!(p, f.iter().product::<f64>());
    }

    #[test]
    fn snapshot_combination() {
        assert_eq!(over_snapshots(0.0, 2), 0.0);
        assert_eq!(over_snapshots(1.0, 2), 1.0);
        assert!((over_snapshots(0.5, 2) - 0.75).abs() < 1e-15);
    }
}
