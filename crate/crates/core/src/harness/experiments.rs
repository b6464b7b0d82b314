//! The six experiments. Each has a `*_rows` function returning typed results
//! and a `write_*` function emitting them as CSV.

use std::path::{Path, PathBuf};

use nalgebra::Matrix2;
use rand::Rng;
use rayon::prelude::*;

use super::grid::generate_grid;
use super::output::{num, write_csv, Provenance};
use super::Config;
use crate::crlb::{crlb_for, empirical_cdf};
use crate::error::ExperimentError;
use crate::grouping::{assign_groups, GroupAssignment};
use crate::lidal::{detect, localization_probability, observe};
use crate::noma::{
    geometric_split, gain_with_error, grpa_allocation, group_sum_rate, noma_success, rlnc_noma_success,
    scheme_deltas, CsiMode, NomaParams, PowerAllocation, UserState,
};
use crate::rlnc::{Decoder, Encoder, Generation};
use crate::rng::{stream, tag};
use crate::scenario::{Point2, Scenario};

fn failed(id: &str, msg: impl ToString) -> ExperimentError {
    ExperimentError::Failed { id: id.to_string(), msg: msg.to_string() }
}

// ---------------------------------------------------------------- success_prob

pub const SCHEMES: [&str; 4] = ["rlnc_noma", "noma", "rlnc_oma", "oma"];

#[derive(Debug, Clone, PartialEq)]
pub struct SuccessRow {
    pub alpha: f64,
    pub scheme: &'static str,
    pub feasible: bool,
    /// NaN when the split violates the SIC ordering.
    pub analytic: f64,
    pub mc: f64,
    pub mc_stderr: f64,
}

/// The first full-size group of the grid grouping, with its true LOS gains in SIC order.
pub fn success_group(cfg: &Config) -> Result<(Vec<Point2>, Vec<f64>), ExperimentError> {
    let scn = &cfg.scenario;
    let size = cfg.settings.success_group_size;
    let grid = generate_grid(scn, &cfg.settings.grid)?;
    let ga = assign_groups(scn, &grid, size);
    let g = ga
        .groups
        .iter()
        .find(|g| g.members.len() == size)
        .ok_or_else(|| failed("success_prob", format!("no group of {size} users")))?;
    let pts: Vec<Point2> = g.members.iter().map(|&u| grid[u]).collect();
    let gains = pts.iter().map(|&xy| gain_with_error(scn, (scn.ap(g.ap) - scn.user_point(xy)).norm(), 0.0)).collect();
    Ok((pts, gains))
}

fn all_received<R: Rng>(delta: f64, n: usize, rng: &mut R) -> bool {
    (0..n).all(|_| rng.random::<f64>() >= delta)
}

/// One user's generation sent as `tau` coded packets over an erasure channel,
/// decoded with the real field arithmetic.
fn rlnc_delivers<R: Rng>(delta: f64, f: usize, tau: usize, rng: &mut R) -> bool {
    let packets: Vec<Vec<u8>> = (0..f).map(|_| vec![rng.random::<u8>()]).collect();
    let gen = Generation::new(packets).expect("nonempty generation");
    let mut enc = Encoder::new(&gen, rng.random());
    let mut dec = Decoder::new(f, 1);
    for _ in 0..tau {
        let pkt = enc.next_packet();
        if rng.random::<f64>() >= delta {
            dec.ingest(&pkt).expect("well-formed packet");
        }
    }
    dec.is_complete() && dec.decode_generation().is_ok_and(|b| b == gen.as_bytes())
}

/// Packet-level Monte Carlo of the four schemes; returns success counts.
pub fn simulate_schemes<R: Rng>(dn: &[f64], doma: &[f64], p: &NomaParams, trials: usize, rng: &mut R) -> [usize; 4] {
    let mut c = [0usize; 4];
    for _ in 0..trials {
        let rn = dn.iter().all(|&d| rlnc_delivers(d, p.f, p.tau_hat, rng));
        let n = dn.iter().all(|&d| all_received(d, p.f, rng));
        let ro = doma.iter().all(|&d| rlnc_delivers(d, p.f, p.tau_hat, rng));
        let o = doma.iter().all(|&d| all_received(d, p.f, rng));
        for (k, hit) in [rn, n, ro, o].into_iter().enumerate() {
            c[k] += hit as usize;
        }
    }
    c
}

pub fn success_prob_rows(cfg: &Config, seed: u64) -> Result<Vec<SuccessRow>, ExperimentError> {
    let (_, gains) = success_group(cfg)?;
    let p = NomaParams::from_scenario(&cfg.scenario);
    let trials = cfg.settings.success_mc_trials;
    let rows: Vec<Vec<SuccessRow>> = cfg
        .settings
        .alphas()
        .into_par_iter()
        .enumerate()
        .map(|(k, alpha)| {
            let deltas = geometric_split(alpha, gains.len())
                .and_then(|a| PowerAllocation::new(a, &p).ok())
                .and_then(|a| scheme_deltas(&gains, &a, &p).ok());
            let Some((dn, doma)) = deltas else {
                return SCHEMES
                    .iter()
                    .map(|&scheme| SuccessRow { alpha, scheme, feasible: false, analytic: f64::NAN, mc: f64::NAN, mc_stderr: f64::NAN })
                    .collect();
            };
            let analytic = [
                rlnc_noma_success(&dn, p.f, p.tau_hat),
                noma_success(&dn, p.f),
                rlnc_noma_success(&doma, p.f, p.tau_hat),
                noma_success(&doma, p.f),
            ];
            let mut rng = stream(&[seed, tag("success_prob"), k as u64]);
            let counts = simulate_schemes(&dn, &doma, &p, trials, &mut rng);
            SCHEMES
                .iter()
                .zip(analytic)
                .zip(counts)
                .map(|((&scheme, a), c)| {
                    let mc = c as f64 / trials as f64;
                    SuccessRow { alpha, scheme, feasible: true, analytic: a, mc, mc_stderr: (mc * (1.0 - mc) / trials as f64).sqrt() }
                })
                .collect()
        })
        .collect();
    Ok(rows.into_iter().flatten().collect())
}

pub fn write_success_prob(cfg: &Config, prov: &Provenance, out: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    let rows = success_prob_rows(cfg, prov.seed)?;
    let path = out.join("success_prob.csv");
    write_csv(
        &path,
        prov,
        &["alpha", "scheme", "success_prob", "feasible", "mc_success_prob", "mc_std_error"],
        rows.iter().map(|r| {
            vec![num(r.alpha), r.scheme.to_string(), num(r.analytic), r.feasible.to_string(), num(r.mc), num(r.mc_stderr)]
        }),
    )?;
    Ok(vec![path])
}

// ------------------------------------------------------------ localization_pdf

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationRow {
    pub xy: Point2,
    pub locatable: bool,
    /// Analytic localization probability; 0 where the target is not covered.
    pub p_l: f64,
    /// Fraction of trials in which every link's comparator fired.
    pub p_l_empirical: f64,
    /// Mean estimate and RMSE over the trials that produced a fix.
    pub x_hat: f64,
    pub y_hat: f64,
    pub err_m: f64,
}

pub fn localization_rows(cfg: &Config, seed: u64) -> Result<Vec<LocalizationRow>, ExperimentError> {
    let scn = &cfg.scenario;
    let grid = generate_grid(scn, &cfg.settings.grid)?;
    let trials = cfg.settings.localization_trials;
    Ok(grid
        .par_iter()
        .enumerate()
        .map(|(i, &xy)| {
            let (p_l, locatable) = match localization_probability(scn, xy) {
                Ok(v) => (v, true),
                Err(_) => (0.0, false),
            };
            let fp = scn.footprints(xy);
            let mut rng = stream(&[seed, tag("localization_pdf"), i as u64]);
            let (mut hits, mut fixes, mut sum, mut sq) = (0usize, 0usize, Point2::zeros(), 0.0);
            for _ in 0..trials {
                let decisions: Vec<bool> =
                    fp.all().into_iter().map(|k| detect(scn, k, fp.mono, Some(xy), xy, &mut rng).indicator).collect();
                hits += decisions.iter().all(|&d| d) as usize;
                if let Ok(o) = observe(scn, xy, Some(&mut rng)) {
                    let e = o.estimate.xy();
                    fixes += 1;
                    sum += e;
                    sq += (e - xy).norm_squared();
                }
            }
            let (x_hat, y_hat, err_m) = if fixes > 0 {
                let n = fixes as f64;
                (sum.x / n, sum.y / n, (sq / n).sqrt())
            } else {
                (f64::NAN, f64::NAN, f64::NAN)
            };
            LocalizationRow { xy, locatable, p_l, p_l_empirical: hits as f64 / trials as f64, x_hat, y_hat, err_m }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxisBin {
    pub axis: &'static str,
    pub lo: f64,
    pub hi: f64,
    pub mean_p_l: f64,
    /// Localization probability mass per metre along the axis.
    pub pdf: f64,
}

/// Bin the grid's localization probability along x and along y.
pub fn axis_pdf(scn: &Scenario, rows: &[LocalizationRow], bins: usize) -> Vec<AxisBin> {
    let dims = scn.room.dimensions_m;
    let mut out = Vec::with_capacity(2 * bins);
    for (axis, len) in [("x", dims[0]), ("y", dims[1])] {
        let w = len / bins as f64;
        let mut sum = vec![0.0; bins];
        let mut cnt = vec![0usize; bins];
        for r in rows {
            let c = if axis == "x" { r.xy.x } else { r.xy.y };
            let b = ((c / w) as usize).min(bins - 1);
            sum[b] += r.p_l;
            cnt[b] += 1;
        }
        let total: f64 = sum.iter().sum();
        for b in 0..bins {
            out.push(AxisBin {
                axis,
                lo: b as f64 * w,
                hi: (b + 1) as f64 * w,
                mean_p_l: if cnt[b] > 0 { sum[b] / cnt[b] as f64 } else { f64::NAN },
                pdf: if total > 0.0 { sum[b] / (total * w) } else { 0.0 },
            });
        }
    }
    out
}

pub fn write_localization_pdf(cfg: &Config, prov: &Provenance, out: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    let rows = localization_rows(cfg, prov.seed)?;
    let sweep = out.join("localization_pdf.csv");
    write_csv(
        &sweep,
        prov,
        &["x", "y", "P_L", "x_hat", "y_hat", "err_m", "P_L_empirical", "locatable"],
        rows.iter().map(|r| {
            vec![
                num(r.xy.x),
                num(r.xy.y),
                num(r.p_l),
                num(r.x_hat),
                num(r.y_hat),
                num(r.err_m),
                num(r.p_l_empirical),
                r.locatable.to_string(),
            ]
        }),
    )?;
    let axes = out.join("localization_pdf_axes.csv");
    write_csv(
        &axes,
        prov,
        &["axis", "bin_lo_m", "bin_hi_m", "mean_P_L", "pdf"],
        axis_pdf(&cfg.scenario, &rows, cfg.settings.pdf_bins)
            .iter()
            .map(|b| vec![b.axis.to_string(), num(b.lo), num(b.hi), num(b.mean_p_l), num(b.pdf)]),
    )?;
    Ok(vec![sweep, axes])
}

// -------------------------------------------------------------------- crlb_cdf

#[derive(Debug, Clone, PartialEq)]
pub struct CrlbRow {
    pub xy: Point2,
    pub b_l: f64,
    pub fisher: Option<Matrix2<f64>>,
    pub rmse: f64,
    /// Norm of the mean estimation error.
    pub bias: f64,
    pub fixes: usize,
}

pub fn crlb_rows(cfg: &Config, seed: u64) -> Result<Vec<CrlbRow>, ExperimentError> {
    let scn = &cfg.scenario;
    let grid = generate_grid(scn, &cfg.settings.grid)?;
    let trials = cfg.settings.crlb_trials;
    Ok(grid
        .par_iter()
        .enumerate()
        .map(|(i, &xy)| {
            let (b_l, fisher) = match crlb_for(scn, xy) {
                Ok(r) => (r.b_l, Some(r.fisher)),
                Err(_) => (f64::NAN, None),
            };
            let mut rng = stream(&[seed, tag("crlb_cdf"), i as u64]);
            let (mut fixes, mut sum, mut sq) = (0usize, Point2::zeros(), 0.0);
            for _ in 0..trials {
                if let Ok(o) = observe(scn, xy, Some(&mut rng)) {
                    let e = o.estimate.xy() - xy;
                    fixes += 1;
                    sum += e;
                    sq += e.norm_squared();
                }
            }
            let (rmse, bias) =
                if fixes > 0 { ((sq / fixes as f64).sqrt(), (sum / fixes as f64).norm()) } else { (f64::NAN, f64::NAN) };
            CrlbRow { xy, b_l, fisher, rmse, bias, fixes }
        })
        .collect())
}

pub fn write_crlb_cdf(cfg: &Config, prov: &Provenance, out: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    let rows = crlb_rows(cfg, prov.seed)?;
    let map = out.join("crlb_cdf.csv");
    write_csv(
        &map,
        prov,
        &["x", "y", "B_L_m", "fisher_xx", "fisher_xy", "fisher_yy", "empirical_rmse_m", "bias_m", "trials_with_fix"],
        rows.iter().map(|r| {
            let f = r.fisher.unwrap_or(Matrix2::from_element(f64::NAN));
            vec![
                num(r.xy.x),
                num(r.xy.y),
                num(r.b_l),
                num(f[(0, 0)]),
                num(f[(0, 1)]),
                num(f[(1, 1)]),
                num(r.rmse),
                num(r.bias),
                r.fixes.to_string(),
            ]
        }),
    )?;
    let finite = |v: Vec<f64>| v.into_iter().filter(|x| x.is_finite()).collect::<Vec<_>>();
    let bound = empirical_cdf(&finite(rows.iter().map(|r| r.b_l).collect()));
    let emp = empirical_cdf(&finite(rows.iter().map(|r| r.rmse).collect()));
    let cdf = out.join("crlb_cdf_cdf.csv");
    write_csv(
        &cdf,
        prov,
        &["series", "value_m", "cdf"],
        bound
            .iter()
            .map(|&(v, c)| vec!["crlb".to_string(), num(v), num(c)])
            .chain(emp.iter().map(|&(v, c)| vec!["empirical_rmse".to_string(), num(v), num(c)])),
    )?;
    Ok(vec![map, cdf])
}

// ---------------------------------------------------------------- grouping_map

pub fn grouping(cfg: &Config) -> Result<(Vec<Point2>, GroupAssignment), ExperimentError> {
    let scn = &cfg.scenario;
    let grid = generate_grid(scn, &cfg.settings.grid)?;
    let ga = assign_groups(scn, &grid, scn.noma.group_size);
    Ok((grid, ga))
}

pub fn write_grouping_map(cfg: &Config, prov: &Provenance, out: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    let (grid, ga) = grouping(cfg)?;
    let map = out.join("grouping_map.csv");
    write_csv(
        &map,
        prov,
        &["x", "y", "assigned_ap", "class", "pair_id", "order", "B_L_m"],
        grid.iter().enumerate().map(|(u, xy)| {
            vec![
                num(xy.x),
                num(xy.y),
                ga.assigned_ap(u).to_string(),
                ga.user_class[u].name().to_string(),
                ga.user_group[u].to_string(),
                ga.user_order[u].to_string(),
                num(ga.user_b_l[u]),
            ]
        }),
    )?;
    let shares = out.join("grouping_map_shares.csv");
    let n = cfg.scenario.ap_count();
    write_csv(
        &shares,
        prov,
        &["ap", "share"],
        ga.shares(n).iter().enumerate().map(|(k, s)| vec![k.to_string(), num(*s)]),
    )?;
    Ok(vec![map, shares])
}

// ---------------------------------------------------------------- sum_rate_cdf

#[derive(Debug, Clone, PartialEq)]
pub struct SumRateRow {
    pub location_id: usize,
    pub xy: Point2,
    pub mode: CsiMode,
    pub group: usize,
    /// Sum rate (bits/s) of the group the location belongs to.
    pub sum_rate: f64,
}

/// Power split by GRPA on the imperfect-CSI gains, then evaluated under each CSI mode.
pub fn sum_rate_rows(cfg: &Config) -> Result<Vec<SumRateRow>, ExperimentError> {
    let scn = &cfg.scenario;
    let (grid, ga) = grouping(cfg)?;
    let p = NomaParams::from_scenario(scn);
    let per_group: Result<Vec<Vec<SumRateRow>>, ExperimentError> = ga
        .groups
        .par_iter()
        .map(|g| {
            let users: Vec<UserState> =
                g.members.iter().map(|&u| UserState::new(scn, u, grid[u], g.ap, ga.user_b_l[u])).collect();
            let est: Vec<f64> = users.iter().map(|u| u.gain(CsiMode::Imperfect)).collect();
            let alloc = grpa_allocation(&est, &p).map_err(|e| failed("sum_rate_cdf", e))?;
            let mut rows = Vec::new();
            for mode in CsiMode::ALL {
                let r = group_sum_rate(&users, &alloc, mode, &p).map_err(|e| failed("sum_rate_cdf", e))?;
                rows.extend(g.members.iter().map(|&u| SumRateRow { location_id: u, xy: grid[u], mode, group: g.id, sum_rate: r }));
            }
            Ok(rows)
        })
        .collect();
    let mut rows: Vec<SumRateRow> = per_group?.into_iter().flatten().collect();
    let mode_idx = |m: CsiMode| CsiMode::ALL.iter().position(|&x| x == m).unwrap_or(0);
    rows.sort_by_key(|r| (r.location_id, mode_idx(r.mode)));
    Ok(rows)
}

pub fn write_sum_rate_cdf(cfg: &Config, prov: &Provenance, out: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    let rows = sum_rate_rows(cfg)?;
    let main = out.join("sum_rate_cdf.csv");
    write_csv(
        &main,
        prov,
        &["location_id", "csi_mode", "sum_rate", "x", "y", "group"],
        rows.iter().map(|r| {
            vec![r.location_id.to_string(), r.mode.name().to_string(), num(r.sum_rate), num(r.xy.x), num(r.xy.y), r.group.to_string()]
        }),
    )?;
    let cdf = out.join("sum_rate_cdf_cdf.csv");
    let mut lines = Vec::new();
    for mode in CsiMode::ALL {
        let v: Vec<f64> = rows.iter().filter(|r| r.mode == mode).map(|r| r.sum_rate).collect();
        lines.extend(empirical_cdf(&v).into_iter().map(|(x, c)| vec![mode.name().to_string(), num(x), num(c)]));
    }
    write_csv(&cdf, prov, &["csi_mode", "sum_rate", "cdf"], lines)?;
    Ok(vec![main, cdf])
}

// --------------------------------------------------------------------- fov_opt

#[derive(Debug, Clone, PartialEq)]
pub struct FovPoint {
    pub fov_deg: f64,
    pub mean_p_l: f64,
    /// Fraction of grid points with a complete footprint set.
    pub coverage: f64,
    /// √(mean B^L²) over the covered points.
    pub drmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FovResult {
    pub curve: Vec<FovPoint>,
    pub optimum_deg: f64,
}

/// Exhaustive search over `candidates`: maximum mean localization probability,
/// ties to the lower DRMSE, then the narrower FOV.
pub fn fov_optimization(scn: &Scenario, grid: &[Point2], candidates: &[f64]) -> Result<FovResult, ExperimentError> {
    if candidates.is_empty() {
        return Err(failed("fov_opt", "empty FOV candidate list"));
    }
    let curve: Vec<FovPoint> = candidates
        .par_iter()
        .map(|&fov| {
            let s = scn.with_lidal_fov(fov);
            let (mut p_sum, mut covered, mut b2) = (0.0, 0usize, 0.0);
            for &xy in grid {
                if let Ok(p) = localization_probability(&s, xy) {
                    p_sum += p;
                    covered += 1;
                    b2 += crlb_for(&s, xy).map(|r| r.b_l * r.b_l).unwrap_or(f64::INFINITY);
                }
            }
            let n = grid.len().max(1) as f64;
            FovPoint {
                fov_deg: fov,
                mean_p_l: p_sum / n,
                coverage: covered as f64 / n,
                drmse: if covered > 0 { (b2 / covered as f64).sqrt() } else { f64::INFINITY },
            }
        })
        .collect();
    let best = curve
        .iter()
        .min_by(|a, b| {
            let by_p = if (a.mean_p_l - b.mean_p_l).abs() <= 1e-12 { std::cmp::Ordering::Equal } else { b.mean_p_l.total_cmp(&a.mean_p_l) };
            by_p.then(a.drmse.total_cmp(&b.drmse)).then(a.fov_deg.total_cmp(&b.fov_deg))
        })
        .map(|p| p.fov_deg)
        .expect("nonempty curve");
    Ok(FovResult { curve, optimum_deg: best })
}

pub fn write_fov_opt(cfg: &Config, prov: &Provenance, out: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    let grid = generate_grid(&cfg.scenario, &cfg.settings.grid)?;
    let res = fov_optimization(&cfg.scenario, &grid, &cfg.settings.fov_candidates_deg)?;
    let path = out.join("fov_opt.csv");
    write_csv(
        &path,
        prov,
        &["fov_deg", "mean_P_L", "coverage", "drmse_m", "optimal"],
        res.curve.iter().map(|p| {
            vec![num(p.fov_deg), num(p.mean_p_l), num(p.coverage), num(p.drmse), (p.fov_deg == res.optimum_deg).to_string()]
        }),
    )?;
    Ok(vec![path])
}
