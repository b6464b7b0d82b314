//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use owcsim::crlb::{crlb_map, percentile, JacobianForm, PowerModel};
use owcsim::gf256::Gf256;
use owcsim::harness::experiments::{crlb_rows, grouping, success_prob_rows, sum_rate_rows};
use owcsim::harness::{generate_grid, Config};
use owcsim::lidal::observe;
use owcsim::noma::{grpa_allocation, group_sum_rate, noma_success, rlnc_noma_success, CsiMode, NomaParams, UserState};
use owcsim::rlnc::{Decoder, Encoder, Generation};
use owcsim::scenario::Point2;

type Outcome = Result<String, String>;

struct Suite {
    failed: Vec<u32>,
}

impl Suite {
    fn check(&mut self, n: u32, name: &str, budget_s: f64, f: impl FnOnce() -> Outcome) {
        let t = Instant::now();
        let res = f();
        let dt = t.elapsed().as_secs_f64();
        let (ok, detail) = match res {
            Ok(d) if dt <= budget_s => (true, d),
            Ok(d) => (false, format!("{d}; over the {budget_s} s budget")),
            Err(d) => (false, d),
        };
        println!("criterion {n:>2} {} {name}: {detail} [{dt:.2} s]", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failed.push(n);
        }
    }
}

fn within_3se(analytic: f64, hits: usize, n: usize) -> (bool, f64, f64) {
    let p = hits as f64 / n as f64;
    let se = (analytic * (1.0 - analytic) / n as f64).sqrt();
    ((p - analytic).abs() <= 3.0 * se + 1e-12, p, se)
}

fn gf_field() -> Outcome {
    for a in 1..=255u8 {
        let a = Gf256(a);
        let inv = a.inv().map_err(|e| format!("{a:?}: {e}"))?;
        if a * inv != Gf256::ONE {
            return Err(format!("{a:?} * {inv:?} != 1"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10_000 {
        let (a, b, c) = (Gf256(rng.random()), Gf256(rng.random()), Gf256(rng.random()));
        if a * (b + c) != a * b + a * c {
            return Err(format!("distributivity fails at {a:?} {b:?} {c:?}"));
        }
    }
    Ok("255 inverses, 10^4 distributive triples".into())
}

fn rlnc_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for f in 1..=8usize {
        for len in [1usize, 16, 1024] {
            for _ in 0..4 {
                let data: Vec<u8> = (0..f * len).map(|_| rng.random()).collect();
                let gen = Generation::from_stream(&data, f).map_err(|e| e.to_string())?;
                let mut enc = Encoder::new(&gen, rng.random());
                let mut dec = Decoder::new(f, len);
                while !dec.is_complete() {
                    dec.ingest(&enc.next_packet()).map_err(|e| e.to_string())?;
                }
                if dec.decode_generation().map_err(|e| e.to_string())? != data {
                    return Err(format!("byte mismatch at f={f}, len={len}"));
                }
            }
        }
    }
    let trials = 100_000;
    let mut worst = String::new();
    for f in 1..=8usize {
        let expect: f64 = (1..=f as i32).map(|j| 1.0 - 256f64.powi(-j)).product();
        let gen = Generation::new((0..f).map(|i| vec![i as u8]).collect()).map_err(|e| e.to_string())?;
        let mut hits = 0;
        for t in 0..trials {
            let mut enc = Encoder::new(&gen, (f as u64) << 32 | t as u64);
            let mut dec = Decoder::new(f, 1);
            for _ in 0..f {
                dec.ingest(&enc.next_packet()).map_err(|e| e.to_string())?;
            }
            hits += dec.is_complete() as usize;
        }
        let (ok, p, se) = within_3se(expect, hits, trials);
        if !ok {
            return Err(format!("f={f}: rate {p} vs {expect} (se {se:.2e})"));
        }
        if f == 8 {
            worst = format!("f=8 rate {p:.5} vs {expect:.5}");
        }
    }
    Ok(format!("f 1..8 x len {{1,16,1024}} byte-exact; {worst}"))
}

fn rlnc_vs_simulation() -> Outcome {
    let (f, tau, users, trials) = (3usize, 4usize, 2usize, 100_000usize);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut report = Vec::new();
    for delta in [0.1, 0.3, 0.5, 0.7] {
        let d = vec![delta; users];
        let (mut hr, mut hn) = (0, 0);
        for _ in 0..trials {
            let mut rlnc = true;
            let mut plain = true;
            for _ in 0..users {
                let got = (0..tau).filter(|_| rng.random::<f64>() >= delta).count();
                rlnc &= got >= f;
                plain &= (0..f).all(|_| rng.random::<f64>() >= delta);
            }
            hr += rlnc as usize;
            hn += plain as usize;
        }
        for (name, a, h) in [("rlnc", rlnc_noma_success(&d, f, tau), hr), ("plain", noma_success(&d, f), hn)] {
            let (ok, p, se) = within_3se(a, h, trials);
            if !ok {
                return Err(format!("{name} at delta={delta}: {p} vs {a} (se {se:.2e})"));
            }
        }
        report.push(format!("{delta}"));
    }
    Ok(format!("delta in {{{}}} within 3 se", report.join(", ")))
}

fn scheme_ordering(cfg: &Config) -> Outcome {
    let mut cfg = cfg.clone();
    cfg.settings.success_mc_trials = 1;
    let rows = success_prob_rows(&cfg, 4).map_err(|e| e.to_string())?;
    let mut alphas: Vec<f64> = rows.iter().filter(|r| r.feasible).map(|r| r.alpha).collect();
    alphas.dedup();
    let mut bad = Vec::new();
    for &a in &alphas {
        let v = |s: &str| rows.iter().find(|r| r.alpha == a && r.scheme == s).map(|r| r.analytic).unwrap_or(f64::NAN);
        let (rn, n, ro, o) = (v("rlnc_noma"), v("noma"), v("rlnc_oma"), v("oma"));
        if !(rn >= ro && ro >= o && rn >= n) {
            bad.push(format!("{a} (rlnc_noma {rn:.4}, noma {n:.4}, rlnc_oma {ro:.4}, oma {o:.4})"));
        }
    }
    if alphas.is_empty() {
        return Err("no feasible alpha".into());
    }
    if bad.is_empty() {
        Ok(format!("{} feasible alphas, ordering holds", alphas.len()))
    } else {
        Err(format!("ordering violated at {} of {} feasible alphas: {}", bad.len(), alphas.len(), bad.join("; ")))
    }
}

fn jacobians(cfg: &Config) -> Outcome {
    let scn = &cfg.scenario;
    let grid = generate_grid(scn, &cfg.settings.grid).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let xy = grid[rng.random_range(0..grid.len())];
        let model = PowerModel::for_target(scn, xy);
        let h = 1e-5;
        let jp = model.jacobian_wrt_position(xy, JacobianForm::Exact);
        for c in 0..2 {
            let e = if c == 0 { Point2::new(h, 0.0) } else { Point2::new(0.0, h) };
            let fd = (model.power_vector(xy + e) - model.power_vector(xy - e)) / (2.0 * h);
            worst = worst.max((jp.column(c) - &fd).norm() / jp.norm());
        }
        let l: Vec<f64> = model.tx.iter().map(|t| (xy - t).norm()).collect();
        let jl = model.jacobian_wrt_distance(xy, JacobianForm::Exact);
        for c in 0..l.len() {
            let (mut up, mut dn) = (l.clone(), l.clone());
            up[c] += h;
            dn[c] -= h;
            let fd = (model.power_from_distances(&up) - model.power_from_distances(&dn)) / (2.0 * h);
            worst = worst.max((jl.column(c) - &fd).norm() / jl.norm());
        }
    }
    if worst < 1e-6 {
        Ok(format!("max relative error {worst:.2e} over 50 points"))
    } else {
        Err(format!("max relative error {worst:.2e}"))
    }
}

fn noise_free_localization(cfg: &Config) -> Outcome {
    let scn = &cfg.scenario;
    let grid = generate_grid(scn, &cfg.settings.grid).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    let mut ok = 0;
    for &xy in &grid {
        match observe::<ChaCha8Rng>(scn, xy, None) {
            Ok(o) => {
                let e = (o.estimate.xy() - xy).norm();
                worst = worst.max(e);
                ok += (e < 5e-3) as usize;
            }
            Err(e) => return Err(format!("{xy:?}: {e}")),
        }
    }
    if ok == grid.len() {
        Ok(format!("{ok}/{} within 5 mm, worst {:.2} mm", grid.len(), worst * 1e3))
    } else {
        Err(format!("{ok}/{} within 5 mm, worst {:.2} mm", grid.len(), worst * 1e3))
    }
}

fn crlb_headline(cfg: &Config) -> Outcome {
    let scn = &cfg.scenario;
    let grid = generate_grid(scn, &cfg.settings.grid).map_err(|e| e.to_string())?;
    let res = crlb_map(scn, &grid).map_err(|e| e.to_string())?;
    let b: Vec<f64> = res.iter().map(|r| r.b_l).collect();
    let p95 = percentile(&b, 95.0);
    let msg = format!("p95 B^L = {p95:.4} m over {} points", b.len());
    if (0.04..=0.06).contains(&p95) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn crlb_lower_bound(cfg: &Config) -> Outcome {
    let rows = crlb_rows(cfg, 8).map_err(|e| e.to_string())?;
    let eligible: Vec<_> =
        rows.iter().filter(|r| r.b_l.is_finite() && r.rmse.is_finite() && r.bias < 0.1 * r.rmse).collect();
    let above = eligible.iter().filter(|r| r.rmse >= r.b_l).count();
    if eligible.is_empty() {
        return Err("no grid point with bias below 10% of RMSE".into());
    }
    let frac = above as f64 / eligible.len() as f64;
    let msg = format!("RMSE >= B^L at {above}/{} low-bias points ({:.1}%)", eligible.len(), frac * 100.0);
    if frac >= 0.95 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn grouping_partition(cfg: &Config) -> Outcome {
    let (grid, ga) = grouping(cfg).map_err(|e| e.to_string())?;
    let mut seen = vec![0usize; grid.len()];
    for g in &ga.groups {
        for &u in &g.members {
            seen[u] += 1;
        }
    }
    if let Some(u) = seen.iter().position(|&c| c != 1) {
        return Err(format!("user {u} appears {} times", seen[u]));
    }
    let shares = ga.shares(cfg.scenario.ap_count());
    let (lo, hi) = shares.iter().fold((1.0f64, 0.0f64), |(a, b), &s| (a.min(s), b.max(s)));
    let msg = format!("full partition of {} users; shares {:.2}%..{:.2}%", grid.len(), lo * 100.0, hi * 100.0);
    if lo >= 0.1032 - 0.02 && hi <= 0.1587 + 0.02 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn sum_rate_ordering(cfg: &Config) -> Outcome {
    let rows = sum_rate_rows(cfg).map_err(|e| e.to_string())?;
    let n = rows.len() / 3;
    for loc in rows.chunks(3) {
        let r = |m: CsiMode| loc.iter().find(|x| x.mode == m).map(|x| x.sum_rate).unwrap_or(f64::NAN);
        let (p, i, l) = (r(CsiMode::Perfect), r(CsiMode::Imperfect), r(CsiMode::LidalApprox));
        if !(i <= l && l <= p) {
            return Err(format!("location {}: imperfect {i}, lidal {l}, perfect {p}", loc[0].location_id));
        }
    }
    // zero error bound: the LiDAL-approximated CSI collapses onto the true CSI
    let scn = &cfg.scenario;
    let prm = NomaParams::from_scenario(scn);
    let (grid, ga) = grouping(cfg).map_err(|e| e.to_string())?;
    for g in &ga.groups {
        let users: Vec<UserState> = g.members.iter().map(|&u| UserState::new(scn, u, grid[u], g.ap, 0.0)).collect();
        let est: Vec<f64> = users.iter().map(|u| u.gain(CsiMode::Imperfect)).collect();
        let alloc = grpa_allocation(&est, &prm).map_err(|e| e.to_string())?;
        let a = group_sum_rate(&users, &alloc, CsiMode::LidalApprox, &prm).map_err(|e| e.to_string())?;
        let b = group_sum_rate(&users, &alloc, CsiMode::Perfect, &prm).map_err(|e| e.to_string())?;
        if a != b {
            return Err(format!("group {}: B^L = 0 gives {a} vs perfect {b}", g.id));
        }
    }
    Ok(format!("imperfect <= lidal_approx <= perfect at all {n} locations; exact at B^L = 0"))
}

fn files_identical(a: &Path, b: &Path) -> Result<usize, String> {
    let mut names: Vec<_> = std::fs::read_dir(a).map_err(|e| e.to_string())?.map(|e| e.unwrap().file_name()).collect();
    names.sort();
    let mut other: Vec<_> = std::fs::read_dir(b).map_err(|e| e.to_string())?.map(|e| e.unwrap().file_name()).collect();
    other.sort();
    if names != other {
        return Err("bundles list different files".into());
    }
    for n in &names {
        if std::fs::read(a.join(n)).ok() != std::fs::read(b.join(n)).ok() {
            return Err(format!("{} differs", n.to_string_lossy()));
        }
    }
    Ok(names.len())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let exe = env!("CARGO_BIN_EXE_owcsim");
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let st = Command::new(exe)
            .args(["run-all", "--seed", "11", "--out"])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        if !st.status.success() {
            return Err(format!("run-all exited with {}: {}", st.status, String::from_utf8_lossy(&st.stderr)));
        }
    }
    let n = files_identical(&dir.path().join("a"), &dir.path().join("b"))?;
    Ok(format!("{n} files byte-identical across two runs"))
}

fn main() -> ExitCode {
    let cfg = Config::bundled();
    let mut s = Suite { failed: Vec::new() };
    s.check(1, "GF(2^8) field", 1.0, gf_field);
    s.check(2, "RLNC round trip and decode rate", 30.0, rlnc_round_trip);
    s.check(3, "success probabilities vs packet simulation", 60.0, rlnc_vs_simulation);
    s.check(4, "scheme ordering over the alpha sweep", f64::INFINITY, || scheme_ordering(&cfg));
    s.check(5, "Jacobians vs finite differences", 5.0, || jacobians(&cfg));
    s.check(6, "noise-free localization", 60.0, || noise_free_localization(&cfg));
    s.check(7, "CRLB 95th percentile", 10.0, || crlb_headline(&cfg));
    s.check(8, "CRLB below empirical RMSE", 600.0, || crlb_lower_bound(&cfg));
    s.check(9, "grouping partition and AP shares", 5.0, || grouping_partition(&cfg));
    s.check(10, "sum-rate ordering across CSI modes", 30.0, || sum_rate_ordering(&cfg));
    s.check(11, "run-all determinism", f64::INFINITY, determinism);
    if s.failed.is_empty() {
        println!("acceptance: all 11 criteria PASS");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILED criteria {:?}", s.failed);
        ExitCode::FAILURE
    }
}
