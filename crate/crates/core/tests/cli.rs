use std::fs;
use std::process::Command;

fn owcsim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_owcsim"))
}

const CFG: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/table1.cfg");

#[test]
fn validate_config_accepts_bundled_and_rejects_broken() {
    let ok = owcsim().args(["validate-config", CFG]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    let text = fs::read_to_string(CFG).unwrap().replace("half_power_semi_angle_deg = 75.0", "half_power_semi_angle_deg = 95.0");
    fs::write(&bad, text).unwrap();
    let out = owcsim().arg("validate-config").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    let missing = owcsim().args(["validate-config", "/nonexistent.cfg"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn grid_command_prints_378_points() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("grid.toml");
    fs::write(&spec, "spacing_m = 0.3\nmargin_m = 0.05\n").unwrap();
    let out = owcsim().arg("grid").arg("--spec").arg(&spec).output().unwrap();
    assert!(out.status.success());
    let s = String::from_utf8(out.stdout).unwrap();
    assert!(s.starts_with("# points=378\n"));
    assert_eq!(s.lines().count(), 380);

    fs::write(&spec, "spacing_m = 0.1\nmargin_m = 0.05\n").unwrap();
    let out = owcsim().arg("grid").arg("--spec").arg(&spec).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_writes_headed_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = owcsim()
        .args(["run", "grouping_map", "--config", CFG, "--seed", "3", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("grouping_map.csv")).unwrap();
    let mut lines = csv.lines();
    let head = lines.next().unwrap();
    assert!(head.starts_with("# experiment=grouping_map seed=3 config_sha256="));
    assert_eq!(lines.next().unwrap(), "x,y,assigned_ap,class,pair_id,order,B_L_m");
    assert_eq!(lines.count(), 378);
}

#[test]
fn unknown_experiment_is_an_experiment_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = owcsim().args(["run", "bogus", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
