use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fkepler(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fkepler")).args(args).arg("--out").arg(out).output().unwrap()
}

fn summary_value(out: &Path, key: &str) -> String {
    let text = fs::read_to_string(out.join("summary.txt")).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")).map(str::to_string))
        .unwrap_or_else(|| panic!("{key} missing"))
}

#[test]
fn verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = fkepler(&["verify"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("verify.zeta0_action = pass"));
}

#[test]
fn arcs_between_orthogonal_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let o = fkepler(&["arcs"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    for name in ["direct", "indirect"] {
        let a: f64 = summary_value(dir.path(), &format!("arcs.{name}.action")).parse().unwrap();
        assert!(a < 5.6568542);
        let csv = fs::read_to_string(dir.path().join(format!("arc_{name}.csv"))).unwrap();
        assert!(csv.starts_with("t,xi1,xi2,v1,v2\n"));
    }
}

#[test]
fn minimize_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# unforced\nperiod = 6.283185307179586\nminimize.winding = 1\nminimize.starts = 2\n").unwrap();
    let out = dir.path().join("out");
    let o = fkepler(&["minimize", "--config", cfg.to_str().unwrap(), "--seed", "3"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(summary_value(&out, "config.seed"), "3");
    let a: f64 = summary_value(&out, "minimize.action.total").parse().unwrap();
    assert!((a / 9.4247780 - 1.0).abs() < 1e-2);
    assert!(out.join("trajectory.csv").exists() && out.join("timing.txt").exists());
}

#[test]
fn certificate_failure_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "analysis.n = 16384\nanalysis.deltas = 0.1,0.05\n").unwrap();
    let out = dir.path().join("out");
    let o = fkepler(&["analyze", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(summary_value(&out, "analyze.certificate.direction_limit_ok"), "false");
    let csv = fs::read_to_string(out.join("blowup_e0_d1.csv")).unwrap();
    assert!(csv.starts_with("t,z1,z2\n"));
}

#[test]
fn radial_orbit_is_certified() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "analysis.source = radial\nanalysis.n = 16384\nanalysis.deltas = 0.1\n").unwrap();
    let o = fkepler(&["analyze", "--config", cfg.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn surgery_on_coincident_directions_is_not_applicable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "analysis.n = 16384\nanalysis.dir_plus = 1,0\n").unwrap();
    let out = dir.path().join("out");
    let o = fkepler(&["surgery", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(summary_value(&out, "surgery.event0.delta0.applicable"), "false");
}

#[test]
fn analyze_reads_trajectory_files() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    assert_eq!(fkepler(&["minimize"], &first).status.code(), Some(0));
    let cfg = dir.path().join("run.cfg");
    let traj = first.join("trajectory.csv");
    fs::write(&cfg, format!("analysis.source = file\nanalysis.path = {}\n", traj.display())).unwrap();
    let out = dir.path().join("second");
    let o = fkepler(&["analyze", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(summary_value(&out, "analyze.certificate.events"), "0");
}

#[test]
fn errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "minimize.winding = 0\n").unwrap();
    let o = fkepler(&["minimize", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("minimize.winding"));
    let o = fkepler(&["verify", "--config", dir.path().join("missing.cfg").to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
}
