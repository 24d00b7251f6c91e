use filtnoise::io::{read_csv, verify_manifest, MANIFEST_NAME};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_filtnoise"))
}

fn run(args: &[&str], cfg: &Path, out: &Path) -> Output {
    bin().args(args)
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn write_cfg(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

const SMALL_DNS: &str = "seed = 11
[solver]
n = 64
nu = 0.01
alpha = 0.5
dt = 0.01
[forcing]
k_f = 8
epsilon = 1.0
[run]
duration = 2.0
spin_up = 1.0
max_spin_up = 1.0
sample_every = 2
modes = 1,0; 3,4; 8,0
";

#[test]
fn dns_run_writes_outputs_and_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "dns.cfg", SMALL_DNS);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run(&["dns", "run"], &cfg, out);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let files = [
        "snapshot.bin",
        "spectrum.csv",
        "energy.csv",
        "run.json",
        "modes/mode_1_0.csv",
        "modes/mode_3_4.csv",
        "modes/mode_8_0.csv",
    ];
    for f in files {
        let x = std::fs::read(a.join(f)).unwrap();
        let y = std::fs::read(b.join(f)).unwrap();
        assert!(x == y, "{f} differs between identical runs");
    }
    assert!(a.join(MANIFEST_NAME).exists());
    assert!(verify_manifest(&a).unwrap().is_empty());
    let series = read_csv(&a.join("modes/mode_3_4.csv")).unwrap();
    assert_eq!(series.rows.len(), 101);
}

#[test]
fn seed_flag_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "dns.cfg", SMALL_DNS);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run(&["dns", "run"], &cfg, &a).status.success());
    assert!(run(&["dns", "run", "--seed", "12"], &cfg, &b).status.success());
    assert_ne!(std::fs::read(a.join("spectrum.csv")).unwrap(), std::fs::read(b.join("spectrum.csv")).unwrap());
}

#[test]
fn invalid_grid_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "dns.cfg", &SMALL_DNS.replace("n = 64", "n = 100"));
    let o = run(&["dns", "run"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
}

#[test]
fn missing_seed_and_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "noseed.cfg", "[solver]\nn = 32\n");
    assert_eq!(run(&["dns", "run"], &cfg, dir.path()).status.code(), Some(2));
    let missing = dir.path().join("absent.cfg");
    assert_eq!(run(&["dns", "run"], &missing, dir.path()).status.code(), Some(4));
    let bad = write_cfg(dir.path(), "bad.cfg", "seed = 1\n[solver\n");
    assert_eq!(run(&["dns", "run"], &bad, dir.path()).status.code(), Some(2));
}

#[test]
fn diag_with_no_inputs_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "diag.cfg", "seed = 1\n[diag]\ninputs =\n");
    let o = run(&["diag", "run"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn corrupted_series_reports_line_and_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("t,re\n");
    for i in 0..50 {
        text.push_str(&format!("{},{}\n", i as f64 * 0.1, (i as f64).sin()));
    }
    text.push_str("5.0,oops\n");
    std::fs::write(dir.path().join("bad.csv"), text).unwrap();
    let cfg = write_cfg(dir.path(), "diag.cfg", "seed = 1\n[diag]\ninputs = bad.csv\n");
    let o = run(&["diag", "run"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(4));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("52"), "{err}");
}

#[test]
fn diag_then_collapse() {
    let dir = tempfile::tempdir().unwrap();
    let synth = write_cfg(
        dir.path(),
        "synth.cfg",
        "seed = 4\n[synth]\nk_max = 8\nenergy = 1.0\ntau = 0.5\npaths = 16\ndt = 0.025\nhorizon = 2000\n",
    );
    let o = run(&["synth", "build"], &synth, &dir.path().join("s"));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("s/field.json").exists());
    let diag = write_cfg(dir.path(), "diag.cfg", "seed = 4\n[diag]\ninputs = s/paths\n");
    let o = run(&["diag", "run"], &diag, &dir.path().join("d"));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut counts = std::collections::BTreeMap::<String, usize>::new();
    for i in 0..16 {
        let d = json(&dir.path().join(format!("d/diag/path_{i}.json")));
        let tau = d["tau"].as_f64().unwrap();
        assert!((tau - 0.5).abs() < 0.1, "path {i}: tau = {tau}");
        *counts.entry(d["beta_star"].as_str().unwrap().to_string()).or_default() += 1;
    }
    // Large finite smoothness is within sampling noise of the Gaussian, so
    // the self-fit is checked as the dominant answer over an ensemble.
    let inf = counts.get("inf").copied().unwrap_or(0);
    assert!(inf >= 8 && counts.values().all(|&c| c <= inf), "{counts:?}");
    assert!(dir.path().join("d/cross_correlation.json").exists());
    let rep = write_cfg(dir.path(), "rep.cfg", "seed = 4\n[report]\ninputs = d/diag\n");
    let o = run(&["report", "collapse"], &rep, &dir.path().join("r"));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!read_csv(&dir.path().join("r/collapse.csv")).unwrap().rows.is_empty());
}

#[test]
fn white_noise_dispersion_is_diffusive() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "white.cfg",
        "seed = 2
[synth]
k_max = 14
energy = 1.0
tau = 0.01
[tracer]
field = white
trajectories = 4000
realizations = 400
dt = 0.001
horizon = 0.6
record_every = 1
",
    );
    let o = run(&["tracer", "disperse"], &cfg, &dir.path().join("out"));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&dir.path().join("out/regime.json"));
    let long = r["slope_long"].as_f64().unwrap();
    assert!((0.9..=1.1).contains(&long), "slope_long = {long}");
}

#[test]
fn constant_field_is_flagged_ballistic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "const.cfg",
        "seed = 2\n[tracer]\nfield = constant\ntau = 1.0\nu0 = 1,0\ntrajectories = 10\ndt = 0.01\nhorizon = 60\n",
    );
    let o = run(&["tracer", "disperse"], &cfg, &dir.path().join("out"));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&dir.path().join("out/regime.json"));
    assert_eq!(r["note"].as_str(), Some("ballistic only"));
    assert_eq!(r["pass"].as_bool(), Some(false));
}

#[test]
fn predict_requires_tau() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "p.cfg", "seed = 2\n[synth]\nenergy = 1.0\n");
    let o = run(&["tracer", "predict"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("synth.tau"));
}

#[test]
fn predict_reports_both_regimes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "p.cfg", "seed = 2\n[synth]\nenergy = 1.0\ntau = 0.5\n[tracer]\ndt = 0.001\nhorizon = 50\n");
    let o = run(&["tracer", "predict"], &cfg, &dir.path().join("out"));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&dir.path().join("out/regime.json"));
    assert_eq!(r["pass"].as_bool(), Some(true), "{r}");
    assert!(verify_manifest(&dir.path().join("out")).unwrap().is_empty());
}
