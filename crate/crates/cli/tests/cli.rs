use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kerr-jcm"))
}

fn run(args: &[&str], out_dir: &Path) -> Output {
    bin().args(args).env("KERR_JCM_OUT_DIR", out_dir).output().unwrap()
}

const SMALL: [&str; 6] = ["--mean-photons", "2", "--tmax", "5", "--samples", "60"];

#[test]
fn simulate_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut texts = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let path = dir.path().join(name);
        let mut args = vec!["simulate", "--chi1", "0.5", "--out", path.to_str().unwrap()];
        args.extend(SMALL);
        let out = run(&args, dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        texts.push(fs::read(&path).unwrap());
        assert!(dir.path().join(format!("{name}.meta.toml")).exists());
    }
    assert_eq!(texts[0], texts[1]);
    let text = String::from_utf8(texts[0].clone()).unwrap();
    assert!(text.starts_with("t,pop_e,pop_g,g2_12,n1,n2,residual_norm,residual_charge1,residual_charge2\n"));
    assert_eq!(text.lines().count(), 61);
}

#[test]
fn default_output_directory_from_env() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["simulate", "--engine", "series"];
    args.extend(SMALL);
    let out = run(&args, dir.path());
    assert!(out.status.success());
    assert!(dir.path().join("simulation.csv").exists());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("norm residual"));
}

#[test]
fn hierarchy_summary_reports_closure_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["simulate", "--engine", "hierarchy", "--closure-check", "--mean-photons", "1"];
    args.extend(&SMALL[2..]);
    let out = run(&args, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout).unwrap().contains("closure error"));
}

#[test]
fn validation_error_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["simulate", "--samples", "1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["simulate", "--chi1", "-1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn convergence_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["simulate", "--engine", "series", "--nmax", "8", "--samples", "10"], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "field = \"squeezed\"\nmean_photons = 1.0\nsamples = 20\ntmax = 2.0\nchi1 = 0.25\n").unwrap();
    let path = dir.path().join("s.csv");
    let out = run(
        &["simulate", "--config", cfg.to_str().unwrap(), "--samples", "30", "--out", path.to_str().unwrap()],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 31);
    let meta = fs::read_to_string(dir.path().join("s.csv.meta.toml")).unwrap();
    assert!(meta.contains("chi1 = 0.25"));
    assert!(meta.contains("squeezed_vacuum"));

    fs::write(&cfg, "colour = 3\n").unwrap();
    let out = run(&["simulate", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn compare_same_engine_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["compare", "--engines", "series,series"];
    args.extend(SMALL);
    let out = run(&args, dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("series vs series"));
    assert!(text.contains("0.0000e0"));
}

#[test]
fn sweep_writes_one_file_per_chi() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["sweep", "--chi", "0,0.5"];
    args.extend(SMALL);
    let out = run(&args, dir.path());
    assert!(out.status.success());
    assert!(dir.path().join("chi0.csv").exists());
    assert!(dir.path().join("chi0.5.csv").exists());
}

#[test]
fn presets_list_and_unknown() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["presets", "list"], dir.path());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["fig1", "fig2", "fig3"] {
        assert!(text.contains(name));
    }
    let out = run(&["presets", "run", "fig9"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn preset_run_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = run(&["presets", "run", "fig3", "--engine", "series", "--out", d.to_str().unwrap()], dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for chi in ["0", "0.5", "1"] {
        let name = format!("fig3_chi{chi}.csv");
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap());
    }
}
