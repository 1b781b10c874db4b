use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use jacobi_spectra::experiment::{ExperimentConfig, ExperimentKind};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_jacobi-spectra"))
}

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run_cfg(cfg: &Path, out: &Path) -> Output {
    bin().arg("run").arg(cfg).arg("--output").arg(out).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn every_criterion_has_exactly_one_config() {
    let mut names: Vec<String> = fs::read_dir(configs_dir())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".cfg"))
        .collect();
    names.sort();
    let mut want: Vec<String> = (1..=10).map(|i| format!("crit{i}.cfg")).collect();
    want.sort();
    assert_eq!(names, want);
    for n in &names {
        let cfg = ExperimentConfig::from_file(&configs_dir().join(n)).unwrap();
        assert!(cfg.output.starts_with("out"), "{n}");
    }
    let kind = |i: u32| ExperimentConfig::from_file(&configs_dir().join(format!("crit{i}.cfg"))).unwrap().kind;
    assert_eq!(kind(1), ExperimentKind::Asymptotics);
    assert_eq!(kind(4), ExperimentKind::Localization);
    assert_eq!(kind(6), ExperimentKind::Trace);
    assert_eq!(kind(9), ExperimentKind::Validate);
}

#[test]
fn passing_run_exits_zero_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("nested/crit1");
    let o = run_cfg(&configs_dir().join("crit1.cfg"), &prefix);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("nested/crit1.csv")).unwrap();
    assert!(csv.starts_with("n,lambda,predictor,remainder,section_size\n"));
    assert_eq!(csv.lines().count(), 7);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("nested/crit1.summary.json")).unwrap()).unwrap();
    assert_eq!(json["passed"], true);
    assert_eq!(json["kind"], "asymptotics");
    assert_eq!(json["tolerances"]["slope_slack"], 0.1);
    let plot = fs::read_to_string(dir.path().join("nested/crit1.plot.dat")).unwrap();
    assert!(plot.lines().all(|l| l.split(' ').count() == 2));
}

#[test]
fn failing_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_cfg(&configs_dir().join("crit4.cfg"), &dir.path().join("c4"));
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn usage_and_config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&bin().output().unwrap()), 2);
    assert_eq!(code(&bin().arg("frobnicate").output().unwrap()), 2);
    assert_eq!(code(&run_cfg(&dir.path().join("missing.cfg"), &dir.path().join("o"))), 2);
    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "[experiment]\nkind = residual\noutput = o\n").unwrap();
    let o = run_cfg(&bad, &dir.path().join("o"));
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("[model]"));
    assert_eq!(code(&bin().args(["emit-plot", "/nonexistent.csv", "x"]).output().unwrap()), 2);
}

#[test]
fn runtime_errors_name_the_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.cfg");
    fs::write(
        &cfg,
        "[model]\ngamma = 0.5\na1 = 0.5\nv = 0.1, -0.1\n[grid]\nn = 2, 64\n[experiment]\nkind = trace\noutput = o\n",
    )
    .unwrap();
    let o = run_cfg(&cfg, &dir.path().join("o"));
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("at n=2"), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn validate_subcommand_passes() {
    let o = bin().arg("validate").output().unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.lines().count() > 20);
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn identical_configs_give_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    for cfg in ["crit2.cfg", "crit6.cfg"] {
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        run_cfg(&configs_dir().join(cfg), &a);
        run_cfg(&configs_dir().join(cfg), &b);
        let ra = fs::read(dir.path().join("a.csv")).unwrap();
        let rb = fs::read(dir.path().join("b.csv")).unwrap();
        assert!(!ra.is_empty());
        assert_eq!(ra, rb, "{cfg}");
        assert_eq!(
            fs::read(dir.path().join("a.summary.json")).unwrap(),
            fs::read(dir.path().join("b.summary.json")).unwrap()
        );
    }
}

#[test]
fn emit_plot_reads_a_column() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("c6");
    assert_eq!(code(&run_cfg(&configs_dir().join("crit6.cfg"), &prefix)), 0);
    let o = bin().arg("emit-plot").arg(dir.path().join("c6.csv")).arg("vdiag_max").output().unwrap();
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let xs: Vec<i64> = text.lines().map(|l| l.split(' ').next().unwrap().parse().unwrap()).collect();
    assert_eq!(xs, vec![32, 64, 128, 256, 512, 1024]);
    let o = bin().arg("emit-plot").arg(dir.path().join("c6.csv")).arg("nope").output().unwrap();
    assert_eq!(code(&o), 2);
}
