use std::path::Path;
use std::process::{Command, Output};

fn dgp(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dgp"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("config.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn simulate_writes_truth_and_observations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "[truth]\nhorizon = 4\n");
    let out = dir.path().join("out");
    let res = dgp(&["simulate"], &cfg, &out);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));

    let truth = read(&out.join("truth.csv"));
    assert!(truth.starts_with("t,x,f_true\n"));
    assert_eq!(truth.lines().count(), 1 + 5 * 625);
    let obs = read(&out.join("observations.csv"));
    assert!(obs.starts_with("t,x,y\n"));
    assert_eq!(obs.lines().count(), 1 + 5 * 3);
    assert!(!out.join("errors.csv").exists());
}

#[test]
fn estimate_writes_filtered_estimates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "[truth]\nhorizon = 2\n[estimator]\nsizes = [9]\n[output]\nprobe_grid_size = 50\n");
    let out = dir.path().join("out");
    let res = dgp(&["estimate"], &cfg, &out);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let est = read(&out.join("estimate.csv"));
    assert!(est.starts_with("t,x,f_hat,var_hat\n"));
    assert_eq!(est.lines().count(), 1 + 3 * 50);
    for line in est.lines().skip(1) {
        let var: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(var >= -1e-10);
    }
    let errs = read(&out.join("errors.csv"));
    assert_eq!(errs.lines().count(), 1 + 3);
}

#[test]
fn sweep_reports_every_size_and_step() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "");
    let out = dir.path().join("out");
    let res = dgp(&["sweep", "--no-disturbance"], &cfg, &out);
    assert!(res.status.success());
    let errs = read(&out.join("errors.csv"));
    assert!(errs.starts_with("t,M,error_2norm\n"));
    assert_eq!(errs.lines().count(), 1 + 4 * 11);
    let sizes: Vec<&str> = errs.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(sizes[0], "3");
    assert_eq!(sizes[43], "91");
}

#[test]
fn seed_override_changes_the_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "[truth]\nhorizon = 1\n");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(dgp(&["simulate", "--seed", "1"], &cfg, &a).status.success());
    assert!(dgp(&["simulate", "--seed", "2"], &cfg, &b).status.success());
    assert_ne!(read(&a.join("truth.csv")), read(&b.join("truth.csv")));
}

#[test]
fn reduce_check_prints_one_line_per_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "");
    let res = dgp(&["reduce-check"], &cfg, &dir.path().join("out"));
    assert!(res.status.success());
    let stdout = String::from_utf8(res.stdout).unwrap();
    let names: Vec<&str> = stdout.lines().map(|l| l.split(' ').next().unwrap()).collect();
    assert_eq!(names, ["gp_dense", "gp_separable", "kf_dense", "separable_vs_dense"]);
    assert!(stdout.lines().all(|l| l.ends_with(" PASS") && l.split(' ').count() == 4));
}

#[test]
fn bad_config_fails_with_machine_readable_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "[truth]\nhorizn = 3\n");
    let res = dgp(&["simulate"], &cfg, &dir.path().join("out"));
    assert!(!res.status.success());
    let stderr = String::from_utf8(res.stderr).unwrap();
    assert!(stderr.starts_with("error kind=config"), "{stderr}");
    assert!(stderr.contains("horizn"));
}

#[test]
fn missing_config_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let res = dgp(&["sweep"], &dir.path().join("absent.toml"), &dir.path().join("out"));
    assert!(!res.status.success());
    assert!(String::from_utf8(res.stderr).unwrap().starts_with("error kind=io"));
}

#[test]
fn numerical_failure_names_the_module() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "[estimator]\nsizes = [91]\nquadrature_nodes = 100\n");
    let res = dgp(&["estimate"], &cfg, &dir.path().join("out"));
    assert!(!res.status.success());
    let stderr = String::from_utf8(res.stderr).unwrap();
    assert!(stderr.starts_with("error kind=numerical module=basis_projection"), "{stderr}");
}

#[test]
fn shipped_config_is_the_default() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/case_study.toml");
    let cfg = dgp::experiment::ExperimentConfig::load(&path).unwrap();
    assert_eq!(cfg, dgp::experiment::ExperimentConfig::default());
}
