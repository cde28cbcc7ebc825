use std::path::Path;
use std::process::{Command, Output};

fn levykin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levykin")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn header(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

const SMALL: [&str; 8] = ["--grid-n", "32", "--t-final", "0.1", "--dt", "0.01", "--set", "velocity.tail=16"];

#[test]
fn constants_as_csv() {
    let out = levykin(&["constants", "--alpha", "1.5"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("N,alpha,gamma,A,B,c_norm"));
    let values: Vec<f64> = lines.next().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
    assert!((values[2] - 0.3).abs() < 1e-12);
    assert!((values[3] - 1.3328649).abs() < 1e-7);
}

#[test]
fn config_errors_name_line_and_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "N = 1\nalpha = 1.5\ngrid.n = lots\n").unwrap();
    let out = levykin(&["constants", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("line 3") && err.contains("grid.n"), "{err}");

    let out = levykin(&["constants", "--set", "alpha=3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 0, key `alpha`"), "{}", stderr(&out));
}

#[test]
fn stochastic_runs_need_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.csv");
    let out = levykin(&["particles", "--output", path.to_str().unwrap(), "--n-particles", "100"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("key `seed`"), "{}", stderr(&out));
    assert!(!path.exists());
    assert!(!levykin(&["verify", "--only", "1"]).status.success());
}

#[test]
fn symbol_columns() {
    let out = levykin(&["symbol", "--epsilon", "0.1,0.05", "--k", "1", "--p", "1"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().next(), Some("epsilon,real,imag,limit_real,limit_imag,gap_real,gap_imag"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn equilibrium_quadrature_export() {
    let out = levykin(&["equilibrium", "--set", "velocity.core=4", "--set", "velocity.tail=4"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().next(), Some("v1,weight_plain,weight_m"));
    let mass: f64 = text.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap()).sum();
    assert!((mass - 1.0).abs() < 1e-12);
}

#[test]
fn kinetic_and_macro_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, name) in [("solve-kinetic", "kin.csv"), ("solve-macro", "mac.csv")] {
        let path = dir.path().join(name);
        let mut args = vec![cmd, "--epsilon", "0.1", "--snapshots", "0.05", "--output", path.to_str().unwrap()];
        args.extend(SMALL);
        let out = levykin(&args);
        assert!(out.status.success(), "{cmd}: {}", stderr(&out));
        assert_eq!(header(&path), "t,x,rho");
        let rows = std::fs::read_to_string(&path).unwrap().lines().count();
        assert_eq!(rows, 1 + 2 * 32, "{cmd}");
        let diag = dir.path().join(name.replace(".csv", "_diagnostics.csv"));
        assert!(header(&diag).starts_with("t,mass"), "{cmd}");
    }
    let out = levykin(&["solve-kinetic", "--epsilon", "0.1"]);
    assert!(stderr(&out).contains("output.path"));
}

#[test]
fn particle_histograms_and_quantiles() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.csv");
    let args = ["particles", "--seed", "3", "--epsilon", "0.1", "--n-particles", "2000", "--bins", "16", "--output"];
    let mut full = args.to_vec();
    full.push(path.to_str().unwrap());
    let out = levykin(&full);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(header(&path), "t,x,density");
    let quantiles = dir.path().join("p_quantiles.csv");
    assert_eq!(header(&quantiles), "t,p,dx,abs_displacement");
    let first = std::fs::read(&path).unwrap();
    assert!(levykin(&full).status.success());
    assert_eq!(std::fs::read(&path).unwrap(), first, "same seed, same histogram");
}

fn without_wall_time(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').unwrap().0.to_string())
        .collect()
}

#[test]
fn sweep_report_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let path = dir.path().join(name);
        let mut args = vec!["sweep", "--epsilon", "0.2,0.1,0.05", "--seed", "5", "--output", path.to_str().unwrap()];
        args.extend(SMALL);
        let out = levykin(&args);
        assert!(out.status.success(), "{}", stderr(&out));
        assert!(stdout(&out).contains("fitted rate"));
        assert_eq!(header(&path), "epsilon,rel_l2_error,mass_drift,micro_residual,wall_time_s");
        reports.push(path);
    }
    assert_eq!(without_wall_time(&reports[0]), without_wall_time(&reports[1]));
    let meta_a = std::fs::read(dir.path().join("a.json")).unwrap();
    let meta_b = std::fs::read(dir.path().join("b.json")).unwrap();
    let strip = |bytes: &[u8]| String::from_utf8_lossy(bytes).replace("b.csv", "a.csv");
    assert_eq!(strip(&meta_a), strip(&meta_b));
}

#[test]
fn verify_exit_status() {
    let out = levykin(&["verify", "--seed", "1", "--only", "1,4"]);
    assert!(out.status.success(), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.lines().any(|l| l.starts_with("[PASS] 1 ")));
    assert!(text.lines().any(|l| l.starts_with("[PASS] 4 ")));
    let out = levykin(&["verify", "--seed", "1", "--only", "9"]);
    assert_eq!(out.status.code(), Some(1));
}
