use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_consensus-sim"))
}

fn scenarios() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().unwrap()
}

fn write_scenario(dir: &Path, name: &str, body: &str) -> PathBuf {
    let s = scenarios();
    let text = format!(
        "name = \"{name}\"\nmodel = \"{}\"\ngraph = \"{}\"\n{body}",
        s.join("models/double_integrator.txt").display(),
        s.join("graphs/demo6.txt").display()
    );
    let path = dir.join(format!("{name}.toml"));
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn simulate_writes_trace_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = scenarios().join("manifold.toml");
    let o = run(&["simulate", "--scenario", sc.to_str().unwrap(), "--t-end", "2"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = tmp.path().join("manifold");
    for f in ["trace.csv", "trace.meta", "report.txt", "report.csv"] {
        assert!(dir.join(f).is_file(), "{f}");
    }
    let mut rdr = csv::Reader::from_path(dir.join("trace.csv")).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header[0], "t");
    assert_eq!(header.last().unwrap(), "norm_xi");
    assert!(header.contains(&"x[1][0]".to_string()));
    assert!(header.contains(&"d[1]".to_string()));
    let col = header.iter().position(|h| h == "norm_xi").unwrap();
    let mut rows = 0;
    for rec in rdr.records() {
        let v: f64 = rec.unwrap()[col].parse().unwrap();
        assert_eq!(v, 0.0);
        rows += 1;
    }
    assert!(rows > 10);
    let meta = std::fs::read_to_string(dir.join("trace.meta")).unwrap();
    assert!(meta.contains("seed"));
}

#[test]
fn flags_override_file_values() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = scenarios().join("leaderless6.toml");
    let o = run(
        &["simulate", "--scenario", sc.to_str().unwrap(), "--dt", "0.01", "--t-end", "1"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let mut rdr = csv::Reader::from_path(tmp.path().join("leaderless6/trace.csv")).unwrap();
    let last = rdr.records().last().unwrap().unwrap();
    let t: f64 = last[0].parse().unwrap();
    assert!((t - 1.0).abs() < 1e-12);
}

#[test]
fn design_round_trip_is_lossless() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = scenarios().join("leaderless6.toml");
    let o = run(&["design", "--scenario", sc.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let first = tmp.path().join("leaderless6/gains.txt");
    let again = write_scenario(
        tmp.path(),
        "again",
        &format!("protocol = \"leaderless-c\"\ngains_file = \"{}\"\n", first.display()),
    );
    let o = run(&["design", "--scenario", again.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let a = std::fs::read(&first).unwrap();
    let b = std::fs::read(tmp.path().join("again/gains.txt")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn batch_runs_write_separate_directories() {
    let tmp = tempfile::tempdir().unwrap();
    let s = scenarios();
    let a = s.join("manifold.toml");
    let b = s.join("leaderless6-b.toml");
    let o = run(
        &["simulate", "--scenario", a.to_str().unwrap(), "--scenario", b.to_str().unwrap(), "--t-end", "1"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(tmp.path().join("manifold/trace.csv").is_file());
    assert!(tmp.path().join("leaderless6-b/trace.csv").is_file());

    let o = run(&["report"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let mut rdr = csv::Reader::from_path(tmp.path().join("summary.csv")).unwrap();
    assert_eq!(&rdr.headers().unwrap()[0], "scenario");
    assert_eq!(rdr.records().count(), 2);
}

#[test]
fn exit_code_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--scenario", "/nonexistent/x.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(2));

    let bad_key = write_scenario(tmp.path(), "badkey", "protocol = \"leaderless-c\"\nspeed = 3\n");
    let o = run(&["simulate", "--scenario", bad_key.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(2));

    let bad_d = write_scenario(
        tmp.path(),
        "badd",
        "protocol = \"leaderless-c\"\n[initial]\nd = [-1.0, 1.0, 1.0, 1.0, 1.0, 1.0]\n",
    );
    let o = run(&["simulate", "--scenario", bad_d.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("d[0]"));

    let o = run(&["report"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn exit_code_failed_certificate() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = write_scenario(tmp.path(), "badk", "protocol = \"leaderless-c\"\n[gains]\nK = [[1.0, 1.0]]\n");
    let o = run(&["check", "--scenario", sc.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL A+BK Hurwitz"));
}

#[test]
fn exit_code_divergence() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = write_scenario(
        tmp.path(),
        "div",
        "protocol = \"leaderless-c\"\n[sim]\ndt = 2.0\nt_end = 4000.0\n",
    );
    let o = run(&["simulate", "--scenario", sc.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(4));
    assert!(tmp.path().join("div/last_finite_state.txt").is_file());
}

#[test]
fn bound_is_not_applicable_to_asymptotic_protocols() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = scenarios().join("leaderless6.toml");
    let o = run(&["bound", "--scenario", sc.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(2));

    let sc = scenarios().join("scalar.toml");
    let o = run(&["bound", "--scenario", sc.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(tmp.path().join("scalar/bound.txt")).unwrap();
    assert!(text.contains("bound_sq"));
}

#[test]
fn design_with_fixed_s_reproduces_observer_gain() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = scenarios().join("leaderless6-fixed.toml");
    let o = run(&["design", "--scenario", sc.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let gains = adaptive_consensus::gains::GainSet::from_file(tmp.path().join("leaderless6-fixed/gains.txt")).unwrap();
    let f = gains.f.unwrap();
    assert!((f[(0, 0)] + 2.5628).abs() < 1e-3 && (f[(1, 0)] + 0.8543).abs() < 1e-3, "{f:?}");
    let cert = std::fs::read_to_string(tmp.path().join("leaderless6-fixed/certificate.txt")).unwrap();
    assert!(cert.lines().all(|l| l.starts_with("PASS")), "{cert}");
}
