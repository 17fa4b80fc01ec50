use std::path::Path;
use std::process::Command;

fn bin(out: &Path, threads: usize, args: &[&str]) -> (i32, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_bischrodinger"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("RAYON_NUM_THREADS", threads.to_string())
        .output()
        .unwrap();
    (o.status.code().unwrap(), String::from_utf8_lossy(&o.stdout).into_owned())
}

fn report(out: &Path, cmd: &str) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(out.join(format!("{cmd}.json"))).unwrap()).unwrap()
}

#[test]
fn classify_passes_and_writes_a_report() {
    let d = tempfile::tempdir().unwrap();
    let (code, stdout) = bin(d.path(), 1, &["classify", "--potential", "free", "--half-width", "10", "--n", "256"]);
    assert_eq!(code, 0, "{stdout}");
    let r = report(d.path(), "classify");
    assert_eq!(r["command"], "classify");
    assert_eq!(r["pass"], true);
    assert_eq!(r["grid"]["n"], 256);
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
    assert!(r["tolerances"].is_object());
    assert!(d.path().join("classify.csv").exists());
}

#[test]
fn config_errors_exit_two() {
    let d = tempfile::tempdir().unwrap();
    for args in [
        &["frobnicate"][..],
        &["classify", "--potential", "nonsense"],
        &["classify", "--n", "15"],
        &["classify", "--set", "grid.nope=3"],
        &["weights", "--weight", "power:x"],
        &["selftest", "--only", "11"],
    ] {
        assert_eq!(bin(d.path(), 1, args).0, 2, "{args:?}");
    }
    let cfg = d.path().join("bad.toml");
    std::fs::write(&cfg, "unknown_key = 1\n").unwrap();
    assert_eq!(bin(d.path(), 1, &["classify", "--config", cfg.to_str().unwrap()]).0, 2);
}

#[test]
fn failed_checks_exit_one() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(bin(d.path(), 1, &["weights", "--weight", "power:-2"]).0, 1);
    let (code, stdout) = bin(d.path(), 1, &["selftest", "--only", "1", "--force-fail"]);
    assert_eq!(code, 1);
    assert!(stdout.contains("resolvent jump closed form"), "{stdout}");
    assert_eq!(bin(d.path(), 1, &["selftest", "--only", "1"]).0, 0);
}

#[test]
fn config_file_then_flags() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.toml");
    std::fs::write(&cfg, "seed = 11\n[grid]\nhalf_width = 12.0\nn = 256\n[weights]\np = 3.0\n").unwrap();
    let c = cfg.to_str().unwrap();
    assert_eq!(bin(d.path(), 1, &["weights", "--config", c, "--n", "128"]).0, 0);
    let r = report(d.path(), "weights");
    assert_eq!(r["config"]["seed"], 11);
    assert_eq!(r["config"]["grid"]["half_width"], 12.0);
    assert_eq!(r["config"]["grid"]["n"], 128);
    assert_eq!(r["config"]["weights"]["p"], 3.0);

    assert_eq!(bin(d.path(), 1, &["weights", "--config", c, "--set", "weights.p=2.5", "--p", "4"]).0, 0);
    assert_eq!(report(d.path(), "weights")["config"]["weights"]["p"], 4.0);
}

#[test]
fn reports_are_byte_identical_across_runs_and_threads() {
    let args = ["counterexample", "--model", "g1plus", "--R", "5,10"];
    let mut seen = Vec::new();
    for threads in [1, 1, 4] {
        let d = tempfile::tempdir().unwrap();
        assert_eq!(bin(d.path(), threads, &args).0, 0);
        let json = std::fs::read(d.path().join("counterexample.json")).unwrap();
        let csv = std::fs::read(d.path().join("counterexample.csv")).unwrap();
        seen.push((json, csv));
    }
    assert!(seen.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn the_hash_ignores_the_output_directory() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["classify", "--potential", "bump", "--half-width", "10", "--n", "256"];
    bin(a.path(), 1, &args);
    bin(b.path(), 1, &args);
    assert_eq!(report(a.path(), "classify")["config_hash"], report(b.path(), "classify")["config_hash"]);
}

#[test]
fn the_shipped_config_loads() {
    let d = tempfile::tempdir().unwrap();
    let cfg = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/example.toml");
    assert_eq!(bin(d.path(), 1, &["weights", "--config", cfg]).0, 0);
    assert_eq!(report(d.path(), "weights")["config"]["potential"]["kind"], "compact_bump");
}
