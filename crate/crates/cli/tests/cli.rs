use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_quasilocal"))
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("config.in.toml");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn timeavg_run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "version = 1\nexperiment = \"timeavg\"\n[chain]\nL = 5\n");
    let out = dir.path().join("out");
    let status = bin()
        .args(["timeavg", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--seeds", "2", "--threads", "2"])
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    assert!(String::from_utf8_lossy(&status.stdout).contains("PASS"));
    let csv = std::fs::read_to_string(out.join("timeavg.csv")).unwrap();
    assert!(csv.starts_with("seed,T,patch,residual,bound\n"));
    for f in ["summary.json", "config.toml", "record.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let resolved = std::fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(resolved.contains("threads = 2") && resolved.contains("seeds = 2"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let s = bin().args(["flow", "--seeds", "2", "--out"]).arg(&out).output().unwrap();
        assert!(s.status.success());
        std::fs::read(out.join("flow.csv")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write_config(dir.path(), "version = 1\nexperiment = \"flow\"\n[chain]\nlength = 6\n");
    let s = bin().args(["flow", "--config"]).arg(&unknown).output().unwrap();
    assert_eq!(s.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&s.stderr).contains("config error"));

    let other = write_config(dir.path(), "version = 1\nexperiment = \"lrb\"\n");
    let s = bin().args(["flow", "--config"]).arg(&other).output().unwrap();
    assert_eq!(s.status.code(), Some(1));

    let s = bin().args(["flow", "--threads", "0"]).output().unwrap();
    assert_eq!(s.status.code(), Some(1));

    let s = bin().args(["flow", "--dense-limit", "4"]).arg("--out").arg(dir.path().join("x")).output().unwrap();
    assert_eq!(s.status.code(), Some(1));
}

#[test]
fn invariant_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    // A tolerance no flow can reach fails the residual check.
    let cfg = write_config(
        dir.path(),
        "version = 1\nexperiment = \"flow\"\nseeds = 1\n[chain]\nL = 4\ngamma = 0.3\n[flow]\ntolerance = 1e-300\nk_max = 1\n",
    );
    let s = bin().args(["flow", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(s.status.code(), Some(2), "{}", String::from_utf8_lossy(&s.stderr));
}

#[test]
fn defaults_round_trip_through_the_parser() {
    let dir = tempfile::tempdir().unwrap();
    let s = bin().args(["defaults", "family-tails"]).output().unwrap();
    assert!(s.status.success());
    let cfg = write_config(dir.path(), &String::from_utf8(s.stdout).unwrap());
    let text = std::fs::read_to_string(&cfg).unwrap();
    assert!(text.contains("experiment = \"family-tails\""));
    let s = bin().args(["defaults", "nonsense"]).output().unwrap();
    assert_eq!(s.status.code(), Some(1));
}
