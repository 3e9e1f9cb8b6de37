//! Command-line contract: exit codes, output files and reproducibility.

use std::path::Path;
use std::process::{Command, Output};

use scbf::io::{read_snapshot, RunManifest};

fn scbf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scbf")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL: &str = "[model]\nn = 4\n[time]\nhorizon = 0.25\ndt = 0.015625\noutputs = 4\n\
                     [noise]\nsigma_amplitude = 0.4\nintensity = 2.0\ngamma_c0 = 0.3\n[run]\nseed = 3\nensemble = 40\ntwins = 4\n";

#[test]
fn simulate_writes_snapshot_ledger_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "run.toml", SMALL);
    let out = tmp.path().join("out");
    let o = scbf(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let tr = read_snapshot(&out.join("trajectory.snap")).unwrap();
    assert_eq!(tr.times.len(), 5);
    assert!(tr.record.is_some());
    let m = RunManifest::read(&out.join("manifest.json")).unwrap();
    assert_eq!(m.command, "simulate");
    assert_eq!(m.config.run.seed, 3);
    assert_eq!(m.outputs.len(), 2);
    assert!(m.verify_outputs(&out).unwrap().is_empty());
}

#[test]
fn rerunning_from_a_manifest_regenerates_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "run.toml", SMALL);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(scbf(&["simulate", "--config", &cfg, "--out", a.to_str().unwrap()]).status.code(), Some(0));
    let manifest = a.join("manifest.json");
    let o = scbf(&["simulate", "--config", manifest.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let m = RunManifest::read(&manifest).unwrap();
    assert!(m.verify_outputs(&b).unwrap().is_empty());
    assert_eq!(std::fs::read(&manifest).unwrap(), std::fs::read(b.join("manifest.json")).unwrap());
}

#[test]
fn seed_flag_overrides_the_configuration() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "run.toml", SMALL);
    let out = tmp.path().join("o");
    scbf(&["simulate", "--config", &cfg, "--seed", "99", "--out", out.to_str().unwrap()]);
    assert_eq!(RunManifest::read(&out.join("manifest.json")).unwrap().config.run.seed, 99);
}

#[test]
fn verify_is_byte_identical_across_runs_and_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "run.toml", SMALL);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let oa = scbf(&["verify", "--config", &cfg, "--out", a.to_str().unwrap(), "--jobs", "1"]);
    let ob = scbf(&["verify", "--config", &cfg, "--out", b.to_str().unwrap(), "--jobs", "3"]);
    assert_eq!(oa.status.code(), Some(0), "{}", String::from_utf8_lossy(&oa.stdout));
    assert_eq!(ob.status.code(), Some(0));
    let ra = std::fs::read(a.join("verify.jsonl")).unwrap();
    assert_eq!(ra, std::fs::read(b.join("verify.jsonl")).unwrap());
    assert_eq!(oa.stdout, ob.stdout);
    assert!(String::from_utf8(ra).unwrap().lines().all(|l| l.contains("\"pass\":true")));
}

#[test]
fn uniqueness_refuses_uncovered_regimes_with_usage_status() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", "[model]\nd = 3\nn = 2\nr = 3.0\nmu = 0.5\nbeta = 0.5\n");
    let o = scbf(&["uniqueness", "--config", &cfg, "--out", tmp.path().join("u").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("2βμ"));
}

#[test]
fn uniqueness_passes_in_a_covered_regime() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "run.toml", SMALL);
    let out = tmp.path().join("u");
    let o = scbf(&["uniqueness", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(std::fs::read_to_string(out.join("uniqueness.jsonl")).unwrap().lines().count(), 3);
}

#[test]
fn failing_property_exits_with_one() {
    // The explicit scheme is unstable at n = 32 with this step, so the
    // cutoff study cannot converge.
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "run.toml",
        "[model]\nn = 4\n[time]\nhorizon = 0.25\ndt = 0.015625\n[run]\ncutoffs = [4, 16, 32]\ndt_levels = 2\n",
    );
    let o = scbf(&["converge", "--config", &cfg, "--out", tmp.path().join("c").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(scbf(&["bogus"]).status.code(), Some(2));
    assert_eq!(scbf(&["simulate", "--config", "/nonexistent.toml"]).status.code(), Some(2));
    let bad = write(tmp.path(), "bad.toml", "[model]\nmu = -1.0\n");
    let o = scbf(&["simulate", "--config", &bad, "--out", tmp.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mu"));
    let zero = scbf(&["simulate", "--jobs", "0", "--out", tmp.path().join("y").to_str().unwrap()]);
    assert_eq!(zero.status.code(), Some(2));
}

#[test]
fn ensemble_reports_moment_and_balance() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "run.toml", SMALL);
    let out = tmp.path().join("e");
    let o = scbf(&["ensemble", "--config", &cfg, "--out", out.to_str().unwrap()]);
    let text = std::fs::read_to_string(out.join("ensemble.jsonl")).unwrap();
    let kinds: Vec<String> = text
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["kind"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(kinds, ["moment-bound", "energy-balance"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
}
