use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_disc-nls"));
    c.env_remove("DISC_NLS_CACHE_DIR");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("report is JSON")
}

#[test]
fn every_subcommand_takes_seed_and_workers() {
    for cmd in [
        "basis",
        "correlate",
        "count",
        "evolve",
        "gibbs-invariance",
        "ansatz",
        "norms",
        "strichartz",
        "scaling-report",
    ] {
        let help = String::from_utf8(ok(&[cmd, "--help"]).stdout).unwrap();
        for flag in ["--seed", "--workers", "--cache-dir", "--config", "--json", "--csv"] {
            assert!(help.contains(flag), "{cmd} lacks {flag}");
        }
    }
}

#[test]
fn basis_runs_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<_> = (0..2).map(|i| dir.path().join(format!("zeros{i}.csv"))).collect();
    let reports: Vec<_> = paths
        .iter()
        .map(|p| ok(&["basis", "--modes", "32", "--csv", p.to_str().unwrap()]).stdout)
        .collect();
    assert_eq!(reports[0], reports[1]);
    let a = std::fs::read(&paths[0]).unwrap();
    assert_eq!(a, std::fs::read(&paths[1]).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 33);
    assert!(text.starts_with("n,lambda,"));
    let r = json(&ok(&["basis", "--modes", "64"]));
    assert!(r["result"]["orthonormality_defect"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn reports_do_not_depend_on_worker_count() {
    let args = ["gibbs-invariance", "--N", "16", "--samples", "120", "--t", "0.1", "--seed", "3"];
    let one = ok(&[&args[..], &["--workers", "1"]].concat()).stdout;
    let many = ok(&[&args[..], &["--workers", "3"]].concat()).stdout;
    assert_eq!(one, many);
    let r: Value = serde_json::from_slice(&one).unwrap();
    assert_eq!(r["seed"], 3);
    assert_eq!(r["config"]["samples"], 120);
    assert!(r["config"].get("workers").is_none());

    let args = ["ansatz", "--N", "8,16", "--k", "1", "--seeds", "4", "--t", "0.05"];
    let one = ok(&[&args[..], &["--workers", "1"]].concat()).stdout;
    let many = ok(&[&args[..], &["--workers", "2"]].concat()).stdout;
    assert_eq!(one, many);
}

#[test]
fn json_file_output_is_reproducible_and_timing_is_separate() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        ok(&["strichartz", "--N", "8,16", "--json", p.to_str().unwrap()]);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let timing: Value = serde_json::from_slice(&std::fs::read(dir.path().join("a.timing.json")).unwrap()).unwrap();
    assert!(timing["wall_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"seed": 11, "evolve": {"cutoff": 16, "t": 0.1, "samples": 2}}"#).unwrap();
    let r = json(&ok(&["evolve", "--config", cfg.to_str().unwrap(), "--t", "0.2"]));
    assert_eq!(r["seed"], 11);
    assert_eq!(r["config"]["cutoff"], 16.0);
    assert_eq!(r["config"]["t"], 0.2);
    assert_eq!(r["result"]["final_time"], 0.2);

    std::fs::write(&cfg, "{\"evolve\": {\n  \"cutof\": 16\n}}").unwrap();
    let out = run(&["evolve", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("cutof") && err.contains("line"), "{err}");

    std::fs::write(&cfg, r#"{"evolv": {}}"#).unwrap();
    assert!(!run(&["evolve", "--config", cfg.to_str().unwrap()]).status.success());
}

#[test]
fn invalid_parameters_are_refused() {
    for args in [
        &["basis", "--modes", "0"][..],
        &["ansatz", "--N", "12"],
        &["evolve", "--init", "mode:99", "--N", "16"],
        &["gibbs-invariance", "--samples", "50"],
        &["norms", "--p", "0.5"],
        &["strichartz", "--eps", "0"],
        &["count", "--constraint", "bogus"],
    ] {
        let out = run(args);
        assert!(!out.status.success(), "{args:?} should fail");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    }
}

fn corrupt(path: &Path) {
    let mut bytes = std::fs::read(path).unwrap();
    bytes[0] ^= 0xff;
    std::fs::write(path, bytes).unwrap();
}

#[test]
fn corrupt_cache_is_refused_then_rebuilt() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let first = bin()
        .args(["basis", "--modes", "8"])
        .env("DISC_NLS_CACHE_DIR", &cache)
        .output()
        .unwrap();
    assert!(first.status.success());
    let r: Value = serde_json::from_slice(&first.stdout).unwrap();
    assert_eq!(r["caches"][0]["kind"], "basis");
    let file = cache.join(r["caches"][0]["file"].as_str().unwrap());
    assert!(file.exists());

    // a warm cache gives the same report
    let again = ok(&["basis", "--modes", "8", "--cache-dir", cache.to_str().unwrap()]);
    assert_eq!(again.stdout, first.stdout);

    corrupt(&file);
    let out = run(&["basis", "--modes", "8", "--cache-dir", cache.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("magic"), "{err}");
    let fixed = ok(&["basis", "--modes", "8", "--cache-dir", cache.to_str().unwrap(), "--rebuild-cache"]);
    assert_eq!(fixed.stdout, first.stdout);
}

#[test]
fn correlation_cache_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().to_str().unwrap();
    let args = ["correlate", "--indices", "1,1,2,2", "--max-mode", "3", "--cache-dir", cache];
    let a = ok(&args);
    let b = ok(&args);
    assert_eq!(a.stdout, b.stdout);
    let r = json(&a);
    assert_eq!(r["result"]["table_entries"], 15);
    let corr = r["caches"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["kind"] == "correlation")
        .unwrap();
    corrupt(&dir.path().join(corr["file"].as_str().unwrap()));
    assert!(!run(&args).status.success());
    ok(&[&args[..], &["--rebuild-cache"]].concat());
}

#[test]
fn evolve_writes_trajectory_csv_and_cache() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    let bin_path = dir.path().join("t.traj");
    let r = json(&ok(&[
        "evolve",
        "--N",
        "16",
        "--t",
        "0.1",
        "--samples",
        "5",
        "--csv",
        csv.to_str().unwrap(),
        "--save-trajectory",
        bin_path.to_str().unwrap(),
    ]));
    assert!(r["result"]["max_mass_drift"].as_f64().unwrap() <= 1e-10);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 7);
    let traj = disc_nls::flow::Trajectory::load(&bin_path).unwrap();
    assert_eq!(traj.times.len(), 6);
}

#[test]
fn scaling_and_count_reports() {
    let r = json(&ok(&["scaling-report", "--k", "2", "--N", "8"]));
    assert_eq!(r["result"]["s_crit"], 0.5);
    assert_eq!(r["result"]["s_p"], 0.125);
    let r = json(&ok(&["count", "--radii", "32,64", "--N", "8", "--bounds", "8,8,8"]));
    assert_eq!(r["result"]["diff_pairs"].as_array().unwrap().len(), 2);
    assert!(r["result"]["base_tensor"]["count"].as_u64().unwrap() > 0);
}
