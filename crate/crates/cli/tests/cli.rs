use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/two_sector.csv");

fn iolrt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iolrt"))
        .args(args)
        .env_remove("IOLRT_SEED")
        .env_remove("IOLRT_CONFIG")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = iolrt(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_values(file: &Path) -> Vec<f64> {
    fs::read_to_string(file)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect()
}

#[test]
fn fixture_susceptibility_is_the_leontief_inverse() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    ok(&["susceptibility", "--data", FIXTURE, "--out", path(&out)]);
    // A = [[0, 0.5], [0.2, 0]]; (I − A)⁻¹ = [[1, 0.5], [0.2, 1]] / 0.9
    let expected = [1.0 / 0.9, 0.5 / 0.9, 0.2 / 0.9, 1.0 / 0.9];
    let got = read_values(&out.join("rho/AAA_2010.csv"));
    assert_eq!(got.len(), 4);
    for (g, e) in got.iter().zip(expected) {
        assert!((g - e).abs() < 1e-14, "{g} vs {e}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "susceptibility");
    assert_eq!(manifest["config"]["data"], FIXTURE);
    assert!(manifest["outputs"].as_array().unwrap().contains(&"rho/AAA_2010.csv".into()));
}

#[test]
fn exit_codes_and_error_lines() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");

    let usage = iolrt(&["susceptibility", "--out", path(&out)]);
    assert_eq!(usage.status.code(), Some(2));
    let line = String::from_utf8(usage.stderr).unwrap();
    assert!(line.starts_with("error[Usage]: "), "{line}");
    assert_eq!(line.trim_end().lines().count(), 1);

    let flag = iolrt(&["susceptibility", "--no-such-flag", "1"]);
    assert_eq!(flag.status.code(), Some(2));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "record_type,country,year,row_sector,col_sector_or_dest,value\nOUTPUT,AAA,x,S1,,1\n").unwrap();
    let data = iolrt(&["susceptibility", "--data", path(&bad), "--out", path(&out)]);
    assert_eq!(data.status.code(), Some(3));
    assert!(String::from_utf8(data.stderr).unwrap().starts_with("error[MalformedRow]: "));

    // spectral radius √2
    let unstable = dir.path().join("unstable.csv");
    fs::write(
        &unstable,
        "record_type,country,year,row_sector,col_sector_or_dest,value\n\
         OUTPUT,AAA,2010,S1,,1\nOUTPUT,AAA,2010,S2,,1\n\
         FLOW,AAA,2010,S1,S2,2\nFLOW,AAA,2010,S2,S1,1\n",
    )
    .unwrap();
    let num = iolrt(&["susceptibility", "--data", path(&unstable), "--out", path(&out)]);
    assert_eq!(num.status.code(), Some(4));
    assert!(String::from_utf8(num.stderr).unwrap().starts_with("error[NonProductiveEconomy]: "));

    // nothing is left behind by failed runs
    let leftovers: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| !n.ends_with(".csv"))
        .collect();
    assert!(leftovers.is_empty(), "{leftovers:?}");
}

#[test]
fn failure_keeps_previous_outputs_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    ok(&["susceptibility", "--data", FIXTURE, "--out", path(&out)]);
    let before = fs::read(out.join("rho/AAA_2010.csv")).unwrap();
    let failed = iolrt(&["backbone", "--data", FIXTURE, "--out", path(&out), "--p", "1.5"]);
    assert_eq!(failed.status.code(), Some(2));
    assert!(String::from_utf8(failed.stderr).unwrap().starts_with("error[InvalidP]: "));
    assert_eq!(fs::read(out.join("rho/AAA_2010.csv")).unwrap(), before);
    assert!(!out.join("backbone.csv").exists());
}

#[test]
fn precedence_flags_env_config() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    fs::write(&conf, format!("data = {FIXTURE}\nseed = 3\neta = 0.5\np = 0.2\n")).unwrap();
    let out = dir.path().join("run");
    let status = Command::new(env!("CARGO_BIN_EXE_iolrt"))
        .args(["backbone", "--config", path(&conf), "--out", path(&out), "--p", "0.3"])
        .env("IOLRT_SEED", "7")
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["seed"], "7");
    assert_eq!(m["sources"]["seed"], "env");
    assert_eq!(m["config"]["p"], "0.3");
    assert_eq!(m["sources"]["p"], "flag");
    assert_eq!(m["config"]["eta"], "0.5");
    assert_eq!(m["sources"]["eta"], "config");
    assert_eq!(m["sources"]["dt"], "default");

    // the resolved config reproduces the run
    let again = dir.path().join("again");
    let resolved = out.join("resolved.conf");
    ok(&["backbone", "--config", path(&resolved), "--out", path(&again)]);
    assert_eq!(
        fs::read(out.join("backbone.csv")).unwrap(),
        fs::read(again.join("backbone.csv")).unwrap()
    );
}

fn synth(dir: &Path) -> PathBuf {
    let out = dir.join("synth");
    ok(&[
        "synth",
        "--out",
        path(&out),
        "--synth-countries",
        "AAA,BBB,CCC,DDD,EEE",
        "--synth-sectors",
        "6",
        "--synth-last-year",
        "2010",
        "--seed",
        "11",
    ]);
    out.join("panel.csv")
}

#[test]
fn oracle_hook_scores_one_everywhere() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path());
    let out = dir.path().join("bench");
    ok(&[
        "benchmark",
        "--data",
        path(&data),
        "--out",
        path(&out),
        "--oracle-lrt",
        "true",
        "--var-samples",
        "300",
    ]);
    for baseline in ["arima111_expanding", "arima111_full", "var1", "perturbed_io"] {
        let cells = fs::read_to_string(out.join(baseline).join("cells.csv")).unwrap();
        let rows: Vec<&str> = cells.lines().skip(1).collect();
        assert!(!rows.is_empty(), "{baseline}");
        for row in rows {
            let r_lrt: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
            assert!((r_lrt - 1.0).abs() < 1e-12, "{baseline}: {row}");
        }
    }
}

#[test]
fn response_forecast_scenario_and_ingest_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path());
    let d = path(&data);

    let out = dir.path().join("resp");
    ok(&["response", "--data", d, "--country", "AAA", "--year", "2005", "--out", path(&out), "--response-horizon", "2"]);
    let curve = fs::read_to_string(out.join("curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 1 + 201 * 6);
    assert!(out.join("recovery.csv").exists());
    let multi = iolrt(&["response", "--data", d, "--country", "AAA", "--out", path(&out)]);
    assert_eq!(multi.status.code(), Some(2));

    let out = dir.path().join("forecast");
    ok(&["forecast", "--data", d, "--out", path(&out)]);
    let cond = fs::read_to_string(out.join("conditioning.csv")).unwrap();
    for row in cond.lines().skip(1) {
        let err: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
        assert!(err < 1e-8, "{row}");
    }

    let scen = dir.path().join("scen.conf");
    fs::write(&scen, "name = test\nyear = 2008\nshock = AAA;BBB,A01,export_to,CCC,-1\n").unwrap();
    let out = dir.path().join("scenario");
    ok(&["scenario", "--data", d, "--scenario", path(&scen), "--out", path(&out)]);
    let agg = fs::read_to_string(out.join("aggregates.csv")).unwrap();
    assert_eq!(agg.lines().count(), 4);

    let out = dir.path().join("ingest");
    ok(&["ingest", "--data", d, "--country", "AAA,BBB", "--year", "2001-2003", "--out", path(&out)]);
    let tables = fs::read_to_string(out.join("tables.csv")).unwrap();
    assert_eq!(tables.lines().count(), 1 + 6);
    let missing = iolrt(&["ingest", "--data", d, "--country", "ZZZ", "--out", path(&out)]);
    assert_eq!(missing.status.code(), Some(3));
}
