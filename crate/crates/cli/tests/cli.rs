use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pairsource"))
}

fn bundled_config() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/paper.config")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn stderr_json(out: &Output) -> Value {
    assert!(!out.status.success());
    serde_json::from_slice(&out.stderr).expect("error is JSON")
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn same_seed_same_bytes() {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["bell", "--seed", "11", "--out", "out", "--no-timestamp", "--points", "21"];
    let (o1, o2) = (run_in(d1.path(), &args), run_in(d2.path(), &args));
    assert_eq!(o1.stdout, o2.stdout);
    let (f1, f2) = (files(&d1.path().join("out")), files(&d2.path().join("out")));
    assert!(f1.len() >= 6);
    assert_eq!(f1, f2);
}

#[test]
fn seed_changes_counts() {
    let d = tempfile::tempdir().unwrap();
    run_in(d.path(), &["hom", "--seed", "1", "--out", "s1", "--no-timestamp"]);
    run_in(d.path(), &["hom", "--seed", "2", "--out", "s2", "--no-timestamp"]);
    let a = std::fs::read(d.path().join("s1/hom_scan_a.csv")).unwrap();
    let b = std::fs::read(d.path().join("s2/hom_scan_a.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn timestamp_only_when_asked() {
    let d = tempfile::tempdir().unwrap();
    let with = stdout_json(&run_in(d.path(), &["spectrum", "--out", "o"]));
    let without = stdout_json(&run_in(d.path(), &["spectrum", "--out", "o", "--no-timestamp"]));
    assert!(with["timestamp_unix_s"].as_u64().unwrap() > 1_600_000_000);
    assert!(without.get("timestamp_unix_s").is_none());
    assert_eq!(without["software_version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn bundled_config_is_the_default() {
    let mut from_file = pairsource_cli::ExperimentConfig::from_path(&bundled_config()).unwrap();
    let default = pairsource_cli::ExperimentConfig::default();
    from_file.base_dir = default.base_dir.clone();
    assert_eq!(from_file, default);
}

#[test]
fn errors_are_json_with_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("bad.toml"), "schema_version = 1\nunknown_key = 1\n").unwrap();
    let out = run_in(d.path(), &["hom", "--config", "bad.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"]["kind"], "config");

    let out = run_in(d.path(), &["hom", "--config", "missing.toml"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"]["kind"], "io");

    std::fs::write(d.path().join("filter.toml"), "schema_version = 1\n[filter]\nfwhm_nm = -0.5\n").unwrap();
    let out = run_in(d.path(), &["spectrum", "--config", "filter.toml", "--out", "o"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_json(&out);
    assert_eq!(err["error"]["kind"], "model");
    assert!(err["error"]["message"].as_str().unwrap().contains("FWHM"));

    let out = run_in(d.path(), &["chsh", "--scans", "a.csv", "--out", "o"]);
    assert_eq!(stderr_json(&out)["error"]["kind"], "config");
}

#[test]
fn chsh_reingests_bell_scans() {
    let d = tempfile::tempdir().unwrap();
    let cfg = bundled_config();
    let cfg = cfg.to_str().unwrap();
    let bell = stdout_json(&run_in(d.path(), &["bell", "--config", cfg, "--out", d.path().to_str().unwrap(), "--no-timestamp"]));
    let scans: Vec<String> = ["0", "22.5", "45", "67.5"]
        .iter()
        .map(|a| d.path().join(format!("bell_scan_hwp{a}.csv")).display().to_string())
        .collect();
    for (net, key) in [(false, "chsh_raw"), (true, "chsh_net")] {
        let mut args = vec!["chsh", "--config", cfg, "--out", "c", "--no-timestamp", "--scans"];
        args.extend(scans.iter().map(String::as_str));
        if net {
            args.push("--net");
        }
        let chsh = stdout_json(&run_in(d.path(), &args));
        let (a, b) = (chsh["outputs"]["chsh"]["S"].as_f64().unwrap(), bell["outputs"][key]["S"].as_f64().unwrap());
        assert!((a - b).abs() < 1e-9, "{key}: {a} vs {b}");
    }
}

#[test]
fn analytic_mode_writes_expected_counts() {
    let d = tempfile::tempdir().unwrap();
    stdout_json(&run_in(d.path(), &["hom", "--no-mc", "--out", "o", "--integration-s", "10"]));
    let scan = pairsource::fitting::ScanData::<f64>::from_csv_path(d.path().join("o/hom_scan_a.csv")).unwrap();
    // far from the dip the rate is the full 450 cps coincidence peak
    assert!((scan.counts[0] - 4500.0).abs() < 1e-3);
    assert!(scan.integration_time_s.iter().all(|&t| t == 10.0));
}

#[test]
fn dark_only_rates() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("dark.toml"), "schema_version = 1\n[source]\npump_power_mw = 0.0\n[mc]\nn_windows = 1000000\n").unwrap();
    let out = stdout_json(&run_in(d.path(), &["rates", "--config", "dark.toml"]));
    let a = &out["outputs"]["analytic"];
    assert_eq!(a["coincidences"], a["accidentals"]);
    assert!((a["singles_a"].as_f64().unwrap() - 22_000.0).abs() < 1e-6);
    assert!(out["outputs"]["monte_carlo"]["singles_a"]["deviation_sigma"].as_f64().unwrap().abs() < 4.0);
    assert!(d.path().join("out/rates_report.json").exists());
}

#[test]
fn qpm_tuning_table() {
    let d = tempfile::tempdir().unwrap();
    let report = stdout_json(&run_in(d.path(), &["qpm", "--out", "q"]));
    assert!((report["outputs"]["degenerate_periods"][0]["period_um"].as_f64().unwrap() - 6.6).abs() < 1e-6);
    let text = std::fs::read_to_string(d.path().join("q/qpm_tuning.csv")).unwrap();
    assert!(text.starts_with("temperature_c,signal_nm,idler_nm,"));
    assert_eq!(text.lines().count(), 30);
}
