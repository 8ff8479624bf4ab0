//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use num_complex::Complex64 as C;
use pairsource::counting::{expected_rates, mean_pairs_per_window, simulate_counts, DetectorParams, SourceBudget};
use pairsource::fitting::{fit_dip, fit_fringe, ScanData};
use pairsource::interference::{bell_scan, hom_coincidence, hom_dip_fwhm, hom_scan, Wavepacket};
use pairsource::spdc::{bandwidth_ghz, coherence_time};
use pairsource_cli::commands::{self, spectral_model};
use pairsource_cli::{ExperimentConfig, RunOptions, RunReport};

const C_M_PER_S: f64 = 299_792_458.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn bundled_config(out: &std::path::Path) -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/paper.config");
    let mut cfg = ExperimentConfig::from_path(&path).expect("bundled config parses");
    RunOptions {
        out_dir: Some(out.to_path_buf()),
        no_timestamp: true,
        ..Default::default()
    }
    .apply(&mut cfg)
    .unwrap();
    cfg
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn criterion_1() -> Outcome {
    let tau = coherence_time(1310.0, 0.5);
    let lambda = 1310e-9;
    let oracle = 0.44 * lambda * lambda / (C_M_PER_S * 0.5e-9) * 1e12;
    check(
        (tau - oracle).abs() < 1e-12 * oracle && within(tau, 5.03, 0.01),
        format!("tau_coh = {tau:.4} ps (closed form {oracle:.4} ps)"),
    )
}

fn criterion_2() -> Outcome {
    let tau = 5.2;
    let wp = Wavepacket::gaussian(tau).unwrap();
    // width read off a finely sampled simulated dip, half depth by interpolation
    let delays = linspace(-20.0, 20.0, 40_001);
    let scan = hom_scan(&wp, &delays, 1.0, 0.0).unwrap();
    let p = &scan.coincidence_probability;
    let half = 0.25;
    let mut crossings = Vec::new();
    for i in 1..p.len() {
        if (p[i - 1] - half) * (p[i] - half) < 0.0 {
            let f = (half - p[i - 1]) / (p[i] - p[i - 1]);
            crossings.push(delays[i - 1] + f * (delays[i] - delays[i - 1]));
        }
    }
    let sampled = crossings.last().unwrap() - crossings[0];
    let bisected = hom_dip_fwhm(&wp);
    let ratio_ok = ((sampled / tau) / 2f64.sqrt() - 1.0).abs() < 1e-3 && ((bisected / tau) / 2f64.sqrt() - 1.0).abs() < 1e-3;
    let vs_measured = (sampled - 7.45).abs() / 7.45;
    check(
        ratio_ok && vs_measured < 0.02,
        format!(
            "FWHM/tau = {:.6} (sqrt2 = {:.6}); FWHM {sampled:.3} ps vs 7.45 ps: {:.2}%",
            sampled / tau,
            2f64.sqrt(),
            100.0 * vs_measured
        ),
    )
}

fn criterion_3() -> Outcome {
    let budget = SourceBudget {
        brightness: 3e5,
        pump_power_mw: 2.5,
        filter_bandwidth_ghz: bandwidth_ghz(1310.0, 0.5),
        window_ns: 1.5,
        loss_a_db: 0.0,
        loss_b_db: 0.0,
        bs_separation_prob: 0.5,
        double_pairs: false,
    };
    let mu = mean_pairs_per_window(&budget);
    let oracle = 3e5 * 2.5 * (C_M_PER_S * 0.5e-9 / (1310e-9 * 1310e-9) * 1e-9) * 1.5e-9;
    check(
        within(mu, 0.098, 0.001) && (mu - oracle).abs() < 1e-12,
        format!("mu = {mu:.5}"),
    )
}

fn criterion_4() -> Outcome {
    let mut cfg = ExperimentConfig::default();
    cfg.filter.enabled = false;
    let unfiltered = spectral_model(&cfg).unwrap();
    let bob = linspace(0.0, 90.0, 1801);
    let scan = bell_scan(unfiltered.v0, 0.0, 22.5, &bob).unwrap();
    let v_da = scan.sampled_visibility();
    let filtered = spectral_model(&ExperimentConfig::default()).unwrap();
    check(
        within(unfiltered.unfiltered.sideband_fraction(), 0.15, 1e-12) && within(v_da, 0.85, 0.005) && filtered.v0 > 0.98,
        format!("unfiltered D/A visibility {v_da:.4}; filtered v0 {:.5}", filtered.v0),
    )
}

fn criteria_5_6() -> (Outcome, Outcome, Duration) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = bundled_config(dir.path());
    let opts = RunOptions::default();
    let start = Instant::now();
    let hom = commands::cmd_hom(&cfg, &opts).unwrap();
    let bell = commands::cmd_bell(&cfg, &opts).unwrap();
    let elapsed = start.elapsed();

    let mut ok = true;
    let mut parts = Vec::new();
    let mut judge = |label: String, raw: f64, net: f64| {
        let good = within(raw, 0.83, 0.02) && within(net, 0.99, 0.03);
        ok &= good;
        parts.push(format!("{label} {raw:.3}/{net:.3}"));
    };
    for u in ["a", "b"] {
        judge(
            format!("HOM {u}"),
            num(&hom, &format!("users/{u}/visibility_raw")),
            num(&hom, &format!("users/{u}/visibility_net")),
        );
    }
    for i in 0..4 {
        judge(
            format!("fringe {}", num(&bell, &format!("fringes/{i}/alice_hwp_deg"))),
            num(&bell, &format!("fringes/{i}/raw/visibility")),
            num(&bell, &format!("fringes/{i}/net/visibility")),
        );
    }
    let c5 = check(
        ok && elapsed < Duration::from_secs(120),
        format!("raw/net: {}; {:.1} s", parts.join(", "), elapsed.as_secs_f64()),
    );

    let s = num(&bell, "chsh_net/S");
    let err = num(&bell, "chsh_net/std_error");
    let sig = num(&bell, "chsh_net/n_sigma_violation");
    let c6 = check(
        within(s, 2.80, 0.04) && sig > 25.0,
        format!("S_net = {s:.3} +/- {err:.3}, {sig:.0} sigma"),
    );
    (c5, c6, elapsed)
}

fn num(report: &RunReport, path: &str) -> f64 {
    report.number(path).unwrap_or_else(|| panic!("report has no number at {path}"))
}

fn criterion_7() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = bundled_config(dir.path());
    let start = Instant::now();
    let report = commands::cmd_qpm(&cfg).unwrap();
    let elapsed = start.elapsed();
    let p780 = num(&report, "degenerate_periods/1/pump_nm");
    let period = num(&report, "degenerate_periods/1/period_um");
    let anchor = num(&report, "degenerate_periods/0/period_um");
    check(
        p780 == 780.0 && within(period, 9.1, 0.4) && within(anchor, 6.6, 1e-6) && elapsed < Duration::from_secs(1),
        format!("780 nm pump period {period:.3} um (anchor {anchor:.4} um)"),
    )
}

/// HWP at `theta`: `[[cos 2t, sin 2t], [sin 2t, -cos 2t]]`.
fn hwp(theta_deg: f64) -> [[f64; 2]; 2] {
    let (s, c) = (2.0 * theta_deg).to_radians().sin_cos();
    [[c, s], [s, -c]]
}

/// |H,V> through HWP + PBS, photons interfering with weight `k`:
/// exchange amplitudes add coherently, the rest adds in probability.
fn hom_enumerated(alpha_deg: f64, k: f64) -> f64 {
    let m = hwp(alpha_deg / 2.0);
    let amp = |input: usize, port: usize| m[port][input];
    let coherent = (amp(0, 0) * amp(1, 1) + amp(0, 1) * amp(1, 0)).powi(2);
    let incoherent = (amp(0, 0) * amp(1, 1)).powi(2) + (amp(0, 1) * amp(1, 0)).powi(2);
    k * coherent + (1.0 - k) * incoherent
}

/// `c |psi_phi><psi_phi| + (1 - c)` dephased mixture projected on `<a, b|`.
fn bell_enumerated(c: f64, phi: f64, a_deg: f64, b_deg: f64) -> f64 {
    let (sa, ca) = a_deg.to_radians().sin_cos();
    let (sb, cb) = b_deg.to_radians().sin_cos();
    let hv = C::new(ca * sb, 0.0) / 2f64.sqrt();
    let vh = C::from_polar(sa * cb, phi) / 2f64.sqrt();
    c * (hv + vh).norm_sqr() + (1.0 - c) * (hv.norm_sqr() + vh.norm_sqr())
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let mut worst_prob = 0.0f64;
    for ia in 0..=16 {
        let alpha = ia as f64 * 11.25;
        for &m in &[0.0, 0.25, 0.5, 0.9, 1.0] {
            for &v0 in &[0.85, 0.99925, 1.0] {
                let d = hom_coincidence(alpha, m, v0).unwrap() - hom_enumerated(alpha, m * v0);
                worst_prob = worst_prob.max(d.abs());
            }
        }
    }
    let bob = linspace(0.0, 180.0, 37);
    for &c in &[0.0, 0.5, 0.85, 0.99, 1.0] {
        for &phi in &[0.0, 0.7, std::f64::consts::PI] {
            for &alice in &[0.0, 22.5, 45.0, 67.5, 10.0] {
                let scan = bell_scan(c, phi, alice, &bob).unwrap();
                for (b, p) in bob.iter().zip(&scan.coincidence_probability) {
                    let d = p - bell_enumerated(c, phi, 2.0 * alice, 2.0 * b);
                    worst_prob = worst_prob.max(d.abs());
                }
            }
        }
    }

    let mut worst_sigma = 0.0f64;
    let da = DetectorParams::germanium_trigger();
    let db = DetectorParams::ingaas_gated();
    let base = SourceBudget {
        brightness: 3e5,
        pump_power_mw: 2.5,
        filter_bandwidth_ghz: bandwidth_ghz(1310.0, 0.5),
        window_ns: 1.5,
        loss_a_db: 3.0,
        loss_b_db: 3.0,
        bs_separation_prob: 0.5,
        double_pairs: false,
    };
    let budgets = [
        (base, 1.0),
        (SourceBudget { loss_a_db: 10.0, loss_b_db: 6.0, ..base }, 0.5),
        (SourceBudget { pump_power_mw: 10.0, double_pairs: true, ..base }, 0.9),
    ];
    let n = 10_000_000u64;
    for (k, (b, q)) in budgets.iter().enumerate() {
        let r = expected_rates(b, &da, &db, *q).unwrap();
        let run = simulate_counts(b, &da, &db, *q, n, 77 + k as u64).unwrap();
        let seconds = n as f64 * b.window_ns * 1e-9;
        let t = &run.tallies;
        for (count, rate) in [
            (t.singles_a(), r.singles_a),
            (t.singles_b(), r.singles_b),
            (t.coincidences(), r.coincidences),
        ] {
            let expected = rate * seconds;
            worst_sigma = worst_sigma.max((count as f64 - expected).abs() / expected.sqrt());
        }
    }

    let mut worst_fit = 0.0f64;
    let x = linspace(-20.0, 20.0, 41);
    let dip_p = [450.0, 0.83, 0.43, 7.12];
    let counts: Vec<f64> = x
        .iter()
        .map(|&t| {
            let d = (t - dip_p[2]) / dip_p[3];
            60.0 * dip_p[0] * (1.0 - dip_p[1] * (-4.0 * 2f64.ln() * d * d).exp())
        })
        .collect();
    let fit = fit_dip(&ScanData::uniform(x, counts, 60.0).unwrap()).unwrap();
    for (got, want) in fit.values().iter().zip(dip_p) {
        worst_fit = worst_fit.max(((got - want) / want).abs());
    }
    let theta = linspace(0.0, 180.0, 41);
    let fr_p = [450.0, 0.7, 12.0];
    let counts: Vec<f64> = theta
        .iter()
        .map(|&t| 60.0 * fr_p[0] / 2.0 * (1.0 - fr_p[1] * (4.0 * (t - fr_p[2])).to_radians().cos()))
        .collect();
    let fit = fit_fringe(&ScanData::uniform(theta, counts, 60.0).unwrap()).unwrap();
    for (got, want) in fit.values().iter().zip(fr_p) {
        worst_fit = worst_fit.max(((got - want) / want).abs());
    }
    let elapsed = start.elapsed();
    check(
        worst_prob < 1e-10 && worst_sigma < 3.0 && worst_fit < 1e-6 && elapsed < Duration::from_secs(300),
        format!(
            "max |closed - enumerated| {worst_prob:.1e}; max MC deviation {worst_sigma:.2} sigma; max fit error {worst_fit:.1e}; {:.1} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = bundled_config(dir.path());
    cfg.mc.enabled = false;
    let report = commands::cmd_rates(&cfg).unwrap();
    let json: serde_json::Value = serde_json::from_str(&report.to_json_string()).unwrap();
    let targets = &json["outputs"]["calibration_targets"];
    let labelled = |v: &serde_json::Value| {
        v["status"]
            .as_str()
            .is_some_and(|s| s.contains("calibration target") && s.contains("not a derived prediction"))
    };
    let eff = &targets["conversion_efficiency"];
    let singles = &targets["singles_a_cps"];
    let decomposition = json["outputs"]["singles_a_decomposition"]["status"]
        .as_str()
        .is_some_and(|s| s.contains("not predicted"));
    let saved = std::fs::read_to_string(dir.path().join("rates_report.json")).unwrap();
    check(
        labelled(eff)
            && eff["value"].as_f64() == Some(1.1e-9)
            && labelled(singles)
            && singles["value"].as_f64() == Some(85000.0)
            && decomposition
            && saved.contains("not a derived prediction"),
        "conversion efficiency and 85 kcps singles labelled as calibration targets",
    )
}

fn main() {
    let mut results: Vec<(u32, Outcome)> = vec![
        (1, criterion_1()),
        (2, criterion_2()),
        (3, criterion_3()),
        (4, criterion_4()),
    ];
    let (c5, c6, _) = criteria_5_6();
    results.push((5, c5));
    results.push((6, c6));
    results.push((7, criterion_7()));
    results.push((8, criterion_8()));
    results.push((9, criterion_9()));

    let mut failed = 0;
    for (n, o) in &results {
        println!("criterion {n}: {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
