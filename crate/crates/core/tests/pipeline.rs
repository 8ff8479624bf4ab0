//! End-to-end use of the public API, from dispersion to CHSH.

use pairsource::counting::{
    calibrate_losses, expected_rates, simulate_counts, simulate_scan_counts, DetectorParams, SourceBudget,
};
use pairsource::fitting::{chsh_from_fits, fit_dip, fit_fringe, net_correct, FringeFit, ScanData};
use pairsource::interference::{
    bell_coherence, bell_scan, chsh_of_state, hom_coincidence, hom_scan, intermediate_position, sb_balance,
    Wavepacket, CHSH_SETTINGS_DEG,
};
use pairsource::polarization::make_psi_state;
use pairsource::spdc::{
    apply_filter, bandwidth_ghz, calibrate_offsets, coherence_time, default_spectrum, find_degenerate_period,
    tuning_curve, CalibrationAnchor, DispersionModel, FilterSpec, LineShape, QpmConfig,
};

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

#[test]
fn design_chain() {
    let raw = DispersionModel::<f64>::congruent_linbo3();
    let model = calibrate_offsets(&raw, &CalibrationAnchor::reference()).unwrap();
    let p655 = find_degenerate_period(&model, 655.0, 96.8).unwrap();
    assert!((p655.period_um - 6.6).abs() < 1e-6);
    assert!(p655.calibrated);
    let p780 = find_degenerate_period(&model, 780.0, 96.8).unwrap();
    assert!(p780.period_um > 8.7 && p780.period_um < 9.5);

    let cfg = QpmConfig::type_ii(6.6, 96.8, 655.0).unwrap();
    let curve = tuning_curve(&cfg, &model, &[96.8]).unwrap();
    assert!(curve.iter().any(|p| (p.signal_nm - 1310.0).abs() < 0.5));
    for p in &curve {
        assert!((1.0 / p.signal_nm + 1.0 / p.idler_nm - 1.0 / 655.0).abs() < 1e-12);
    }
}

#[test]
fn filtered_source_to_hom_fit() {
    let spectrum = default_spectrum::<f64>();
    let filter = FilterSpec::new(1310.0, 0.5, LineShape::Gaussian).unwrap();
    let out = apply_filter(&spectrum, &filter).unwrap();
    let v0 = out.spectrum.indistinguishability();
    assert!(v0 > 0.98 && out.sideband_after < out.sideband_before);

    let tau = coherence_time(1310.0, 0.5);
    let wp = Wavepacket::gaussian(tau).unwrap();
    let delays = linspace(-20.0, 20.0, 41);
    let scan = hom_scan(&wp, &delays, v0, 0.43).unwrap();
    let (peak, r_acc, t) = (450.0, 76.5, 60.0);
    let true_rates: Vec<f64> = scan.coincidence_probability.iter().map(|p| 2.0 * p * (peak - r_acc)).collect();
    let counts = simulate_scan_counts(&true_rates, r_acc, t, 4).unwrap();
    let data = ScanData::uniform(delays, counts, t).unwrap();

    let raw = fit_dip(&data).unwrap();
    let net = fit_dip(&net_correct(&data, r_acc).unwrap()).unwrap();
    let w = net.param("w").unwrap();
    assert!((w - 2f64.sqrt() * tau).abs() < 4.0 * net.error("w").unwrap());
    assert!((raw.param("V").unwrap() - 0.83).abs() < 0.02);
    assert!((net.param("V").unwrap() - v0).abs() < 4.0 * net.error("V").unwrap() + 1e-3);
    assert!((net.param("x0").unwrap() - 0.43).abs() < 0.2);
}

#[test]
fn balanced_state_to_chsh() {
    let (phi_a, phi_b) = (0.3f64, 0.4f64);
    let sb = sb_balance(phi_a, phi_b);
    let phi = phi_a + phi_b + sb;
    assert!((phi.cos().abs() - 1.0).abs() < 1e-9);

    let wp = Wavepacket::gaussian(coherence_time(1310.0, 0.5)).unwrap();
    let (_, residual) = intermediate_position(0.43, -0.43);
    let c = bell_coherence(0.999, &wp, residual).unwrap();
    let rho = make_psi_state(c, phi).unwrap();
    let expected = chsh_of_state(&rho, CHSH_SETTINGS_DEG);

    // noiseless fringes recover the state's S
    let bob = linspace(0.0, 180.0, 41);
    let fits: Vec<_> = [0.0, 22.5, 45.0, 67.5]
        .iter()
        .map(|&a| {
            let scan = bell_scan(c, phi, a, &bob).unwrap();
            let counts = scan.coincidence_probability.iter().map(|p| 2.0 * p * 400.0 * 60.0).collect();
            (a, fit_fringe(&ScanData::uniform(bob.clone(), counts, 60.0).unwrap()).unwrap())
        })
        .collect();
    let fringes: Vec<_> = fits.iter().map(|(a, fit)| FringeFit { alice_hwp_deg: *a, fit }).collect();
    let s = chsh_from_fits(&fringes, CHSH_SETTINGS_DEG).unwrap();
    assert!((s.s - expected).abs() < 1e-6, "{} vs {expected}", s.s);
    assert!((s.s - 2f64.sqrt() * (1.0 + c)).abs() < 1e-6);
}

#[test]
fn counting_calibration_and_reproducibility() {
    let da = DetectorParams::<f64>::germanium_trigger();
    let db = DetectorParams::<f64>::ingaas_gated();
    let budget = SourceBudget {
        brightness: 3e5,
        pump_power_mw: 2.5,
        filter_bandwidth_ghz: bandwidth_ghz(1310.0, 0.5),
        window_ns: 1.5,
        loss_a_db: 10.5,
        loss_b_db: 10.5,
        bs_separation_prob: 0.5,
        double_pairs: false,
    };
    let cal = calibrate_losses(&budget, &da, &db, 85_000.0, 450.0).unwrap();
    let r = expected_rates(&cal.budget, &da, &db, 1.0).unwrap();
    assert!((r.singles_a - 85_000.0).abs() < 1e-3);
    assert!((r.coincidences - 450.0).abs() < 1e-3);
    assert!(r.accidentals < r.coincidences);

    let a = simulate_counts(&cal.budget, &da, &db, 1.0, 300_000, 9).unwrap();
    let b = simulate_counts(&cal.budget, &da, &db, 1.0, 300_000, 9).unwrap();
    let c = simulate_counts(&cal.budget, &da, &db, 1.0, 300_000, 10).unwrap();
    assert_eq!(a.tallies, b.tallies);
    assert_ne!(a.tallies, c.tallies);
}

#[test]
fn csv_through_bytes() {
    let data = ScanData::uniform(vec![0.0, 4.5, 9.0], vec![120.0, 80.0, 100.0], 30.0).unwrap();
    let mut buf = Vec::new();
    data.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("x,counts,integration_time_s\n"));
    let back = ScanData::<f64>::from_csv_reader(buf.as_slice()).unwrap();
    assert_eq!(back.x, data.x);
    assert_eq!(back.counts, data.counts);
}

#[test]
fn single_precision_path() {
    let tau = coherence_time(1310.0f32, 0.5);
    assert!((tau - 5.0374).abs() < 1e-3);
    let p = hom_coincidence(45.0f32, 1.0, 1.0).unwrap();
    assert!(p.abs() < 1e-6);

    let x: Vec<f32> = (0..41).map(|i| -20.0 + i as f32).collect();
    let counts: Vec<f32> = x
        .iter()
        .map(|&t| {
            let d = (t - 0.5) / 7.0;
            6000.0 * (1.0 - 0.9 * (-4.0 * std::f32::consts::LN_2 * d * d).exp())
        })
        .collect();
    let fit = fit_dip(&ScanData::uniform(x, counts, 10.0f32).unwrap()).unwrap();
    assert!((fit.param("V").unwrap() - 0.9).abs() < 1e-3);
    assert!((fit.param("w").unwrap() - 7.0).abs() < 1e-2);
}
