//! One function per experiment. Each returns a [`RunReport`] and writes its
//! tables under the configured output directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use pairsource::counting::{
    calibrate_losses, expected_rates, mean_pairs_per_window, simulate_counts, simulate_scan_counts,
    visibility_net, CountRates, SourceBudget,
};
use pairsource::fitting::{chsh_from_fits, fit_dip, fit_fringe, net_correct, FitResult, FringeFit, ScanData};
use pairsource::interference::{
    bell_coherence, bell_scan, chsh_of_state, hom_dip_fwhm, hom_scan, intermediate_position, sb_balance,
    Wavepacket,
};
use pairsource::polarization::make_psi_state;
use pairsource::spdc::{
    apply_filter, bandwidth_ghz, calibrate_offsets, coherence_time, find_degenerate_period, tuning_curve,
    CalibrationAnchor, DispersionModel, EmissionSpectrum, FilterOutcome, FilterSpec, Polarization, QpmConfig,
    SpectralBranch,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub const SOFTWARE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Label attached to numbers the model is tuned to rather than predicts.
pub const CALIBRATION_TARGET: &str = "calibration target (input), not a derived prediction";

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub no_mc: bool,
    pub net: bool,
    pub points: Option<usize>,
    pub integration_s: Option<f64>,
    pub no_timestamp: bool,
}

impl RunOptions {
    pub fn apply(&self, cfg: &mut ExperimentConfig) -> Result<(), CliError> {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(d) = &self.out_dir {
            cfg.output.dir = d.clone();
            cfg.base_dir = PathBuf::from(".");
        }
        if self.no_mc {
            cfg.mc.enabled = false;
        }
        if let Some(n) = self.points {
            cfg.hom.points = n;
            cfg.bell.points = n;
        }
        if let Some(t) = self.integration_s {
            cfg.hom.integration_s = t;
            cfg.bell.integration_s = t;
        }
        if self.no_timestamp {
            cfg.output.timestamp = false;
        }
        cfg.validate()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub experiment: String,
    pub software_version: &'static str,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp_unix_s: Option<u64>,
    pub inputs: ExperimentConfig,
    pub derived: BTreeMap<String, Value>,
    pub outputs: BTreeMap<String, Value>,
    pub files: Vec<String>,
    pub notes: Vec<String>,
}

impl RunReport {
    fn new(name: &str, cfg: &ExperimentConfig) -> Self {
        let timestamp_unix_s = cfg.output.timestamp.then(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        });
        Self {
            experiment: name.to_string(),
            software_version: SOFTWARE_VERSION,
            seed: cfg.seed,
            timestamp_unix_s,
            inputs: cfg.clone(),
            derived: BTreeMap::new(),
            outputs: BTreeMap::new(),
            files: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn derive(&mut self, key: &str, v: impl Serialize) {
        self.derived.insert(key.to_string(), json!(v));
    }

    fn output(&mut self, key: &str, v: impl Serialize) {
        self.outputs.insert(key.to_string(), json!(v));
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Number stored under `outputs` or `derived` at a `/`-separated path.
    pub fn number(&self, path: &str) -> Option<f64> {
        let mut parts = path.split('/');
        let head = parts.next()?;
        let mut v = self.outputs.get(head).or_else(|| self.derived.get(head))?;
        for p in parts {
            v = match v {
                Value::Array(a) => a.get(p.parse::<usize>().ok()?)?,
                _ => v.get(p)?,
            };
        }
        v.as_f64()
    }
}

fn out_dir(cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.resolve(&cfg.output.dir);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>, CliError> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_rows<R: Serialize>(dir: &Path, name: &str, rows: &[R], report: &mut RunReport) -> Result<(), CliError> {
    let path = dir.join(name);
    let mut w = csv_writer(&path)?;
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.flush()?;
    report.files.push(name.to_string());
    Ok(())
}

fn write_scan(dir: &Path, name: &str, scan: &ScanData<f64>, report: &mut RunReport) -> Result<(), CliError> {
    let path = dir.join(name);
    let f = std::fs::File::create(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    scan.write_csv(f)?;
    report.files.push(name.to_string());
    Ok(())
}

fn write_json(dir: &Path, name: &str, v: &impl Serialize, report: &mut RunReport) -> Result<(), CliError> {
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(v).expect("serializable") + "\n";
    std::fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    report.files.push(name.to_string());
    Ok(())
}

/// Writes the report itself and returns it.
fn finish(dir: &Path, mut report: RunReport) -> Result<RunReport, CliError> {
    let name = format!("{}_report.json", report.experiment);
    report.files.push(name.clone());
    let path = dir.join(&name);
    std::fs::write(&path, report.to_json_string()).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(report)
}

fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![start];
    }
    (0..n).map(|i| start + (stop - start) * i as f64 / (n - 1) as f64).collect()
}

fn stepped(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    (0..n).map(|i| start + step * i as f64).collect()
}

/// Independent seed for sub-experiment `k`.
fn sub_seed(seed: u64, k: u64) -> u64 {
    seed.wrapping_add(k.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn dispersion(cfg: &ExperimentConfig) -> Result<DispersionModel<f64>, CliError> {
    match &cfg.dispersion.file {
        Some(p) => Ok(DispersionModel::from_path(cfg.resolve(p))?),
        None => Ok(DispersionModel::congruent_linbo3()),
    }
}

pub fn cmd_qpm(cfg: &ExperimentConfig) -> Result<RunReport, CliError> {
    let dir = out_dir(cfg)?;
    let mut report = RunReport::new("qpm", cfg);
    let q = &cfg.qpm;
    let raw = dispersion(cfg)?;
    let anchor = CalibrationAnchor {
        period_um: q.anchor_period_um,
        temperature_c: q.anchor_temperature_c,
        pump_nm: q.anchor_pump_nm,
        signal_nm: q.anchor_signal_nm,
        polarization: q.anchor_polarization,
    };
    let uncalibrated = find_degenerate_period(&raw, q.anchor_pump_nm, q.anchor_temperature_c)?;
    let model = calibrate_offsets(&raw, &anchor)?;
    report.derive("dispersion_table", &model.name);
    report.derive("uncalibrated_period_um", uncalibrated.period_um);
    report.derive("offset_h", model.offset(Polarization::H));
    report.derive("offset_v", model.offset(Polarization::V));

    let periods = q
        .design_pumps_nm
        .iter()
        .map(|&pump| {
            let s = find_degenerate_period(&model, pump, q.temperature_c)?;
            Ok(json!({
                "pump_nm": pump,
                "signal_nm": 2.0 * pump,
                "temperature_c": q.temperature_c,
                "period_um": s.period_um,
                "residual_rad_per_um": s.residual,
            }))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    report.output("degenerate_periods", periods);

    #[derive(Serialize)]
    struct Row {
        temperature_c: f64,
        signal_nm: f64,
        idler_nm: f64,
        slope_rad_per_um_per_nm: f64,
        degenerate: bool,
    }
    let qcfg = QpmConfig::type_ii(q.anchor_period_um, q.anchor_temperature_c, q.anchor_pump_nm)?;
    let temps = stepped(q.tuning_start_c, q.tuning_stop_c, q.tuning_step_c);
    let curve = tuning_curve(&qcfg, &model, &temps)?;
    let rows: Vec<Row> = curve
        .iter()
        .map(|p| Row {
            temperature_c: p.temperature_c,
            signal_nm: p.signal_nm,
            idler_nm: p.idler_nm,
            slope_rad_per_um_per_nm: p.slope,
            degenerate: p.degenerate,
        })
        .collect();
    report.output("tuning_points", rows.len());
    write_rows(&dir, "qpm_tuning.csv", &rows, &mut report)?;
    std::fs::write(dir.join("dispersion_calibrated.toml"), model.to_toml_string())?;
    report.files.push("dispersion_calibrated.toml".into());
    report
        .notes
        .push("the index offset is fitted to the anchor; periods at other pumps are predictions".into());
    finish(&dir, report)
}

/// Spectrum, filter and the quantities derived from them.
pub struct SpectralModel {
    pub unfiltered: EmissionSpectrum<f64>,
    pub filtered: Option<FilterOutcome<f64>>,
    /// Spectral indistinguishability ceiling after filtering.
    pub v0: f64,
    pub coherence_time_ps: f64,
    pub bandwidth_ghz: f64,
}

/// Wavelength of the degenerate emission peak, nm.
pub const DEGENERATE_CENTER_NM: f64 = pairsource::spdc::spectrum::DEGENERATE_CENTER_NM;

pub fn spectral_model(cfg: &ExperimentConfig) -> Result<SpectralModel, CliError> {
    let s = &cfg.spectrum;
    let mut branches = vec![SpectralBranch {
        center_h: DEGENERATE_CENTER_NM,
        center_v: DEGENERATE_CENTER_NM,
        fwhm: s.natural_fwhm_nm,
        weight: 1.0 - s.sideband_fraction,
    }];
    if s.sideband_fraction > 0.0 {
        branches.push(SpectralBranch {
            center_h: s.sideband_centers_nm[0],
            center_v: s.sideband_centers_nm[1],
            fwhm: s.natural_fwhm_nm,
            weight: s.sideband_fraction,
        });
    }
    let unfiltered = EmissionSpectrum::new(branches, DEGENERATE_CENTER_NM / 2.0, s.line_shape)?;
    if cfg.filter.enabled {
        let f = &cfg.filter;
        let spec = FilterSpec::new(f.center_nm, f.fwhm_nm, f.shape)?;
        let out = apply_filter(&unfiltered, &spec)?;
        Ok(SpectralModel {
            v0: out.spectrum.indistinguishability(),
            coherence_time_ps: coherence_time(f.center_nm, f.fwhm_nm),
            bandwidth_ghz: bandwidth_ghz(f.center_nm, f.fwhm_nm),
            unfiltered,
            filtered: Some(out),
        })
    } else {
        Ok(SpectralModel {
            v0: unfiltered.indistinguishability(),
            coherence_time_ps: coherence_time(DEGENERATE_CENTER_NM, s.natural_fwhm_nm),
            bandwidth_ghz: bandwidth_ghz(DEGENERATE_CENTER_NM, s.natural_fwhm_nm),
            unfiltered,
            filtered: None,
        })
    }
}

pub fn cmd_spectrum(cfg: &ExperimentConfig) -> Result<RunReport, CliError> {
    let dir = out_dir(cfg)?;
    let mut report = RunReport::new("spectrum", cfg);
    let m = spectral_model(cfg)?;

    #[derive(Serialize)]
    struct Row {
        wavelength_nm: f64,
        h_unfiltered: f64,
        v_unfiltered: f64,
        h_filtered: f64,
        v_filtered: f64,
    }
    let s = &cfg.spectrum;
    let after = m.filtered.as_ref().map(|f| &f.spectrum).unwrap_or(&m.unfiltered);
    let rows: Vec<Row> = stepped(s.plot_start_nm, s.plot_stop_nm, s.plot_step_nm)
        .into_iter()
        .map(|l| Row {
            wavelength_nm: l,
            h_unfiltered: m.unfiltered.marginal(Polarization::H, l),
            v_unfiltered: m.unfiltered.marginal(Polarization::V, l),
            h_filtered: after.marginal(Polarization::H, l),
            v_filtered: after.marginal(Polarization::V, l),
        })
        .collect();
    write_rows(&dir, "spectrum.csv", &rows, &mut report)?;

    report.output("sideband_fraction_unfiltered", m.unfiltered.sideband_fraction());
    report.output("v0_unfiltered", m.unfiltered.indistinguishability());
    if let Some(f) = &m.filtered {
        report.output("sideband_fraction_filtered", f.sideband_after);
        report.output("transmitted_fraction", f.transmitted_fraction);
    }
    report.output("v0", m.v0);
    report.output("coherence_time_ps", m.coherence_time_ps);
    report.output("bandwidth_ghz", m.bandwidth_ghz);
    finish(&dir, report)
}

/// Rates feeding the scan simulations.
#[derive(Debug, Clone, Serialize)]
pub struct RateModel {
    pub budget: SourceBudget<f64>,
    pub rates: CountRates<f64>,
    /// Coincidence rate at full interference, counts/s.
    pub peak_rate: f64,
    /// Accidental rate used for the scans and for net correction.
    pub accidental_rate: f64,
    pub true_peak_rate: f64,
    pub losses_calibrated: bool,
}

pub fn rate_model(cfg: &ExperimentConfig, spectral: &SpectralModel) -> Result<RateModel, CliError> {
    let s = &cfg.source;
    let budget = SourceBudget {
        brightness: s.brightness,
        pump_power_mw: s.pump_power_mw,
        filter_bandwidth_ghz: spectral.bandwidth_ghz,
        window_ns: s.window_ns,
        loss_a_db: cfg.losses.a_db,
        loss_b_db: cfg.losses.b_db,
        bs_separation_prob: s.bs_separation_prob,
        double_pairs: s.double_pairs,
    };
    let (da, db) = (&cfg.detector.a, &cfg.detector.b);
    let calibrate = cfg.losses.calibrate && s.pump_power_mw > 0.0;
    let budget = if calibrate {
        calibrate_losses(
            &budget,
            da,
            db,
            cfg.losses.target_singles_cps,
            cfg.losses.target_coincidences_cps,
        )?
        .budget
    } else {
        budget
    };
    let rates = expected_rates(&budget, da, db, 1.0)?;
    let peak_rate = rates.coincidences;
    let accidental_rate = match s.accidental_fraction {
        Some(f) => f * peak_rate,
        None => rates.accidentals,
    };
    Ok(RateModel {
        budget,
        rates,
        peak_rate,
        accidental_rate,
        true_peak_rate: peak_rate - accidental_rate,
        losses_calibrated: calibrate,
    })
}

/// Counts for a scan whose true coincidence rate at point `i` is `true_rates[i]`.
fn scan_counts(
    cfg: &ExperimentConfig,
    x: Vec<f64>,
    true_rates: &[f64],
    r_acc: f64,
    integration_s: f64,
    seed: u64,
) -> Result<ScanData<f64>, CliError> {
    let counts = if cfg.mc.enabled {
        simulate_scan_counts(true_rates, r_acc, integration_s, seed)?
    } else {
        true_rates.iter().map(|r| (r + r_acc) * integration_s).collect()
    };
    Ok(ScanData::uniform(x, counts, integration_s)?)
}

fn fit_summary(fit: &FitResult<f64>) -> Value {
    json!({
        "params": fit.params,
        "std_errors": fit.std_errors,
        "reduced_chi2": fit.reduced_chi2,
    })
}

/// Fringe contrast `(max - min) / max` and its error from the cosine
/// amplitude `v` of a fringe fit.
pub fn fringe_contrast(v: f64, err: f64) -> (f64, f64) {
    (2.0 * v / (1.0 + v), 2.0 * err / ((1.0 + v) * (1.0 + v)))
}

fn fringe_json(fit: &FitResult<f64>) -> Value {
    let v = fit.param("V").unwrap_or(f64::NAN);
    let (c, c_err) = fringe_contrast(v, fit.error("V").unwrap_or(f64::NAN));
    json!({ "visibility": c, "visibility_err": c_err, "amplitude": v })
}

fn describe_basis(hwp: f64) -> &'static str {
    match pairsource::interference::BasisTag::from_hwp(hwp) {
        pairsource::interference::BasisTag::Hv => "HV",
        pairsource::interference::BasisTag::Da => "DA",
    }
}

pub fn cmd_hom(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunReport, CliError> {
    let dir = out_dir(cfg)?;
    let mut report = RunReport::new("hom", cfg);
    let spectral = spectral_model(cfg)?;
    let rm = rate_model(cfg, &spectral)?;
    let wp = Wavepacket::gaussian(spectral.coherence_time_ps)?;
    let h = &cfg.hom;
    let delays = linspace(h.delay_start_ps, h.delay_stop_ps, h.points);

    report.derive("v0", spectral.v0);
    report.derive("coherence_time_ps", spectral.coherence_time_ps);
    report.derive("model_dip_fwhm_ps", hom_dip_fwhm(&wp));
    report.derive("peak_rate_cps", rm.peak_rate);
    report.derive("accidental_rate_cps", rm.accidental_rate);
    let model_v = visibility_net(rm.peak_rate, rm.peak_rate - rm.true_peak_rate * spectral.v0, rm.accidental_rate)?;
    report.derive("model_visibility", model_v);

    let users = [("a", cfg.compensator.dip_center_a_ps), ("b", cfg.compensator.dip_center_b_ps)];
    let mut scans = Vec::new();
    for (k, (user, center)) in users.iter().enumerate() {
        let scan = hom_scan(&wp, &delays, spectral.v0, *center)?;
        let true_rates: Vec<f64> = scan
            .coincidence_probability
            .iter()
            .map(|p| 2.0 * p * rm.true_peak_rate)
            .collect();
        let data = scan_counts(cfg, delays.clone(), &true_rates, rm.accidental_rate, h.integration_s, sub_seed(cfg.seed, k as u64))?;
        let written = if opts.net { net_correct(&data, rm.accidental_rate)? } else { data.clone() };
        write_scan(&dir, &format!("hom_scan_{user}.csv"), &written, &mut report)?;
        scans.push((*user, data));
    }

    let mut fits = BTreeMap::new();
    let mut users_out = BTreeMap::new();
    for (user, data) in &scans {
        let raw = fit_dip(data)?;
        let net = fit_dip(&net_correct(data, rm.accidental_rate)?)?;
        let w = net.param("w").unwrap_or(f64::NAN);
        users_out.insert(
            user.to_string(),
            json!({
                "visibility_raw": raw.param("V"),
                "visibility_raw_err": raw.error("V"),
                "visibility_net": net.param("V"),
                "visibility_net_err": net.error("V"),
                "dip_fwhm_ps": w,
                "dip_fwhm_err_ps": net.error("w"),
                "dip_center_ps": net.param("x0"),
                "coherence_time_from_fwhm_ps": w / std::f64::consts::SQRT_2,
            }),
        );
        fits.insert(format!("{user}_raw"), fit_summary(&raw));
        fits.insert(format!("{user}_net"), fit_summary(&net));
    }
    write_json(&dir, "hom_fits.json", &fits, &mut report)?;
    report.output("users", users_out);
    report.output("reference_dip_fwhm_ps", cfg.reference.dip_fwhm_ps);
    report.notes.push(format!(
        "model dip FWHM {:.3} ps vs reference measurement {:.2} ps; a wider dip corresponds to a longer coherence time than the filter bandwidth implies",
        hom_dip_fwhm(&wp),
        cfg.reference.dip_fwhm_ps
    ));
    if let Some(f) = cfg.source.accidental_fraction {
        report.notes.push(format!(
            "accidental rate set to {f} of the peak coincidence rate; the detector model alone gives {:.1} cps",
            rm.rates.accidentals
        ));
    }
    finish(&dir, report)
}

/// Bell state actually distributed after balancing and compensation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BellState {
    pub sb_phase_rad: f64,
    pub total_phase_rad: f64,
    pub compensator_ps: f64,
    pub residual_delay_ps: f64,
    pub coherence: f64,
}

pub fn bell_state(cfg: &ExperimentConfig, spectral: &SpectralModel) -> Result<BellState, CliError> {
    let wp = Wavepacket::gaussian(spectral.coherence_time_ps)?;
    let ch = &cfg.channel;
    let sb = sb_balance(ch.phi_a, ch.phi_b);
    let (mid, residual) = intermediate_position(cfg.compensator.dip_center_a_ps, cfg.compensator.dip_center_b_ps);
    Ok(BellState {
        sb_phase_rad: sb,
        total_phase_rad: ch.phi_a + ch.phi_b + sb,
        compensator_ps: mid,
        residual_delay_ps: residual,
        coherence: bell_coherence(spectral.v0, &wp, residual)?,
    })
}

fn chsh_value(fits: &[(f64, FitResult<f64>)], settings: [f64; 4]) -> Result<pairsource::interference::ChshResult<f64>, CliError> {
    let fringes: Vec<FringeFit<'_, f64>> = fits
        .iter()
        .map(|(a, fit)| FringeFit {
            alice_hwp_deg: *a,
            fit,
        })
        .collect();
    Ok(chsh_from_fits(&fringes, settings)?)
}

pub fn cmd_bell(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunReport, CliError> {
    let dir = out_dir(cfg)?;
    let mut report = RunReport::new("bell", cfg);
    let spectral = spectral_model(cfg)?;
    let rm = rate_model(cfg, &spectral)?;
    let state = bell_state(cfg, &spectral)?;
    report.derive("v0", spectral.v0);
    report.derive("coherence_time_ps", spectral.coherence_time_ps);
    report.derive("state", state);
    report.derive("peak_rate_cps", rm.peak_rate);
    report.derive("accidental_rate_cps", rm.accidental_rate);
    let rho = make_psi_state(state.coherence, state.total_phase_rad)?;
    report.derive("model_S", chsh_of_state(&rho, cfg.bell.chsh_settings_deg));

    let b = &cfg.bell;
    let bob = linspace(b.bob_start_deg, b.bob_stop_deg, b.points);
    let mut scans = Vec::new();
    for (k, &alice) in b.alice_hwp_deg.iter().enumerate() {
        let scan = bell_scan(state.coherence, state.total_phase_rad, alice, &bob)?;
        let true_rates: Vec<f64> = scan
            .coincidence_probability
            .iter()
            .map(|p| 2.0 * p * rm.true_peak_rate)
            .collect();
        let data = scan_counts(cfg, bob.clone(), &true_rates, rm.accidental_rate, b.integration_s, sub_seed(cfg.seed, 100 + k as u64))?;
        let written = if opts.net { net_correct(&data, rm.accidental_rate)? } else { data.clone() };
        write_scan(&dir, &format!("bell_scan_hwp{alice}.csv"), &written, &mut report)?;
        scans.push((alice, data));
    }

    let mut raw_fits = Vec::new();
    let mut net_fits = Vec::new();
    let mut fringes_out = Vec::new();
    for (alice, data) in &scans {
        let raw = fit_fringe(data)?;
        let net = fit_fringe(&net_correct(data, rm.accidental_rate)?)?;
        fringes_out.push(json!({
            "alice_hwp_deg": alice,
            "basis": describe_basis(*alice),
            "raw": fringe_json(&raw),
            "net": fringe_json(&net),
            "theta0_deg": net.param("theta0"),
        }));
        raw_fits.push((*alice, raw));
        net_fits.push((*alice, net));
    }
    let fits_json: BTreeMap<String, Value> = raw_fits
        .iter()
        .map(|(a, f)| (format!("hwp{a}_raw"), fit_summary(f)))
        .chain(net_fits.iter().map(|(a, f)| (format!("hwp{a}_net"), fit_summary(f))))
        .collect();
    write_json(&dir, "bell_fits.json", &fits_json, &mut report)?;
    report.output("fringes", fringes_out);
    report.notes.push(
        "fringe visibility is the contrast (max - min)/max; CHSH correlations use the fitted cosine amplitude".into(),
    );

    if b.alice_hwp_deg.len() == 4 {
        report.output("chsh_raw", chsh_value(&raw_fits, b.chsh_settings_deg)?);
        report.output("chsh_net", chsh_value(&net_fits, b.chsh_settings_deg)?);
    } else {
        report.notes.push("CHSH needs exactly four Alice settings; skipped".into());
    }
    finish(&dir, report)
}

/// CHSH from four measured fringe scans (CSV files in `bell.alice_hwp_deg` order).
pub fn cmd_chsh(cfg: &ExperimentConfig, opts: &RunOptions, scans: &[PathBuf]) -> Result<RunReport, CliError> {
    let dir = out_dir(cfg)?;
    let mut report = RunReport::new("chsh", cfg);
    if scans.len() != cfg.bell.alice_hwp_deg.len() {
        return Err(CliError::Config(format!(
            "{} scan files given for {} Alice settings",
            scans.len(),
            cfg.bell.alice_hwp_deg.len()
        )));
    }
    let r_acc = if opts.net {
        let spectral = spectral_model(cfg)?;
        Some(rate_model(cfg, &spectral)?.accidental_rate)
    } else {
        None
    };
    let mut fits = Vec::new();
    let mut out = Vec::new();
    for (path, &alice) in scans.iter().zip(&cfg.bell.alice_hwp_deg) {
        let data = ScanData::<f64>::from_csv_path(path)?;
        let data = match r_acc {
            Some(r) => net_correct(&data, r)?,
            None => data,
        };
        let fit = fit_fringe(&data)?;
        out.push(json!({
            "file": path.display().to_string(),
            "alice_hwp_deg": alice,
            "fringe": fringe_json(&fit),
        }));
        fits.push((alice, fit));
    }
    report.derive("accidental_rate_cps", r_acc);
    report.output("fringes", out);
    report.output("chsh", chsh_value(&fits, cfg.bell.chsh_settings_deg)?);
    finish(&dir, report)
}

pub fn cmd_rates(cfg: &ExperimentConfig) -> Result<RunReport, CliError> {
    let dir = out_dir(cfg)?;
    let mut report = RunReport::new("rates", cfg);
    let spectral = spectral_model(cfg)?;
    let rm = rate_model(cfg, &spectral)?;
    let (da, db) = (&cfg.detector.a, &cfg.detector.b);
    let r = &rm.rates;

    report.derive("bandwidth_ghz", spectral.bandwidth_ghz);
    report.derive("mean_pairs_per_window", mean_pairs_per_window(&rm.budget));
    report.derive("loss_a_db", rm.budget.loss_a_db);
    report.derive("loss_b_db", rm.budget.loss_b_db);
    report.derive("losses_calibrated", rm.losses_calibrated);
    report.output("analytic", r);
    report.output(
        "singles_a_decomposition",
        json!({
            "dark_cps": r.breakdown.dark_rate_a,
            "photon_cps": r.singles_a - r.breakdown.dark_rate_a,
            "status": "fitted by the loss calibration, not predicted",
        }),
    );
    report.output(
        "calibration_targets",
        json!({
            "singles_a_cps": { "value": cfg.losses.target_singles_cps, "status": CALIBRATION_TARGET },
            "coincidences_cps": { "value": cfg.losses.target_coincidences_cps, "status": CALIBRATION_TARGET },
            "conversion_efficiency": { "value": cfg.reference.conversion_efficiency, "status": CALIBRATION_TARGET },
        }),
    );
    report.output(
        "accidentals_used_for_scans_cps",
        json!({ "value": rm.accidental_rate, "model_cps": r.accidentals }),
    );

    if cfg.mc.enabled {
        let run = simulate_counts(&rm.budget, da, db, 1.0, cfg.mc.n_windows, cfg.seed)?;
        let t = &run.tallies;
        let mut cmp = BTreeMap::new();
        for (name, count, expected) in [
            ("singles_a", t.singles_a(), r.singles_a),
            ("singles_b", t.singles_b(), r.singles_b),
            ("coincidences", t.coincidences(), r.coincidences),
            ("accidentals", t.accidental_coincidence, r.accidentals),
        ] {
            let (rate, sd) = run.rate(count);
            let seconds = run.n_windows as f64 * run.window_ns * 1e-9;
            let expected_sd = (expected * seconds).sqrt() / seconds;
            let sigma = if expected_sd > 0.0 { (rate - expected) / expected_sd } else { 0.0 };
            cmp.insert(
                name.to_string(),
                json!({ "mc_cps": rate, "mc_sd_cps": sd, "analytic_cps": expected, "deviation_sigma": sigma }),
            );
        }
        write_json(&dir, "rates_mc.json", &run, &mut report)?;
        report.output("monte_carlo", cmp);
    }
    finish(&dir, report)
}
