//! Experiment manifest. TOML with dotted sections; every field has a default
//! so a file only needs the keys it changes.

use std::path::{Path, PathBuf};

use pairsource::counting::{DetectorMode, DetectorParams};
use pairsource::spdc::{LineShape, Polarization};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub output: OutputSection,
    pub dispersion: DispersionSection,
    pub qpm: QpmSection,
    pub spectrum: SpectrumSection,
    pub filter: FilterSection,
    pub source: SourceSection,
    pub losses: LossSection,
    pub detector: DetectorSection,
    pub compensator: CompensatorSection,
    pub channel: ChannelSection,
    pub hom: HomSection,
    pub bell: BellSection,
    pub mc: McSection,
    pub reference: ReferenceSection,
    /// Directory of the file this was read from; relative paths resolve here.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub timestamp: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DispersionSection {
    /// Index table; empty selects the bundled congruent LiNbO3 table.
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QpmSection {
    pub anchor_period_um: f64,
    pub anchor_temperature_c: f64,
    pub anchor_pump_nm: f64,
    pub anchor_signal_nm: f64,
    pub anchor_polarization: Polarization,
    pub temperature_c: f64,
    pub design_pumps_nm: Vec<f64>,
    pub tuning_start_c: f64,
    pub tuning_stop_c: f64,
    pub tuning_step_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    pub natural_fwhm_nm: f64,
    pub sideband_fraction: f64,
    pub sideband_centers_nm: [f64; 2],
    pub line_shape: LineShape,
    pub plot_start_nm: f64,
    pub plot_stop_nm: f64,
    pub plot_step_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSection {
    pub enabled: bool,
    pub center_nm: f64,
    pub fwhm_nm: f64,
    pub shape: LineShape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceSection {
    /// Pairs per second per GHz per mW.
    pub brightness: f64,
    pub pump_power_mw: f64,
    pub window_ns: f64,
    pub bs_separation_prob: f64,
    pub double_pairs: bool,
    /// Accidentals as a fraction of the peak coincidence rate. When absent the
    /// detector model's own accidental rate is used.
    pub accidental_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossSection {
    pub a_db: f64,
    pub b_db: f64,
    /// Fit `a_db` and `b_db` to the target rates below.
    pub calibrate: bool,
    pub target_singles_cps: f64,
    pub target_coincidences_cps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    pub a: DetectorParams<f64>,
    pub b: DetectorParams<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompensatorSection {
    /// Delay at which each user's dip is centered, ps.
    pub dip_center_a_ps: f64,
    pub dip_center_b_ps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    /// Birefringent phases picked up on the way to each user, rad.
    pub phi_a: f64,
    pub phi_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HomSection {
    pub delay_start_ps: f64,
    pub delay_stop_ps: f64,
    pub points: usize,
    pub integration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BellSection {
    pub alice_hwp_deg: Vec<f64>,
    pub bob_start_deg: f64,
    pub bob_stop_deg: f64,
    pub points: usize,
    pub integration_s: f64,
    /// Polarizer angles `[a, a', b, b']`.
    pub chsh_settings_deg: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub enabled: bool,
    pub n_windows: u64,
}

/// Reference values reported next to the model output. They are inputs the
/// model is calibrated to, never outputs it predicts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceSection {
    pub conversion_efficiency: f64,
    pub dip_fwhm_ps: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 2010,
            output: OutputSection::default(),
            dispersion: DispersionSection::default(),
            qpm: QpmSection::default(),
            spectrum: SpectrumSection::default(),
            filter: FilterSection::default(),
            source: SourceSection::default(),
            losses: LossSection::default(),
            detector: DetectorSection::default(),
            compensator: CompensatorSection::default(),
            channel: ChannelSection::default(),
            hom: HomSection::default(),
            bell: BellSection::default(),
            mc: McSection::default(),
            reference: ReferenceSection::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            timestamp: true,
        }
    }
}

impl Default for QpmSection {
    fn default() -> Self {
        Self {
            anchor_period_um: 6.6,
            anchor_temperature_c: 96.8,
            anchor_pump_nm: 655.0,
            anchor_signal_nm: 1310.0,
            anchor_polarization: Polarization::V,
            temperature_c: 96.8,
            design_pumps_nm: vec![655.0, 780.0],
            tuning_start_c: 90.0,
            tuning_stop_c: 104.0,
            tuning_step_c: 0.5,
        }
    }
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self {
            natural_fwhm_nm: 0.7,
            sideband_fraction: 0.15,
            sideband_centers_nm: [1308.7, 1310.9],
            line_shape: LineShape::Gaussian,
            plot_start_nm: 1306.0,
            plot_stop_nm: 1314.0,
            plot_step_nm: 0.02,
        }
    }
}

impl Default for FilterSection {
    fn default() -> Self {
        Self {
            enabled: true,
            center_nm: 1310.0,
            fwhm_nm: 0.5,
            shape: LineShape::Gaussian,
        }
    }
}

impl Default for SourceSection {
    fn default() -> Self {
        Self {
            brightness: 3e5,
            pump_power_mw: 2.5,
            window_ns: 1.5,
            bs_separation_prob: 0.5,
            double_pairs: false,
            accidental_fraction: Some(0.17),
        }
    }
}

impl Default for LossSection {
    fn default() -> Self {
        Self {
            a_db: 10.5,
            b_db: 10.5,
            calibrate: true,
            target_singles_cps: 85_000.0,
            target_coincidences_cps: 450.0,
        }
    }
}

impl Default for DetectorSection {
    fn default() -> Self {
        Self {
            a: DetectorParams::germanium_trigger(),
            b: DetectorParams::ingaas_gated(),
        }
    }
}

impl Default for CompensatorSection {
    fn default() -> Self {
        Self {
            dip_center_a_ps: 0.43,
            dip_center_b_ps: -0.43,
        }
    }
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self { phi_a: 0.3, phi_b: 0.4 }
    }
}

impl Default for HomSection {
    fn default() -> Self {
        Self {
            delay_start_ps: -20.0,
            delay_stop_ps: 20.0,
            points: 41,
            integration_s: 60.0,
        }
    }
}

impl Default for BellSection {
    fn default() -> Self {
        Self {
            alice_hwp_deg: vec![0.0, 22.5, 45.0, 67.5],
            bob_start_deg: 0.0,
            bob_stop_deg: 180.0,
            points: 41,
            integration_s: 60.0,
            chsh_settings_deg: pairsource::interference::CHSH_SETTINGS_DEG,
        }
    }
}

impl Default for McSection {
    fn default() -> Self {
        Self {
            enabled: true,
            n_windows: 200_000_000,
        }
    }
}

impl Default for ReferenceSection {
    fn default() -> Self {
        Self {
            conversion_efficiency: 1.1e-9,
            dip_fwhm_ps: 7.45,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        self.detector.a.validate()?;
        self.detector.b.validate()?;
        if self.detector.a.mode == DetectorMode::Gated {
            return bad("detector.a is the trigger and must be free_running".into());
        }
        if let Some(f) = self.source.accidental_fraction {
            if !(0.0..1.0).contains(&f) {
                return bad(format!("source.accidental_fraction {f} outside [0, 1)"));
            }
        }
        for (name, n) in [("hom.points", self.hom.points), ("bell.points", self.bell.points)] {
            if n < 6 {
                return bad(format!("{name} = {n}; at least 6 points are needed for a fit"));
            }
        }
        for (name, t) in [("hom.integration_s", self.hom.integration_s), ("bell.integration_s", self.bell.integration_s)] {
            if !(t > 0.0 && t.is_finite()) {
                return bad(format!("{name} must be positive"));
            }
        }
        if !(self.qpm.tuning_step_c > 0.0) || self.qpm.tuning_stop_c < self.qpm.tuning_start_c {
            return bad("qpm tuning range must be increasing with a positive step".into());
        }
        if !(self.spectrum.plot_step_nm > 0.0) || self.spectrum.plot_stop_nm <= self.spectrum.plot_start_nm {
            return bad("spectrum plot range must be increasing with a positive step".into());
        }
        if self.mc.n_windows == 0 {
            return bad("mc.n_windows must be at least 1".into());
        }
        Ok(())
    }
}
