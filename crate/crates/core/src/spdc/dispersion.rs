//! Temperature-dependent refractive indices for the two guided polarizations.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Polarization of a guided photon. For the type-II process modelled here the
/// `H` mode sees the ordinary index and `V` the extraordinary one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    H,
    V,
}

/// Wavelength validity window of the dispersion fit, nm.
pub const MIN_WAVELENGTH_NM: f64 = 400.0;
pub const MAX_WAVELENGTH_NM: f64 = 2000.0;

/// `n^2 = a1 + (a2 + b1 F)/(l^2 - (a3 + b2 F)^2) + b3 F - a4 l^2`, `l` in um.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SellmeierTerms<T> {
    pub a1: T,
    pub a2: T,
    pub a3: T,
    pub a4: T,
}

/// Temperature dependence through `F = (T - t_ref)(T + t_shift)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalTerms<T> {
    pub b1: T,
    pub b2: T,
    pub b3: T,
    pub t_ref: T,
    pub t_shift: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexModel<T> {
    pub sellmeier: SellmeierTerms<T>,
    pub thermo: ThermalTerms<T>,
    /// Additive effective-index correction.
    pub offset: T,
}

impl<T: Real> IndexModel<T> {
    fn bulk_index(&self, lambda_um: T, temperature_c: T) -> T {
        let s = &self.sellmeier;
        let t = &self.thermo;
        let f = (temperature_c - t.t_ref) * (temperature_c + t.t_shift);
        let l2 = lambda_um * lambda_um;
        let pole = s.a3 + t.b2 * f;
        let n2 = s.a1 + (s.a2 + t.b1 * f) / (l2 - pole * pole) + t.b3 * f - s.a4 * l2;
        n2.sqrt()
    }
}

/// Per-polarization dispersion of the waveguide.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersionModel<T> {
    pub name: String,
    pub h: IndexModel<T>,
    pub v: IndexModel<T>,
    /// Set once the offsets have been fitted to a known phase-matching point.
    pub calibrated: bool,
}

impl<T: Real> DispersionModel<T> {
    /// Parses the key-value dispersion file (`sellmeier.<pol>.<term>`,
    /// `thermo.<pol>.<term>`, `offset.<pol>`).
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: DispersionFile =
            toml::from_str(text).map_err(|e| Error::DispersionFile(e.to_string()))?;
        let model = file.into_model();
        model.check_physical()?;
        Ok(model)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::DispersionFile(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Bulk congruent LiNbO3 table shipped in `data/linbo3_congruent.toml`.
    pub fn congruent_linbo3() -> Self {
        Self::from_toml_str(include_str!("../../data/linbo3_congruent.toml"))
            .expect("bundled dispersion table is valid")
    }

    /// Serializes back to the key-value file format.
    pub fn to_toml_string(&self) -> String {
        let file = DispersionFile::from_model(self);
        toml::to_string(&file).expect("dispersion table serializes")
    }

    pub fn index_model(&self, pol: Polarization) -> &IndexModel<T> {
        match pol {
            Polarization::H => &self.h,
            Polarization::V => &self.v,
        }
    }

    pub fn index_model_mut(&mut self, pol: Polarization) -> &mut IndexModel<T> {
        match pol {
            Polarization::H => &mut self.h,
            Polarization::V => &mut self.v,
        }
    }

    pub fn offset(&self, pol: Polarization) -> T {
        self.index_model(pol).offset
    }

    pub fn with_offset(&self, pol: Polarization, offset: T) -> Self {
        let mut out = self.clone();
        out.index_model_mut(pol).offset = offset;
        out
    }

    fn check_physical(&self) -> Result<()> {
        for pol in [Polarization::H, Polarization::V] {
            for k in 0..=16 {
                let lambda = T::lit(MIN_WAVELENGTH_NM + 100.0 * k as f64);
                for temp in [20.0, 110.0, 200.0] {
                    let n = refractive_index(self, lambda, T::lit(temp), pol)?;
                    if !(n > T::one() && n < T::lit(3.0)) {
                        return Err(Error::DispersionFile(format!(
                            "index {} at {} nm, {temp} C outside (1, 3)",
                            n.as_f64(),
                            lambda.as_f64()
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Effective index `n(lambda, T) + offset(pol)`; `lambda_nm` must lie in
/// `[400, 2000]` nm.
pub fn refractive_index<T: Real>(
    model: &DispersionModel<T>,
    lambda_nm: T,
    temperature_c: T,
    pol: Polarization,
) -> Result<T> {
    let lo = T::lit(MIN_WAVELENGTH_NM);
    let hi = T::lit(MAX_WAVELENGTH_NM);
    if !(lambda_nm >= lo && lambda_nm <= hi) {
        return Err(Error::OutOfRange {
            what: "wavelength (nm)",
            value: lambda_nm.as_f64(),
            range: "[400, 2000]",
        });
    }
    let m = model.index_model(pol);
    Ok(m.bulk_index(lambda_nm / T::lit(1000.0), temperature_c) + m.offset)
}

#[derive(Debug, Serialize, Deserialize)]
struct DispersionFile {
    #[serde(default)]
    name: String,
    sellmeier: PerPol<SellmeierFile>,
    thermo: PerPol<ThermoFile>,
    #[serde(default)]
    offset: OffsetFile,
}

#[derive(Debug, Serialize, Deserialize)]
struct PerPol<X> {
    h: X,
    v: X,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SellmeierFile {
    a1: f64,
    a2: f64,
    a3: f64,
    a4: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ThermoFile {
    b1: f64,
    b2: f64,
    b3: f64,
    t_ref: f64,
    t_shift: f64,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OffsetFile {
    #[serde(default)]
    h: f64,
    #[serde(default)]
    v: f64,
}

impl DispersionFile {
    fn into_model<T: Real>(self) -> DispersionModel<T> {
        let conv = |s: &SellmeierFile, t: &ThermoFile, offset: f64| IndexModel {
            sellmeier: SellmeierTerms {
                a1: T::lit(s.a1),
                a2: T::lit(s.a2),
                a3: T::lit(s.a3),
                a4: T::lit(s.a4),
            },
            thermo: ThermalTerms {
                b1: T::lit(t.b1),
                b2: T::lit(t.b2),
                b3: T::lit(t.b3),
                t_ref: T::lit(t.t_ref),
                t_shift: T::lit(t.t_shift),
            },
            offset: T::lit(offset),
        };
        DispersionModel {
            name: self.name,
            h: conv(&self.sellmeier.h, &self.thermo.h, self.offset.h),
            v: conv(&self.sellmeier.v, &self.thermo.v, self.offset.v),
            calibrated: false,
        }
    }

    fn from_model<T: Real>(model: &DispersionModel<T>) -> Self {
        let s = |m: &IndexModel<T>| SellmeierFile {
            a1: m.sellmeier.a1.as_f64(),
            a2: m.sellmeier.a2.as_f64(),
            a3: m.sellmeier.a3.as_f64(),
            a4: m.sellmeier.a4.as_f64(),
        };
        let t = |m: &IndexModel<T>| ThermoFile {
            b1: m.thermo.b1.as_f64(),
            b2: m.thermo.b2.as_f64(),
            b3: m.thermo.b3.as_f64(),
            t_ref: m.thermo.t_ref.as_f64(),
            t_shift: m.thermo.t_shift.as_f64(),
        };
        DispersionFile {
            name: model.name.clone(),
            sellmeier: PerPol { h: s(&model.h), v: s(&model.v) },
            thermo: PerPol { h: t(&model.h), v: t(&model.v) },
            offset: OffsetFile {
                h: model.h.offset.as_f64(),
                v: model.v.offset.as_f64(),
            },
        }
    }
}
