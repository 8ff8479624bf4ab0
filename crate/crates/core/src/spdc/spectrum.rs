//! Dual-branch emission spectrum and pair-level spectral filtering.
//!
//! Each branch describes one family of photon pairs: the H photon is spread
//! around `center_h` with the branch line shape, and its V partner follows
//! from energy conservation with the (monochromatic) pump. A pair survives a
//! filter only if both photons are transmitted.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::dispersion::Polarization;

/// Line shape of a branch or a filter passband, normalized to unit peak.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LineShape {
    Gaussian,
    FlatTop,
    Sinc2,
}

/// `sinc^2(pi x)` drops to one half at `x = SINC2_HALF_WIDTH`.
const SINC2_HALF_WIDTH: f64 = 0.442_946_470_689_452_3;

impl LineShape {
    /// Profile value at `offset` from the center for the given FWHM.
    pub fn profile<T: Real>(self, offset: T, fwhm: T) -> T {
        if fwhm.is_infinite() {
            return T::one();
        }
        match self {
            LineShape::Gaussian => {
                let x = offset / fwhm;
                (-T::lit(4.0) * T::LN_2() * x * x).exp()
            }
            LineShape::FlatTop => {
                if offset.abs() <= fwhm * T::lit(0.5) {
                    T::one()
                } else {
                    T::zero()
                }
            }
            LineShape::Sinc2 => {
                let x = T::PI() * T::lit(SINC2_HALF_WIDTH * 2.0) * offset / fwhm;
                if x == T::zero() {
                    T::one()
                } else {
                    let s = x.sin() / x;
                    s * s
                }
            }
        }
    }

    /// Integration half-window (in FWHM units) capturing the branch support.
    fn support<T: Real>(self) -> T {
        match self {
            LineShape::Gaussian => T::lit(4.0),
            LineShape::FlatTop => T::lit(0.5),
            LineShape::Sinc2 => T::lit(40.0),
        }
    }
}

/// One phase-matching solution of the waveguide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralBranch<T> {
    pub center_h: T,
    pub center_v: T,
    pub fwhm: T,
    pub weight: T,
}

/// Spectral filter acting on both photons of a pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec<T> {
    pub center: T,
    pub fwhm: T,
    pub shape: LineShape,
}

impl<T: Real> FilterSpec<T> {
    pub fn new(center: T, fwhm: T, shape: LineShape) -> Result<Self> {
        if !(fwhm > T::zero()) {
            return Err(Error::OutOfRange {
                what: "filter FWHM (nm)",
                value: fwhm.as_f64(),
                range: "(0, inf]",
            });
        }
        Ok(Self { center, fwhm, shape })
    }

    pub fn transmission(&self, lambda_nm: T) -> T {
        self.shape.profile(lambda_nm - self.center, self.fwhm)
    }
}

/// Weighted set of branches plus the filters already applied to it.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionSpectrum<T> {
    pub branches: Vec<SpectralBranch<T>>,
    pub pump_nm: T,
    pub line_shape: LineShape,
    pub filters: Vec<FilterSpec<T>>,
}

/// Relative tolerance on photon energy conservation, `|pump/center_h + pump/center_v - 1|`.
pub const ENERGY_TOLERANCE: f64 = 1e-5;
/// Tolerance on the sum of branch weights.
pub const WEIGHT_TOLERANCE: f64 = 1e-9;

/// Degenerate center of the main branch, nm.
pub const DEGENERATE_CENTER_NM: f64 = 1309.8;
/// Non-degenerate centers (H, V) of the secondary branch, nm.
pub const SIDEBAND_CENTERS_NM: (f64, f64) = (1308.7, 1310.9);
/// Measured FWHM of the main emission peak, nm.
pub const NATURAL_FWHM_NM: f64 = 0.7;
/// Relative weight of the secondary branch before filtering.
pub const SIDEBAND_FRACTION: f64 = 0.15;

const QUADRATURE_POINTS: usize = 4000;

impl<T: Real> EmissionSpectrum<T> {
    pub fn new(branches: Vec<SpectralBranch<T>>, pump_nm: T, line_shape: LineShape) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::InvalidInput("spectrum needs at least one branch".into()));
        }
        for b in &branches {
            if !(b.fwhm > T::zero()) {
                return Err(Error::OutOfRange {
                    what: "branch FWHM (nm)",
                    value: b.fwhm.as_f64(),
                    range: "(0, inf)",
                });
            }
            if !(b.weight >= T::zero() && b.weight <= T::one()) {
                return Err(Error::OutOfRange {
                    what: "branch weight",
                    value: b.weight.as_f64(),
                    range: "[0, 1]",
                });
            }
            let gap = pump_nm / b.center_h + pump_nm / b.center_v - T::one();
            if gap.abs() > T::lit(ENERGY_TOLERANCE) {
                return Err(Error::InvalidInput(format!(
                    "branch ({}, {}) nm violates energy conservation with a {} nm pump",
                    b.center_h.as_f64(),
                    b.center_v.as_f64(),
                    pump_nm.as_f64()
                )));
            }
        }
        let total: T = branches.iter().map(|b| b.weight).sum();
        if (total - T::one()).abs() > T::lit(WEIGHT_TOLERANCE) {
            return Err(Error::InvalidInput(format!(
                "branch weights sum to {}, expected 1",
                total.as_f64()
            )));
        }
        Ok(Self {
            branches,
            pump_nm,
            line_shape,
            filters: Vec::new(),
        })
    }

    /// Weight outside the first (primary) branch.
    pub fn sideband_fraction(&self) -> T {
        T::one() - self.branches[0].weight
    }

    /// Two-photon indistinguishability ceiling set by the spectral pollution.
    pub fn indistinguishability(&self) -> T {
        self.branches[0].weight
    }

    fn v_partner(&self, lambda_h: T) -> T {
        T::one() / (self.pump_nm.recip() - lambda_h.recip())
    }

    fn pass_all(&self, extra: Option<&FilterSpec<T>>, lambda_h: T, lambda_v: T) -> T {
        self.filters
            .iter()
            .chain(extra)
            .fold(T::one(), |acc, f| acc * f.transmission(lambda_h) * f.transmission(lambda_v))
    }

    /// Integral over the H detuning of `line(d) * filters * extra`.
    fn branch_integral(&self, branch: &SpectralBranch<T>, extra: Option<&FilterSpec<T>>) -> T {
        let half = branch.fwhm * self.line_shape.support::<T>();
        let n = QUADRATURE_POINTS;
        let h = half * T::lit(2.0) / T::lit(n as f64);
        // composite Simpson
        let mut acc = T::zero();
        for k in 0..=n {
            let d = -half + h * T::lit(k as f64);
            let lambda_h = branch.center_h + d;
            let lambda_v = self.v_partner(lambda_h);
            let w = if k == 0 || k == n {
                T::one()
            } else if k % 2 == 1 {
                T::lit(4.0)
            } else {
                T::lit(2.0)
            };
            acc += w * self.line_shape.profile(d, branch.fwhm) * self.pass_all(extra, lambda_h, lambda_v);
        }
        acc * h / T::lit(3.0)
    }

    /// Marginal spectral density of one polarization at `lambda_nm`, after
    /// the filters applied so far (arbitrary units, peak of an unfiltered
    /// branch equals its weight).
    pub fn marginal(&self, pol: Polarization, lambda_nm: T) -> T {
        self.branches
            .iter()
            .map(|b| {
                let norm_unfiltered = {
                    let bare = EmissionSpectrum {
                        filters: Vec::new(),
                        ..self.clone()
                    };
                    bare.branch_integral(b, None)
                };
                let norm = self.branch_integral(b, None);
                if norm <= T::zero() {
                    return T::zero();
                }
                let (lambda_h, jacobian) = match pol {
                    Polarization::H => (lambda_nm, T::one()),
                    Polarization::V => {
                        if !(lambda_nm > self.pump_nm) {
                            return T::zero();
                        }
                        let lh = self.v_partner(lambda_nm);
                        (lh, (lh / lambda_nm).powi(2))
                    }
                };
                let lambda_v = self.v_partner(lambda_h);
                let density = self.line_shape.profile(lambda_h - b.center_h, b.fwhm)
                    * self.pass_all(None, lambda_h, lambda_v)
                    * jacobian;
                b.weight * density * norm_unfiltered / norm
            })
            .sum()
    }
}

/// Two-branch spectrum: a degenerate main branch at 1309.8 nm and a
/// secondary branch at `branch2_centers` (H, V), both with `primary_fwhm`.
pub fn build_spectrum<T: Real>(
    primary_fwhm: T,
    sideband_fraction: T,
    branch2_centers: (T, T),
) -> Result<EmissionSpectrum<T>> {
    if !(primary_fwhm > T::zero()) {
        return Err(Error::OutOfRange {
            what: "branch FWHM (nm)",
            value: primary_fwhm.as_f64(),
            range: "(0, inf)",
        });
    }
    if !(sideband_fraction >= T::zero() && sideband_fraction <= T::one()) {
        return Err(Error::OutOfRange {
            what: "sideband fraction",
            value: sideband_fraction.as_f64(),
            range: "[0, 1]",
        });
    }
    let centre = T::lit(DEGENERATE_CENTER_NM);
    let pump = centre * T::lit(0.5);
    let mut branches = vec![SpectralBranch {
        center_h: centre,
        center_v: centre,
        fwhm: primary_fwhm,
        weight: T::one() - sideband_fraction,
    }];
    if sideband_fraction > T::zero() {
        branches.push(SpectralBranch {
            center_h: branch2_centers.0,
            center_v: branch2_centers.1,
            fwhm: primary_fwhm,
            weight: sideband_fraction,
        });
    }
    EmissionSpectrum::new(branches, pump, LineShape::Gaussian)
}

/// Default two-branch spectrum of the source.
pub fn default_spectrum<T: Real>() -> EmissionSpectrum<T> {
    build_spectrum(
        T::lit(NATURAL_FWHM_NM),
        T::lit(SIDEBAND_FRACTION),
        (T::lit(SIDEBAND_CENTERS_NM.0), T::lit(SIDEBAND_CENTERS_NM.1)),
    )
    .expect("default spectrum is valid")
}

/// Result of [`apply_filter`].
#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome<T> {
    pub spectrum: EmissionSpectrum<T>,
    /// Fraction of pairs (relative to the input spectrum) surviving the filter.
    pub transmitted_fraction: T,
    pub sideband_before: T,
    pub sideband_after: T,
}

/// Maximum distance between a filter center and the spectrum, nm.
pub const FILTER_REACH_NM: f64 = 10.0;

/// Passes every pair through `filter` (both photons must be transmitted),
/// reweights the branches and reports the surviving fraction.
pub fn apply_filter<T: Real>(
    spectrum: &EmissionSpectrum<T>,
    filter: &FilterSpec<T>,
) -> Result<FilterOutcome<T>> {
    if !(filter.fwhm > T::zero()) {
        return Err(Error::OutOfRange {
            what: "filter FWHM (nm)",
            value: filter.fwhm.as_f64(),
            range: "(0, inf]",
        });
    }
    let reach = T::lit(FILTER_REACH_NM);
    let near = spectrum.branches.iter().any(|b| {
        (b.center_h - filter.center).abs() <= reach || (b.center_v - filter.center).abs() <= reach
    });
    if !near {
        return Err(Error::InvalidInput(format!(
            "filter center {} nm is more than {FILTER_REACH_NM} nm from every branch",
            filter.center.as_f64()
        )));
    }

    let transmissions: Vec<T> = spectrum
        .branches
        .iter()
        .map(|b| {
            let before = spectrum.branch_integral(b, None);
            if before <= T::zero() {
                T::zero()
            } else {
                (spectrum.branch_integral(b, Some(filter)) / before).min(T::one())
            }
        })
        .collect();
    let transmitted: T = spectrum
        .branches
        .iter()
        .zip(&transmissions)
        .map(|(b, t)| b.weight * *t)
        .sum();
    if !(transmitted > T::zero()) {
        return Err(Error::FilterNoOverlap);
    }

    let mut out = spectrum.clone();
    for (b, t) in out.branches.iter_mut().zip(&transmissions) {
        b.weight = b.weight * *t / transmitted;
    }
    out.filters.push(*filter);
    Ok(FilterOutcome {
        sideband_before: spectrum.sideband_fraction(),
        sideband_after: out.sideband_fraction(),
        spectrum: out,
        transmitted_fraction: transmitted,
    })
}
