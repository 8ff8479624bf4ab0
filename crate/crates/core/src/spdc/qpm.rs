//! Quasi-phase-matching: phase mismatch, poling-period search, offset
//! calibration and temperature tuning.

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::dispersion::{refractive_index, DispersionModel, Polarization};

/// Poling-period search interval for [`find_degenerate_period`], um.
pub const PERIOD_BRACKET_UM: (f64, f64) = (4.0, 20.0);
/// Residual accepted for a phase-matching root, rad/um.
pub const ROOT_TOLERANCE: f64 = 1e-9;

/// Operating point of the poled waveguide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpmConfig<T> {
    /// Poling period, um. `T::infinity()` disables the grating term.
    pub poling_period_um: T,
    pub temperature_c: T,
    pub pump_nm: T,
    /// Interaction length, mm. Not needed for the phase-matching condition.
    pub length_mm: Option<T>,
    pub pump_pol: Polarization,
    pub signal_pol: Polarization,
    pub idler_pol: Polarization,
}

impl<T: Real> QpmConfig<T> {
    /// Type-II assignment: H pump down-converted into an H signal and a V idler.
    pub fn type_ii(poling_period_um: T, temperature_c: T, pump_nm: T) -> Result<Self> {
        let cfg = Self {
            poling_period_um,
            temperature_c,
            pump_nm,
            length_mm: None,
            pump_pol: Polarization::H,
            signal_pol: Polarization::H,
            idler_pol: Polarization::V,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.poling_period_um > T::zero()) {
            return Err(Error::OutOfRange {
                what: "poling period (um)",
                value: self.poling_period_um.as_f64(),
                range: "(0, inf]",
            });
        }
        if let Some(l) = self.length_mm {
            if !(l > T::zero()) {
                return Err(Error::OutOfRange {
                    what: "interaction length (mm)",
                    value: l.as_f64(),
                    range: "(0, inf)",
                });
            }
        }
        if !(self.pump_nm > T::zero()) {
            return Err(Error::OutOfRange {
                what: "pump wavelength (nm)",
                value: self.pump_nm.as_f64(),
                range: "(0, inf)",
            });
        }
        Ok(())
    }
}

/// Idler wavelength from `1/l_i = 1/l_p - 1/l_s`.
pub fn idler_wavelength<T: Real>(pump_nm: T, signal_nm: T) -> Result<T> {
    if !(signal_nm > pump_nm) {
        return Err(Error::InvalidInput(format!(
            "energy conservation: signal {} nm must be longer than pump {} nm",
            signal_nm.as_f64(),
            pump_nm.as_f64()
        )));
    }
    Ok(T::one() / (T::one() / pump_nm - T::one() / signal_nm))
}

/// Phase mismatch `2 pi [n_p/l_p - n_s/l_s - n_i/l_i - 1/period]` in rad/um.
pub fn delta_k<T: Real>(cfg: &QpmConfig<T>, model: &DispersionModel<T>, signal_nm: T) -> Result<T> {
    let idler_nm = idler_wavelength(cfg.pump_nm, signal_nm)?;
    let t = cfg.temperature_c;
    let um = T::lit(1000.0);
    let n_p = refractive_index(model, cfg.pump_nm, t, cfg.pump_pol)?;
    let n_s = refractive_index(model, signal_nm, t, cfg.signal_pol)?;
    let n_i = refractive_index(model, idler_nm, t, cfg.idler_pol)?;
    let material = n_p / (cfg.pump_nm / um) - n_s / (signal_nm / um) - n_i / (idler_nm / um);
    Ok(T::TAU() * (material - cfg.poling_period_um.recip()))
}

/// A poling period solving the degenerate phase-matching condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodSolution<T> {
    pub period_um: T,
    /// `|delta_k|` at `period_um`, rad/um.
    pub residual: T,
    /// Whether the dispersion model had been calibrated.
    pub calibrated: bool,
}

/// Poling period giving `delta_k = 0` for degenerate type-II emission at
/// `2 * pump_nm`, found by bisection on the period.
pub fn find_degenerate_period<T: Real>(
    model: &DispersionModel<T>,
    pump_nm: T,
    temperature_c: T,
) -> Result<PeriodSolution<T>> {
    let signal = pump_nm * T::lit(2.0);
    let mismatch = |period: T| -> Result<T> {
        let cfg = QpmConfig::type_ii(period, temperature_c, pump_nm)?;
        delta_k(&cfg, model, signal)
    };
    let (mut lo, mut hi) = (T::lit(PERIOD_BRACKET_UM.0), T::lit(PERIOD_BRACKET_UM.1));
    let (f_lo, f_hi) = (mismatch(lo)?, mismatch(hi)?);
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NoPhaseMatching(format!(
            "no sign change of delta_k for periods in [{}, {}] um (pump {} nm, {} C)",
            PERIOD_BRACKET_UM.0,
            PERIOD_BRACKET_UM.1,
            pump_nm.as_f64(),
            temperature_c.as_f64()
        )));
    }
    let tol = T::tolerance(ROOT_TOLERANCE);
    let mut f_low = f_lo;
    for _ in 0..200 {
        let mid = (lo + hi) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = mismatch(mid)?;
        if f_mid == T::zero() {
            lo = mid;
            hi = mid;
            break;
        }
        if f_mid.signum() == f_low.signum() {
            lo = mid;
            f_low = f_mid;
        } else {
            hi = mid;
        }
    }
    // Both ends bracket the root to machine precision; keep the better one.
    let (r_lo, r_hi) = (mismatch(lo)?.abs(), mismatch(hi)?.abs());
    let (period, residual) = if r_lo <= r_hi { (lo, r_lo) } else { (hi, r_hi) };
    if residual > tol {
        return Err(Error::NoPhaseMatching(format!(
            "bisection stalled with residual {:e} rad/um",
            residual.as_f64()
        )));
    }
    Ok(PeriodSolution {
        period_um: period,
        residual,
        calibrated: model.calibrated,
    })
}

/// Known phase-matching point used to fit the index offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationAnchor<T> {
    pub period_um: T,
    pub temperature_c: T,
    pub pump_nm: T,
    pub signal_nm: T,
    /// Polarization whose offset is adjusted.
    pub polarization: Polarization,
}

impl<T: Real> CalibrationAnchor<T> {
    /// Degenerate 655 nm -> 1310 nm emission with a 6.6 um period at 96.8 C,
    /// absorbed on the extraordinary (V) index.
    pub fn reference() -> Self {
        Self {
            period_um: T::lit(6.6),
            temperature_c: T::lit(96.8),
            pump_nm: T::lit(655.0),
            signal_nm: T::lit(1310.0),
            polarization: Polarization::V,
        }
    }
}

/// Adjusts the offset of `anchor.polarization` so that the anchor is an
/// exact phase-matching root. `delta_k` is affine in the offset, so a Newton
/// iteration converges in one step; a couple more absorb rounding.
pub fn calibrate_offsets<T: Real>(
    model: &DispersionModel<T>,
    anchor: &CalibrationAnchor<T>,
) -> Result<DispersionModel<T>> {
    let cfg = QpmConfig::type_ii(anchor.period_um, anchor.temperature_c, anchor.pump_nm)?;
    let idler = idler_wavelength(anchor.pump_nm, anchor.signal_nm)?;
    let um = T::lit(1000.0);
    let pol = anchor.polarization;
    let weight = |p: Polarization| if p == pol { T::one() } else { T::zero() };
    let slope = T::TAU()
        * (weight(cfg.pump_pol) / (cfg.pump_nm / um)
            - weight(cfg.signal_pol) / (anchor.signal_nm / um)
            - weight(cfg.idler_pol) / (idler / um));
    if slope == T::zero() {
        return Err(Error::InvalidInput(
            "calibration polarization does not enter the phase-matching condition".into(),
        ));
    }

    let tol = T::tolerance(ROOT_TOLERANCE) * T::lit(1e-2);
    let mut out = model.clone();
    let mut residual = delta_k(&cfg, &out, anchor.signal_nm)?;
    for _ in 0..8 {
        if residual.abs() <= tol {
            break;
        }
        let offset = out.offset(pol) - residual / slope;
        out.index_model_mut(pol).offset = offset;
        residual = delta_k(&cfg, &out, anchor.signal_nm)?;
    }
    if residual.abs() > T::tolerance(ROOT_TOLERANCE) {
        return Err(Error::CalibrationFailed {
            residual: residual.as_f64(),
        });
    }
    out.calibrated = true;
    Ok(out)
}

/// One phase-matched signal/idler pair at a given temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuningPoint<T> {
    pub temperature_c: T,
    pub signal_nm: T,
    pub idler_nm: T,
    /// `d(delta_k)/d(signal)` at the root, rad/um per nm.
    pub slope: T,
    pub degenerate: bool,
}

/// Half-width of the signal search window around degeneracy, nm.
pub const TUNING_SEARCH_NM: f64 = 200.0;
const TUNING_STEP_NM: f64 = 0.25;
/// Signal/idler separation below which a point counts as degenerate, nm.
pub const DEGENERACY_TOLERANCE_NM: f64 = 0.01;

/// Phase-matched wavelength pairs of `cfg` (its temperature is overridden)
/// for every temperature in `temperatures_c`. Temperatures without a
/// solution contribute nothing.
pub fn tuning_curve<T: Real>(
    cfg: &QpmConfig<T>,
    model: &DispersionModel<T>,
    temperatures_c: &[T],
) -> Result<Vec<TuningPoint<T>>> {
    cfg.validate()?;
    let centre = cfg.pump_nm * T::lit(2.0);
    let span = T::lit(TUNING_SEARCH_NM);
    let step = T::lit(TUNING_STEP_NM);
    let lo_limit = (centre - span).max(cfg.pump_nm + step);
    let steps = ((centre + span - lo_limit) / step).to_usize().unwrap_or(0);

    let mut out = Vec::new();
    for &temperature in temperatures_c {
        let at_t = QpmConfig { temperature_c: temperature, ..*cfg };
        let f = |s: T| delta_k(&at_t, model, s);
        let mut prev: Option<(T, T)> = None;
        for k in 0..=steps {
            let s = lo_limit + step * T::lit(k as f64);
            let Ok(val) = f(s) else {
                prev = None;
                continue;
            };
            if let Some((s_prev, v_prev)) = prev {
                if val == T::zero() || val.signum() != v_prev.signum() {
                    let root = if val == T::zero() {
                        s
                    } else {
                        bisect(&f, s_prev, s, v_prev)?
                    };
                    out.push(tuning_point(&f, temperature, at_t.pump_nm, root)?);
                }
            }
            prev = Some((s, val));
        }
    }
    Ok(out)
}

fn bisect<T: Real>(f: &impl Fn(T) -> Result<T>, mut lo: T, mut hi: T, mut f_lo: T) -> Result<T> {
    for _ in 0..200 {
        let mid = (lo + hi) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid)?;
        if f_mid == T::zero() {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) * T::lit(0.5))
}

fn tuning_point<T: Real>(
    f: &impl Fn(T) -> Result<T>,
    temperature: T,
    pump_nm: T,
    signal: T,
) -> Result<TuningPoint<T>> {
    let idler = idler_wavelength(pump_nm, signal)?;
    let h = T::lit(1e-3);
    let slope = (f(signal + h)? - f(signal - h)?) / (h * T::lit(2.0));
    Ok(TuningPoint {
        temperature_c: temperature,
        signal_nm: signal,
        idler_nm: idler,
        slope,
        degenerate: (signal - idler).abs() < T::lit(DEGENERACY_TOLERANCE_NM),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bulk() -> DispersionModel<f64> {
        DispersionModel::congruent_linbo3()
    }

    fn calibrated() -> DispersionModel<f64> {
        calibrate_offsets(&bulk(), &CalibrationAnchor::reference()).unwrap()
    }

    #[test]
    fn infinite_period_is_bulk_mismatch() {
        let m = bulk();
        let cfg = QpmConfig::type_ii(f64::INFINITY, 96.8, 655.0).unwrap();
        let dk = delta_k(&cfg, &m, 1310.0).unwrap();
        let n = |l: f64, p| refractive_index(&m, l, 96.8, p).unwrap();
        let expect = std::f64::consts::TAU
            * (n(655.0, Polarization::H) / 0.655
                - n(1310.0, Polarization::H) / 1.31
                - n(1310.0, Polarization::V) / 1.31);
        assert!((dk - expect).abs() < 1e-12);
    }

    #[test]
    fn energy_conservation_violation_rejected() {
        let cfg = QpmConfig::type_ii(6.6, 96.8, 655.0).unwrap();
        assert!(delta_k(&cfg, &bulk(), 600.0).is_err());
        assert!(delta_k(&cfg, &bulk(), 655.0).is_err());
        assert!(QpmConfig::type_ii(-1.0, 96.8, 655.0).is_err());
    }

    #[test]
    fn degenerate_period_is_a_root() {
        for m in [bulk(), calibrated()] {
            let sol = find_degenerate_period(&m, 655.0, 96.8).unwrap();
            let cfg = QpmConfig::type_ii(sol.period_um, 96.8, 655.0).unwrap();
            assert!(delta_k(&cfg, &m, 1310.0).unwrap().abs() < 1e-9);
            assert!(sol.residual < 1e-9);
        }
    }

    #[test]
    fn bulk_period_near_design_value() {
        let sol = find_degenerate_period(&bulk(), 655.0, 96.8).unwrap();
        assert!(!sol.calibrated);
        assert!((sol.period_um - 6.6).abs() < 0.3, "{}", sol.period_um);
    }

    #[test]
    fn calibration_hits_anchor_and_is_idempotent() {
        let m = calibrated();
        assert!(m.calibrated);
        let sol = find_degenerate_period(&m, 655.0, 96.8).unwrap();
        assert!(sol.calibrated);
        assert!((sol.period_um - 6.6).abs() < 1e-3);
        let again = calibrate_offsets(&m, &CalibrationAnchor::reference()).unwrap();
        assert!((again.v.offset - m.v.offset).abs() < 1e-12);
        assert_eq!(again.h.offset, 0.0);
    }

    #[test]
    fn consistent_model_needs_no_offset() {
        let m = bulk();
        let period = find_degenerate_period(&m, 655.0, 96.8).unwrap().period_um;
        let anchor = CalibrationAnchor {
            period_um: period,
            ..CalibrationAnchor::reference()
        };
        let cal = calibrate_offsets(&m, &anchor).unwrap();
        assert!(cal.v.offset.abs() < 1e-12);
    }

    #[test]
    fn either_polarization_reproduces_anchor() {
        let anchor = CalibrationAnchor {
            polarization: Polarization::H,
            ..CalibrationAnchor::reference()
        };
        let m = calibrate_offsets(&bulk(), &anchor).unwrap();
        let sol = find_degenerate_period(&m, 655.0, 96.8).unwrap();
        assert!((sol.period_um - 6.6).abs() < 1e-3);
    }

    #[test]
    fn offset_perturbation_shifts_period_monotonically() {
        let base = calibrated();
        let mut last = find_degenerate_period(&base, 655.0, 96.8).unwrap().period_um;
        for k in 1..=4 {
            let m = base.with_offset(Polarization::V, base.v.offset + 1e-4 * k as f64);
            let p = find_degenerate_period(&m, 655.0, 96.8).unwrap().period_um;
            // a larger idler index lowers the material mismatch: longer period
            assert!(p > last);
            last = p;
        }
    }

    #[test]
    fn telecom_c_band_period() {
        let sol = find_degenerate_period(&calibrated(), 780.0, 96.8).unwrap();
        assert!((sol.period_um - 9.1).abs() < 0.4, "{}", sol.period_um);
    }

    #[test]
    fn no_solution_outside_bracket() {
        // A huge extraordinary offset pushes the root far outside [4, 20] um.
        let m = bulk().with_offset(Polarization::V, -0.5);
        let err = find_degenerate_period(&m, 655.0, 96.8).unwrap_err();
        assert!(matches!(err, Error::NoPhaseMatching(_)));
    }

    #[test]
    fn tuning_curve_degenerate_at_operating_point() {
        let m = calibrated();
        let cfg = QpmConfig::type_ii(6.6, 96.8, 655.0).unwrap();
        let pts = tuning_curve(&cfg, &m, &[96.8]).unwrap();
        assert_eq!(pts.len(), 1);
        let p = pts[0];
        assert!((p.signal_nm - 1310.0).abs() < 1e-6 && (p.idler_nm - 1310.0).abs() < 1e-6);
        assert!(p.degenerate);

        // Sign of the slope agrees with a finite difference taken by hand.
        let h = 0.05;
        let fd = (delta_k(&cfg, &m, 1310.0 + h).unwrap() - delta_k(&cfg, &m, 1310.0 - h).unwrap()) / (2.0 * h);
        assert_eq!(fd.signum(), p.slope.signum());
        assert!((fd - p.slope).abs() < 1e-6 * fd.abs().max(1e-12) + 1e-9);
    }

    #[test]
    fn tuning_curve_energy_conservation_and_continuity() {
        let m = calibrated();
        let cfg = QpmConfig::type_ii(6.6, 96.8, 655.0).unwrap();
        let temps: Vec<f64> = (0..=40).map(|k| 94.8 + 0.1 * k as f64).collect();
        let pts = tuning_curve(&cfg, &m, &temps).unwrap();
        assert_eq!(pts.len(), temps.len());
        for p in &pts {
            let gap = 1.0 / p.signal_nm + 1.0 / p.idler_nm - 1.0 / 655.0;
            assert!(gap.abs() < 1e-6);
        }
        for w in pts.windows(2) {
            assert!(w[1].temperature_c > w[0].temperature_c);
            assert!((w[1].signal_nm - w[0].signal_nm).abs() < 5.0);
        }
    }

    #[test]
    fn tuning_curve_empty_when_unmatched() {
        let m = calibrated();
        let cfg = QpmConfig::type_ii(15.0, 96.8, 655.0).unwrap();
        assert!(tuning_curve(&cfg, &m, &[96.8]).unwrap().is_empty());
    }
}
