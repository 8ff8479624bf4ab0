//! Classical design layer of the source: dispersion, quasi-phase-matching,
//! emission spectrum and filtering, coherence time.

pub mod dispersion;
pub mod qpm;
pub mod spectrum;

pub use dispersion::{refractive_index, DispersionModel, IndexModel, Polarization};
pub use qpm::{
    calibrate_offsets, delta_k, find_degenerate_period, idler_wavelength, tuning_curve,
    CalibrationAnchor, PeriodSolution, QpmConfig, TuningPoint,
};
pub use spectrum::{
    apply_filter, build_spectrum, default_spectrum, EmissionSpectrum, FilterOutcome, FilterSpec,
    LineShape, SpectralBranch,
};

use crate::scalar::{Real, SPEED_OF_LIGHT};

/// Time-bandwidth product of a Gaussian spectrum.
pub const GAUSSIAN_TIME_BANDWIDTH: f64 = 0.44;

/// Coherence time `0.44 lambda^2 / (c delta_lambda)` in ps, wavelengths in nm.
pub fn coherence_time<T: Real>(lambda_nm: T, delta_lambda_fwhm_nm: T) -> T {
    // nm^2/nm -> m (1e-9), s -> ps (1e12)
    T::lit(GAUSSIAN_TIME_BANDWIDTH) * lambda_nm * lambda_nm / delta_lambda_fwhm_nm * T::lit(1e3)
        / T::lit(SPEED_OF_LIGHT)
}

/// Optical bandwidth in GHz of a `delta_lambda_nm` wide band centred at `lambda_nm`.
pub fn bandwidth_ghz<T: Real>(lambda_nm: T, delta_lambda_nm: T) -> T {
    // c [m/s] * dl [1e-9 m] / l^2 [1e-18 m^2] = Hz * 1e9 -> GHz
    T::lit(SPEED_OF_LIGHT) * delta_lambda_nm / (lambda_nm * lambda_nm)
}
