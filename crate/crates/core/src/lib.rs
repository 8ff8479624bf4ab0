//! Simulation of a waveguide-based, polarization-entangled photon-pair source
//! at 1310 nm and of its two-photon characterization.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix it to `f64`.

pub mod counting;
pub mod error;
pub mod fitting;
pub mod interference;
pub mod linalg;
pub mod polarization;
pub mod scalar;
pub mod spdc;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Jones = polarization::JonesMatrix<f64>;
pub type DensityMatrix = polarization::TwoPhotonDensityMatrix<f64>;
pub type DensityMatrix32 = polarization::TwoPhotonDensityMatrix<f32>;
pub type Dispersion = spdc::DispersionModel<f64>;
pub type Qpm = spdc::QpmConfig<f64>;
pub type Spectrum = spdc::EmissionSpectrum<f64>;
pub type Budget = counting::SourceBudget<f64>;
pub type Detector = counting::DetectorParams<f64>;
pub type Scan = fitting::ScanData<f64>;
pub type Fit = fitting::FitResult<f64>;
