use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{what} = {value} is outside the valid range {range}")]
    OutOfRange {
        what: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("Jones matrix is not unitary (max |M^dagger M - I| = {defect:e})")]
    NonUnitary { defect: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("no phase-matching solution: {0}")]
    NoPhaseMatching(String),

    #[error("calibration did not converge (residual {residual:e} rad/um)")]
    CalibrationFailed { residual: f64 },

    #[error("filter does not overlap spectrum")]
    FilterNoOverlap,

    #[error("no signal above accidentals (r_max = {r_max}, r_acc = {r_acc})")]
    NoSignal { r_max: f64, r_acc: f64 },

    #[error("all coincidence rates are zero")]
    ZeroRates,

    #[error("expected {expected} settings, got {got}")]
    SettingCount { expected: usize, got: usize },

    #[error("fit did not converge after {iterations} iterations (chi2 = {chi2:e})")]
    FitNonConvergence { iterations: usize, chi2: f64 },

    #[error("no dip detected: {0}")]
    NoDipDetected(String),

    #[error("need at least {need} data points, got {got}")]
    InsufficientData { need: usize, got: usize },

    #[error("dispersion file: {0}")]
    DispersionFile(String),

    #[error("scan data: {0}")]
    ScanFormat(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
