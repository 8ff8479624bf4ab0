//! Two-photon interference: the HOM-type dip seen by one user when both
//! photons reach the same analyzer, Bell fringes between the two users, and
//! CHSH extraction.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::polarization::{
    apply_local, coincidence_prob, make_psi_state, outcome_prob, sb_matrix, JonesMatrix, Port,
    TwoPhotonDensityMatrix,
};
use crate::scalar::Real;

/// Temporal envelope of a single photon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wavepacket<T> {
    /// Intensity FWHM of the wavepacket, ps.
    pub coherence_time_fwhm: T,
}

impl<T: Real> Wavepacket<T> {
    pub fn gaussian(coherence_time_fwhm: T) -> Result<Self> {
        if !(coherence_time_fwhm > T::zero() && coherence_time_fwhm.is_finite()) {
            return Err(Error::OutOfRange {
                what: "coherence time (ps)",
                value: coherence_time_fwhm.as_f64(),
                range: "(0, inf)",
            });
        }
        Ok(Self { coherence_time_fwhm })
    }
}

/// Intensity overlap of two identical Gaussian wavepackets offset by `delay_ps`:
/// `exp(-2 ln2 delay^2 / tau_coh^2)`. Its FWHM is `sqrt(2) tau_coh`.
pub fn mode_overlap<T: Real>(wp: &Wavepacket<T>, delay_ps: T) -> T {
    let x = delay_ps / wp.coherence_time_fwhm;
    (-T::lit(2.0) * T::LN_2() * x * x).exp()
}

fn check_unit<T: Real>(what: &'static str, x: T) -> Result<()> {
    if x >= T::zero() && x <= T::one() {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            what,
            value: x.as_f64(),
            range: "[0, 1]",
        })
    }
}

/// Probability that the photons of `|H, V>` leave a PBS by different ports
/// after a half-wave plate giving the effective polarizer angle `alpha_deg`.
///
/// `m` is the temporal intensity overlap and `v0` the spectral
/// indistinguishability ceiling:
/// `(1 - v0 m)(cos^4 a + sin^4 a) + v0 m cos^2 2a`.
pub fn hom_coincidence<T: Real>(alpha_deg: T, m: T, v0: T) -> Result<T> {
    check_unit("mode overlap", m)?;
    check_unit("indistinguishability", v0)?;
    let a = alpha_deg.to_radians();
    let (s, c) = a.sin_cos();
    let distinguishable = c.powi(4) + s.powi(4);
    let interfering = (a * T::lit(2.0)).cos().powi(2);
    let k = v0 * m;
    Ok((T::one() - k) * distinguishable + k * interfering)
}

/// HOM-type delay scan at one user, analyzer in the D/A basis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomScan<T> {
    pub delays: Vec<T>,
    pub coincidence_probability: Vec<T>,
    pub dip_center: T,
    pub visibility_true: T,
}

/// Analyzer angle of the HOM measurement (HWP at 22.5 degrees).
pub const HOM_ANALYZER_DEG: f64 = 45.0;

/// `P(tau) = 1/2 (1 - v0 m(tau - dip_center))` over `delays_ps`.
pub fn hom_scan<T: Real>(wp: &Wavepacket<T>, delays_ps: &[T], v0: T, dip_center: T) -> Result<HomScan<T>> {
    if delays_ps.is_empty() {
        return Err(Error::InsufficientData { need: 1, got: 0 });
    }
    let probs = delays_ps
        .iter()
        .map(|&d| hom_coincidence(T::lit(HOM_ANALYZER_DEG), mode_overlap(wp, d - dip_center), v0))
        .collect::<Result<Vec<_>>>()?;
    Ok(HomScan {
        delays: delays_ps.to_vec(),
        coincidence_probability: probs,
        dip_center,
        visibility_true: v0,
    })
}

/// FWHM of the HOM dip found by bisection on the half-depth crossing of
/// `m(tau) = 1/2`, independent of the closed form.
pub fn hom_dip_fwhm<T: Real>(wp: &Wavepacket<T>) -> T {
    let (mut lo, mut hi) = (T::zero(), wp.coherence_time_fwhm * T::lit(10.0));
    for _ in 0..200 {
        let mid = (lo + hi) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if mode_overlap(wp, mid) > T::lit(0.5) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo + hi
}

/// Basis selected by Alice's analyzer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BasisTag {
    #[serde(rename = "HV")]
    Hv,
    #[serde(rename = "DA")]
    Da,
}

impl BasisTag {
    /// `{H,V}` for HWP angles that are multiples of 45 degrees, `{D,A}` otherwise.
    pub fn from_hwp<T: Real>(hwp_deg: T) -> Self {
        let r = (hwp_deg / T::lit(45.0)).fract().abs();
        if r < T::lit(1e-9) || r > T::lit(1.0 - 1e-9) {
            BasisTag::Hv
        } else {
            BasisTag::Da
        }
    }
}

/// Coincidence fringe as Bob's HWP rotates, Alice's HWP fixed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BellScan<T> {
    pub alice_hwp: T,
    pub bob_hwp_values: Vec<T>,
    pub coincidence_probability: Vec<T>,
    pub basis_tag: BasisTag,
}

impl<T: Real> BellScan<T> {
    /// `(max - min)/(max + min)` over the sampled points.
    pub fn sampled_visibility(&self) -> T {
        let max = self.coincidence_probability.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
        let min = self.coincidence_probability.iter().fold(T::infinity(), |a, &b| a.min(b));
        (max - min) / (max + min)
    }
}

pub fn bell_scan<T: Real>(
    state_coherence: T,
    phi: T,
    alice_hwp: T,
    bob_hwp_values: &[T],
) -> Result<BellScan<T>> {
    let rho = make_psi_state(state_coherence, phi)?;
    let two = T::lit(2.0);
    let probs = bob_hwp_values
        .iter()
        .map(|&b| coincidence_prob(&rho, two * alice_hwp, two * b))
        .collect();
    Ok(BellScan {
        alice_hwp,
        bob_hwp_values: bob_hwp_values.to_vec(),
        coincidence_probability: probs,
        basis_tag: BasisTag::from_hwp(alice_hwp),
    })
}

/// Visibility of the D/A-basis fringe for the state with channel phase
/// `phi_channels` after Alice's Soleil-Babinet phase `phi_sb`, computed from
/// the density matrix at Bob's extremal polarizer angles.
pub fn da_fringe_visibility<T: Real>(coherence: T, phi_channels: T, phi_sb: T) -> Result<T> {
    let rho = make_psi_state(coherence, phi_channels)?;
    let rho = apply_local(&rho, &sb_matrix(phi_sb), &JonesMatrix::identity())?;
    let a = T::lit(45.0);
    let p_plus = coincidence_prob(&rho, a, T::lit(45.0));
    let p_minus = coincidence_prob(&rho, a, T::lit(135.0));
    let total = p_plus + p_minus;
    if total <= T::zero() {
        return Ok(T::zero());
    }
    Ok((p_plus - p_minus).abs() / total)
}

const SB_SCAN_POINTS: usize = 720;

/// Soleil-Babinet phase in `[0, pi)` cancelling the channel phases, i.e. making
/// `phi_a + phi_b + phi_sb` a multiple of pi. Found like on the bench: a
/// coarse scan of the D/A fringe visibility followed by golden-section
/// refinement.
pub fn sb_balance<T: Real>(phi_a: T, phi_b: T) -> T {
    let total = phi_a + phi_b;
    let vis = |sb: T| da_fringe_visibility(T::one(), total, sb).unwrap_or(T::zero());
    let period = T::PI();
    let step = period / T::lit(SB_SCAN_POINTS as f64);
    let best = (0..SB_SCAN_POINTS)
        .map(|k| step * T::lit(k as f64))
        .fold((T::zero(), T::neg_infinity()), |(bx, bv), x| {
            let v = vis(x);
            if v > bv {
                (x, v)
            } else {
                (bx, bv)
            }
        })
        .0;

    // golden-section maximisation on [best - step, best + step]
    let g = (T::lit(5.0).sqrt() - T::one()) * T::lit(0.5);
    let (mut a, mut b) = (best - step, best + step);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (vis(c), vis(d));
    for _ in 0..200 {
        if (b - a).abs() < T::epsilon() * T::lit(8.0) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = vis(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = vis(d);
        }
    }
    let x = (a + b) * T::lit(0.5);
    let r = x % period;
    if r < T::zero() {
        r + period
    } else {
        r
    }
}

/// Compensator position between two users' dip centers and the residual
/// delay each user is left with.
pub fn intermediate_position<T: Real>(center_a_ps: T, center_b_ps: T) -> (T, T) {
    let mid = (center_a_ps + center_b_ps) * T::lit(0.5);
    (mid, (center_a_ps - center_b_ps).abs() * T::lit(0.5))
}

/// Coherence of the distributed state: spectral ceiling times the temporal
/// intensity overlap left at the residual compensator delay.
pub fn bell_coherence<T: Real>(v0: T, wp: &Wavepacket<T>, residual_delay_ps: T) -> Result<T> {
    check_unit("indistinguishability", v0)?;
    Ok(v0 * mode_overlap(wp, residual_delay_ps))
}

/// A correlation coefficient with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Correlation<T> {
    pub value: T,
    pub std_error: T,
}

/// `E = (R_ab + R_a'b' - R_ab' - R_a'b) / sum` from the four coincidence
/// rates ordered `(a,b), (a,b'), (a',b), (a',b')` (primes meaning the
/// orthogonal PBS outputs).
pub fn correlation_e<T: Real>(rates: [T; 4]) -> Result<T> {
    if rates.iter().any(|r| !(*r >= T::zero())) {
        return Err(Error::InvalidInput("coincidence rates must be non-negative".into()));
    }
    let sum: T = rates.iter().copied().sum();
    if sum <= T::zero() {
        return Err(Error::ZeroRates);
    }
    Ok((rates[0] + rates[3] - rates[1] - rates[2]) / sum)
}

/// Correlation from raw Poisson counts, with `var(E) = (1 - E^2)/N`.
pub fn correlation_from_counts<T: Real>(counts: [T; 4]) -> Result<Correlation<T>> {
    let e = correlation_e(counts)?;
    let n: T = counts.iter().copied().sum();
    Ok(Correlation {
        value: e,
        std_error: ((T::one() - e * e).max(T::zero()) / n).sqrt(),
    })
}

/// Optimal polarizer angles `(a, a', b, b')` for `|Psi+>`-type correlations.
pub const CHSH_SETTINGS_DEG: [f64; 4] = [0.0, 45.0, 22.5, 67.5];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChshResult<T> {
    #[serde(rename = "S")]
    pub s: T,
    pub std_error: T,
    pub n_sigma_violation: T,
}

/// `S = |E(a,b) - E(a,b')| + |E(a',b) + E(a',b')|` from correlations given in
/// the order `(a,b), (a,b'), (a',b), (a',b')`. Errors add in quadrature.
pub fn chsh_s<T: Real>(correlations: &[Correlation<T>]) -> Result<ChshResult<T>> {
    if correlations.len() != 4 {
        return Err(Error::SettingCount {
            expected: 4,
            got: correlations.len(),
        });
    }
    let e: Vec<T> = correlations.iter().map(|c| c.value).collect();
    let s = (e[0] - e[1]).abs() + (e[2] + e[3]).abs();
    let var: T = correlations.iter().map(|c| c.std_error * c.std_error).sum();
    let std_error = var.sqrt();
    Ok(ChshResult {
        s,
        std_error,
        n_sigma_violation: n_sigma(s, std_error),
    })
}

pub(crate) fn n_sigma<T: Real>(s: T, std_error: T) -> T {
    if std_error > T::zero() {
        (s - T::lit(2.0)) / std_error
    } else if s > T::lit(2.0) {
        T::infinity()
    } else {
        T::zero()
    }
}

/// Exact correlation `E(alpha, beta)` of a two-photon state.
pub fn state_correlation<T: Real>(rho: &TwoPhotonDensityMatrix<T>, alpha_deg: T, beta_deg: T) -> T {
    use Port::{Reflected as R, Transmitted as X};
    let p = |pa, pb| outcome_prob(rho, alpha_deg, beta_deg, pa, pb);
    p(X, X) + p(R, R) - p(X, R) - p(R, X)
}

/// CHSH value of a state at the given `(a, a', b, b')` polarizer angles.
pub fn chsh_of_state<T: Real>(rho: &TwoPhotonDensityMatrix<T>, settings_deg: [T; 4]) -> T {
    let [a, a2, b, b2] = settings_deg;
    let e = |x, y| state_correlation(rho, x, y);
    (e(a, b) - e(a, b2)).abs() + (e(a2, b) + e(a2, b2)).abs()
}
