//! Detection chain: pair budget, singles/coincidence/accidental rates, and a
//! window-level Monte Carlo that serves as oracle for the analytic rates.
//!
//! Time is binned into non-overlapping coincidence windows. Within a window a
//! pair is split by the beam splitter with probability `s`; unsplit pairs send
//! both photons to the same arm. Arm `a` is the free-running trigger, arm `b`
//! the gated detector. A split pair's `b` photon reaches the monitored port
//! with the interference probability `q`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Name recorded in Monte Carlo output.
pub const RNG_ALGORITHM: &str = "ChaCha8, one stream per 65536-window block";
const BLOCK: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorMode {
    FreeRunning,
    Gated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams<T> {
    pub efficiency: T,
    pub dark_prob_per_ns: T,
    pub mode: DetectorMode,
    /// Gate width in ns; only used in gated mode.
    pub gate_width_ns: T,
}

impl<T: Real> DetectorParams<T> {
    pub fn new(efficiency: T, dark_prob_per_ns: T, mode: DetectorMode, gate_width_ns: T) -> Result<Self> {
        let d = Self {
            efficiency,
            dark_prob_per_ns,
            mode,
            gate_width_ns,
        };
        d.validate()?;
        Ok(d)
    }

    /// Passively quenched Ge APD used as trigger.
    pub fn germanium_trigger() -> Self {
        Self {
            efficiency: T::lit(0.04),
            dark_prob_per_ns: T::lit(2.2e-5),
            mode: DetectorMode::FreeRunning,
            gate_width_ns: T::lit(1.5),
        }
    }

    /// Gated InGaAs APD.
    pub fn ingaas_gated() -> Self {
        Self {
            efficiency: T::lit(0.10),
            dark_prob_per_ns: T::lit(1e-5),
            mode: DetectorMode::Gated,
            gate_width_ns: T::lit(1.5),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.efficiency >= T::zero() && self.efficiency <= T::one()) {
            return Err(Error::OutOfRange {
                what: "detector efficiency",
                value: self.efficiency.as_f64(),
                range: "[0, 1]",
            });
        }
        if !(self.dark_prob_per_ns >= T::zero() && self.dark_prob_per_ns.is_finite()) {
            return Err(Error::OutOfRange {
                what: "dark count probability (1/ns)",
                value: self.dark_prob_per_ns.as_f64(),
                range: "[0, inf)",
            });
        }
        if !(self.gate_width_ns > T::zero() && self.gate_width_ns.is_finite()) {
            return Err(Error::OutOfRange {
                what: "gate width (ns)",
                value: self.gate_width_ns.as_f64(),
                range: "(0, inf)",
            });
        }
        Ok(())
    }

    /// Dark click probability within one coincidence window.
    pub fn dark_per_window(&self, window_ns: T) -> T {
        let width = match self.mode {
            DetectorMode::FreeRunning => window_ns,
            DetectorMode::Gated => self.gate_width_ns,
        };
        (self.dark_prob_per_ns * width).min(T::one())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceBudget<T> {
    /// Pairs per second per GHz per mW at the waveguide output.
    pub brightness: T,
    pub pump_power_mw: T,
    pub filter_bandwidth_ghz: T,
    pub window_ns: T,
    /// Loss from the waveguide to detector `a`, dB.
    pub loss_a_db: T,
    /// Loss from the waveguide to detector `b`, dB.
    pub loss_b_db: T,
    pub bs_separation_prob: T,
    /// Poisson pair statistics instead of at most one pair per window.
    pub double_pairs: bool,
}

impl<T: Real> SourceBudget<T> {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("brightness", self.brightness),
            ("pump power (mW)", self.pump_power_mw),
            ("filter bandwidth (GHz)", self.filter_bandwidth_ghz),
            ("loss a (dB)", self.loss_a_db),
            ("loss b (dB)", self.loss_b_db),
        ];
        for (what, v) in nonneg {
            if !(v >= T::zero() && v.is_finite()) {
                return Err(Error::OutOfRange {
                    what,
                    value: v.as_f64(),
                    range: "[0, inf)",
                });
            }
        }
        if !(self.window_ns > T::zero() && self.window_ns.is_finite()) {
            return Err(Error::OutOfRange {
                what: "coincidence window (ns)",
                value: self.window_ns.as_f64(),
                range: "(0, inf)",
            });
        }
        if !(self.bs_separation_prob >= T::zero() && self.bs_separation_prob <= T::one()) {
            return Err(Error::OutOfRange {
                what: "beam-splitter separation probability",
                value: self.bs_separation_prob.as_f64(),
                range: "[0, 1]",
            });
        }
        let mu = mean_pairs_per_window(self);
        if !self.double_pairs && mu > T::one() {
            return Err(Error::InvalidInput(format!(
                "mean pair number {mu} exceeds 1; enable double pairs"
            )));
        }
        Ok(())
    }

    pub fn transmission_a(&self) -> T {
        db_to_transmission(self.loss_a_db)
    }

    pub fn transmission_b(&self) -> T {
        db_to_transmission(self.loss_b_db)
    }

    fn windows_per_second(&self) -> T {
        T::lit(1e9) / self.window_ns
    }
}

pub fn db_to_transmission<T: Real>(loss_db: T) -> T {
    T::lit(10.0).powf(-loss_db / T::lit(10.0))
}

/// `mu = brightness * power * bandwidth * window`, at the source.
pub fn mean_pairs_per_window<T: Real>(budget: &SourceBudget<T>) -> T {
    budget.brightness * budget.pump_power_mw * budget.filter_bandwidth_ghz * budget.window_ns * T::lit(1e-9)
}

/// Rates in counts/s with their decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CountRates<T> {
    pub singles_a: T,
    pub singles_b: T,
    pub coincidences: T,
    pub accidentals: T,
    pub breakdown: RateBreakdown<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateBreakdown<T> {
    pub mean_pairs_per_window: T,
    pub pair_rate: T,
    pub dark_rate_a: T,
    pub dark_rate_b: T,
    /// Per-photon detection probability in each arm, including routing for `b`.
    pub detection_a: T,
    pub detection_b: T,
    pub true_coincidences: T,
}

/// Per-window click probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
struct WindowProbs<T> {
    a: T,
    b: T,
    both: T,
    true_pair: T,
}

fn window_probs<T: Real>(
    budget: &SourceBudget<T>,
    det_a: &DetectorParams<T>,
    det_b: &DetectorParams<T>,
    q: T,
) -> WindowProbs<T> {
    let one = T::one();
    let half = T::lit(0.5);
    let mu = mean_pairs_per_window(budget);
    let s = budget.bs_separation_prob;
    let pa = budget.transmission_a() * det_a.efficiency;
    let pb = budget.transmission_b() * det_b.efficiency * q;
    let da = det_a.dark_per_window(budget.window_ns);
    let db = det_b.dark_per_window(budget.window_ns);
    let same = (one - s) * half;

    // no-click probabilities given one pair
    let ga = s * (one - pa) + same * (one - pa).powi(2) + same;
    let gb = s * (one - pb) + same * (one - pb).powi(2) + same;
    let gab = s * (one - pa) * (one - pb) + same * (one - pa).powi(2) + same * (one - pb).powi(2);
    let t = s * pa * pb;

    // average over the pair number
    let avg = |g: T| {
        if budget.double_pairs {
            (-mu * (one - g)).exp()
        } else {
            one - mu + mu * g
        }
    };
    let none_a = (one - da) * avg(ga);
    let none_b = (one - db) * avg(gb);
    let none_ab = (one - da) * (one - db) * avg(gab);
    let true_pair = if budget.double_pairs {
        one - (-mu * t).exp()
    } else {
        mu * t
    };
    WindowProbs {
        a: one - none_a,
        b: one - none_b,
        both: (one - none_a - none_b + none_ab).max(T::zero()),
        true_pair,
    }
}

/// Analytic rates. `interference_prob` is the probability that a split pair's
/// `b` photon reaches the monitored analyzer port (1 = full transmission).
pub fn expected_rates<T: Real>(
    budget: &SourceBudget<T>,
    det_a: &DetectorParams<T>,
    det_b: &DetectorParams<T>,
    interference_prob: T,
) -> Result<CountRates<T>> {
    budget.validate()?;
    det_a.validate()?;
    det_b.validate()?;
    if !(interference_prob >= T::zero() && interference_prob <= T::one()) {
        return Err(Error::OutOfRange {
            what: "interference probability",
            value: interference_prob.as_f64(),
            range: "[0, 1]",
        });
    }
    let p = window_probs(budget, det_a, det_b, interference_prob);
    let w = budget.windows_per_second();
    let mu = mean_pairs_per_window(budget);
    let coincidences = p.both * w;
    let true_coincidences = p.true_pair.min(p.both) * w;
    Ok(CountRates {
        singles_a: p.a * w,
        singles_b: p.b * w,
        coincidences,
        accidentals: (coincidences - true_coincidences).max(T::zero()),
        breakdown: RateBreakdown {
            mean_pairs_per_window: mu,
            pair_rate: mu * w,
            dark_rate_a: det_a.dark_per_window(budget.window_ns) * w,
            dark_rate_b: det_b.dark_per_window(budget.window_ns) * w,
            detection_a: budget.transmission_a() * det_a.efficiency,
            detection_b: budget.transmission_b() * det_b.efficiency * interference_prob,
            true_coincidences,
        },
    })
}

/// Mutually exclusive per-window outcomes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Tallies {
    pub no_click: u64,
    pub a_only: u64,
    pub b_only: u64,
    /// Coincidence with both photons of one split pair detected.
    pub true_coincidence: u64,
    /// Coincidence without such a pair.
    pub accidental_coincidence: u64,
}

impl Tallies {
    pub fn total(&self) -> u64 {
        self.no_click + self.a_only + self.b_only + self.true_coincidence + self.accidental_coincidence
    }
    pub fn singles_a(&self) -> u64 {
        self.a_only + self.coincidences()
    }
    pub fn singles_b(&self) -> u64 {
        self.b_only + self.coincidences()
    }
    pub fn coincidences(&self) -> u64 {
        self.true_coincidence + self.accidental_coincidence
    }

    fn add(self, o: Self) -> Self {
        Self {
            no_click: self.no_click + o.no_click,
            a_only: self.a_only + o.a_only,
            b_only: self.b_only + o.b_only,
            true_coincidence: self.true_coincidence + o.true_coincidence,
            accidental_coincidence: self.accidental_coincidence + o.accidental_coincidence,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McRun {
    pub seed: u64,
    pub algorithm: &'static str,
    pub n_windows: u64,
    pub window_ns: f64,
    pub interference_prob: f64,
    pub tallies: Tallies,
}

impl McRun {
    /// Observed rate (counts/s) and its Poisson standard deviation.
    pub fn rate(&self, count: u64) -> (f64, f64) {
        let t = self.n_windows as f64 * self.window_ns * 1e-9;
        (count as f64 / t, (count as f64).sqrt() / t)
    }
}

struct McParams {
    mu: f64,
    poisson: Option<Poisson<f64>>,
    s: f64,
    pa: f64,
    pb: f64,
    da: f64,
    db: f64,
}

fn simulate_block(p: &McParams, seed: u64, block: u64, n: u64) -> Tallies {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    let mut t = Tallies::default();
    for _ in 0..n {
        let pairs = match &p.poisson {
            Some(dist) => dist.sample(&mut rng) as u64,
            None => u64::from(rng.random::<f64>() < p.mu),
        };
        let mut click_a = rng.random::<f64>() < p.da;
        let mut click_b = rng.random::<f64>() < p.db;
        let mut true_pair = false;
        for _ in 0..pairs {
            if rng.random::<f64>() < p.s {
                let ha = rng.random::<f64>() < p.pa;
                let hb = rng.random::<f64>() < p.pb;
                click_a |= ha;
                click_b |= hb;
                true_pair |= ha && hb;
            } else if rng.random::<f64>() < 0.5 {
                for _ in 0..2 {
                    click_a |= rng.random::<f64>() < p.pa;
                }
            } else {
                for _ in 0..2 {
                    click_b |= rng.random::<f64>() < p.pb;
                }
            }
        }
        match (click_a, click_b) {
            (false, false) => t.no_click += 1,
            (true, false) => t.a_only += 1,
            (false, true) => t.b_only += 1,
            (true, true) if true_pair => t.true_coincidence += 1,
            (true, true) => t.accidental_coincidence += 1,
        }
    }
    t
}

/// Window-by-window Monte Carlo. Each block of 65536 windows draws from its
/// own ChaCha8 stream, so tallies do not depend on how blocks are scheduled.
pub fn simulate_counts<T: Real>(
    budget: &SourceBudget<T>,
    det_a: &DetectorParams<T>,
    det_b: &DetectorParams<T>,
    interference_prob: T,
    n_windows: u64,
    seed: u64,
) -> Result<McRun> {
    if n_windows == 0 {
        return Err(Error::InsufficientData { need: 1, got: 0 });
    }
    budget.validate()?;
    det_a.validate()?;
    det_b.validate()?;
    let mu = mean_pairs_per_window(budget).as_f64();
    let q = interference_prob.as_f64();
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::OutOfRange {
            what: "interference probability",
            value: q,
            range: "[0, 1]",
        });
    }
    let poisson = if budget.double_pairs && mu > 0.0 {
        Some(Poisson::new(mu).map_err(|e| Error::InvalidInput(e.to_string()))?)
    } else {
        None
    };
    let params = McParams {
        mu: if budget.double_pairs { 0.0 } else { mu },
        poisson,
        s: budget.bs_separation_prob.as_f64(),
        pa: (budget.transmission_a() * det_a.efficiency).as_f64(),
        pb: (budget.transmission_b() * det_b.efficiency).as_f64() * q,
        da: det_a.dark_per_window(budget.window_ns).as_f64(),
        db: det_b.dark_per_window(budget.window_ns).as_f64(),
    };
    let n_blocks = n_windows.div_ceil(BLOCK);
    let tallies = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let n = BLOCK.min(n_windows - b * BLOCK);
            simulate_block(&params, seed, b, n)
        })
        .reduce(Tallies::default, Tallies::add);
    Ok(McRun {
        seed,
        algorithm: RNG_ALGORITHM,
        n_windows,
        window_ns: budget.window_ns.as_f64(),
        interference_prob: q,
        tallies,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Visibility<T> {
    pub net: T,
    pub raw: T,
}

/// `V_net = (r_max - r_min)/(r_max - r_acc)` and `V_raw = (r_max - r_min)/r_max`.
pub fn visibility_net<T: Real>(r_max: T, r_min: T, r_acc: T) -> Result<Visibility<T>> {
    if !(r_min >= T::zero() && r_acc >= T::zero()) {
        return Err(Error::InvalidInput("rates must be non-negative".into()));
    }
    if !(r_max > r_acc) {
        return Err(Error::NoSignal {
            r_max: r_max.as_f64(),
            r_acc: r_acc.as_f64(),
        });
    }
    let diff = r_max - r_min;
    Ok(Visibility {
        net: diff / (r_max - r_acc),
        raw: diff / r_max,
    })
}

/// Result of fitting the per-arm losses to observed singles and coincidences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossCalibration<T> {
    pub budget: SourceBudget<T>,
    pub rates: CountRates<T>,
    /// Fraction of trigger singles due to dark counts.
    pub dark_fraction_a: T,
}

fn bisect<T: Real>(mut lo: T, mut hi: T, f: impl Fn(T) -> T) -> Option<T> {
    let (flo, fhi) = (f(lo), f(hi));
    if flo.signum() == fhi.signum() {
        return None;
    }
    for _ in 0..200 {
        let mid = (lo + hi) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid).signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some((lo + hi) * T::lit(0.5))
}

const LOSS_BRACKET_DB: f64 = 60.0;

/// Solves `loss_a` for the trigger singles rate, then `loss_b` for the
/// coincidence rate at full interference probability.
pub fn calibrate_losses<T: Real>(
    budget: &SourceBudget<T>,
    det_a: &DetectorParams<T>,
    det_b: &DetectorParams<T>,
    singles_a: T,
    coincidences: T,
) -> Result<LossCalibration<T>> {
    budget.validate()?;
    let rates_with = |la: T, lb: T| {
        let b = SourceBudget {
            loss_a_db: la,
            loss_b_db: lb,
            ..*budget
        };
        expected_rates(&b, det_a, det_b, T::one())
    };
    let fail = |residual: f64| Error::CalibrationFailed { residual };
    let bracket = T::lit(LOSS_BRACKET_DB);
    let la = bisect(T::zero(), bracket, |l| {
        rates_with(l, budget.loss_b_db).map(|r| r.singles_a - singles_a).unwrap_or(T::nan())
    })
    .ok_or_else(|| fail((rates_with(T::zero(), budget.loss_b_db).map(|r| r.singles_a).unwrap_or(T::nan()) - singles_a).as_f64()))?;
    let lb = bisect(T::zero(), bracket, |l| {
        rates_with(la, l).map(|r| r.coincidences - coincidences).unwrap_or(T::nan())
    })
    .ok_or_else(|| fail((rates_with(la, T::zero()).map(|r| r.coincidences).unwrap_or(T::nan()) - coincidences).as_f64()))?;
    let rates = rates_with(la, lb)?;
    Ok(LossCalibration {
        budget: SourceBudget {
            loss_a_db: la,
            loss_b_db: lb,
            ..*budget
        },
        rates,
        dark_fraction_a: rates.breakdown.dark_rate_a / rates.singles_a,
    })
}

/// Poisson counts for a scan: point `i` records `Poisson(T (true_rates[i] + r_acc))`.
/// One ChaCha8 stream per point.
pub fn simulate_scan_counts(true_rates: &[f64], r_acc: f64, integration_s: f64, seed: u64) -> Result<Vec<f64>> {
    if !(integration_s > 0.0) {
        return Err(Error::OutOfRange {
            what: "integration time (s)",
            value: integration_s,
            range: "(0, inf)",
        });
    }
    true_rates
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let mean = integration_s * (r + r_acc);
            if !(mean >= 0.0 && mean.is_finite()) {
                return Err(Error::InvalidInput(format!("invalid expected count {mean}")));
            }
            if mean == 0.0 {
                return Ok(0.0);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let dist = Poisson::new(mean).map_err(|e| Error::InvalidInput(e.to_string()))?;
            Ok(dist.sample(&mut rng).round())
        })
        .collect()
}
