//! Weighted nonlinear least squares for dips and fringes.
//!
//! Data are fitted in rate space: point `i` contributes
//! `(counts_i / T_i - f(x_i))^2 / sigma_i^2` with `sigma_i^2 = max(raw_i, 1) / T_i^2`,
//! where `raw_i` is the count before any background subtraction.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interference::{correlation_e, n_sigma, ChshResult};
use crate::linalg::{invert, solve, symmetric_eigenvalues, zeros, Matrix};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanData<T> {
    pub x: Vec<T>,
    pub counts: Vec<T>,
    /// Seconds per point.
    pub integration_time_s: Vec<T>,
    /// Counts before background subtraction; equal to `counts` for raw data.
    pub raw_counts: Vec<T>,
    pub net: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    x: f64,
    counts: f64,
    integration_time_s: f64,
}

impl<T: Real> ScanData<T> {
    pub fn new(x: Vec<T>, counts: Vec<T>, integration_time_s: Vec<T>) -> Result<Self> {
        if x.len() != counts.len() || x.len() != integration_time_s.len() {
            return Err(Error::ScanFormat(format!(
                "column lengths differ: x {}, counts {}, integration_time_s {}",
                x.len(),
                counts.len(),
                integration_time_s.len()
            )));
        }
        if let Some(c) = counts.iter().find(|c| !(**c >= T::zero() && c.is_finite())) {
            return Err(Error::ScanFormat(format!("invalid count {c}")));
        }
        if let Some(t) = integration_time_s.iter().find(|t| !(**t > T::zero() && t.is_finite())) {
            return Err(Error::ScanFormat(format!("invalid integration time {t}")));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::ScanFormat("non-finite x value".into()));
        }
        Ok(Self {
            raw_counts: counts.clone(),
            x,
            counts,
            integration_time_s,
            net: false,
        })
    }

    /// Same integration time for every point.
    pub fn uniform(x: Vec<T>, counts: Vec<T>, integration_time_s: T) -> Result<Self> {
        let t = vec![integration_time_s; x.len()];
        Self::new(x, counts, t)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn rates(&self) -> Vec<T> {
        self.counts.iter().zip(&self.integration_time_s).map(|(&c, &t)| c / t).collect()
    }

    fn sigmas(&self) -> Vec<T> {
        self.raw_counts
            .iter()
            .zip(&self.integration_time_s)
            .map(|(&c, &t)| c.max(T::one()).sqrt() / t)
            .collect()
    }

    /// Reads `x,counts,integration_time_s` CSV with a header row.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let (mut x, mut c, mut t) = (Vec::new(), Vec::new(), Vec::new());
        for (i, row) in rdr.deserialize::<CsvRow>().enumerate() {
            let row = row.map_err(|e| Error::ScanFormat(format!("row {}: {e}", i + 1)))?;
            x.push(T::lit(row.x));
            c.push(T::lit(row.counts));
            t.push(T::lit(row.integration_time_s));
        }
        Self::new(x, c, t)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::ScanFormat(format!("{}: {e}", path.display())))?;
        Self::from_csv_reader(f)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        for i in 0..self.len() {
            w.serialize(CsvRow {
                x: self.x[i].as_f64(),
                counts: self.counts[i].as_f64(),
                integration_time_s: self.integration_time_s[i].as_f64(),
            })
            .map_err(|e| Error::ScanFormat(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::ScanFormat(e.to_string()))
    }
}

/// Subtracts `accidental_rate * T_i` from each point, flooring at zero.
/// Weights keep using the raw counts.
pub fn net_correct<T: Real>(data: &ScanData<T>, accidental_rate: T) -> Result<ScanData<T>> {
    if !(accidental_rate >= T::zero() && accidental_rate.is_finite()) {
        return Err(Error::OutOfRange {
            what: "accidental rate (counts/s)",
            value: accidental_rate.as_f64(),
            range: "[0, inf)",
        });
    }
    let counts = data
        .counts
        .iter()
        .zip(&data.integration_time_s)
        .map(|(&c, &t)| (c - accidental_rate * t).max(T::zero()))
        .collect();
    Ok(ScanData {
        counts,
        net: true,
        ..data.clone()
    })
}

/// A model `f(x; p)` for least squares.
pub trait FitModel<T: Real> {
    fn name(&self) -> &'static str;
    fn param_names(&self) -> &'static [&'static str];
    fn value(&self, x: T, p: &[T]) -> T;

    /// `df/dp`. Defaults to central differences.
    fn gradient(&self, x: T, p: &[T], grad: &mut [T]) {
        let mut q = p.to_vec();
        for j in 0..p.len() {
            let h = T::epsilon().cbrt() * p[j].abs().max(T::one());
            q[j] = p[j] + h;
            let up = self.value(x, &q);
            q[j] = p[j] - h;
            let down = self.value(x, &q);
            q[j] = p[j];
            grad[j] = (up - down) / (h + h);
        }
    }

    /// Parameters confined to `[0, 1]`.
    fn unit_interval_params(&self) -> &'static [usize] {
        &[]
    }
}

/// `R0 [1 - V exp(-4 ln2 (x - x0)^2 / w^2)]`, parameters `[R0, V, x0, w]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct DipModel;

impl<T: Real> FitModel<T> for DipModel {
    fn name(&self) -> &'static str {
        "dip"
    }
    fn param_names(&self) -> &'static [&'static str] {
        &["R0", "V", "x0", "w"]
    }
    fn value(&self, x: T, p: &[T]) -> T {
        let d = (x - p[2]) / p[3];
        p[0] * (T::one() - p[1] * (-T::lit(4.0) * T::LN_2() * d * d).exp())
    }
    fn gradient(&self, x: T, p: &[T], grad: &mut [T]) {
        let k = T::lit(4.0) * T::LN_2();
        let d = (x - p[2]) / p[3];
        let g = (-k * d * d).exp();
        grad[0] = T::one() - p[1] * g;
        grad[1] = -p[0] * g;
        // d/dx0 of -R0 V g = -R0 V g * (2 k d / w)
        grad[2] = -p[0] * p[1] * g * T::lit(2.0) * k * d / p[3];
        grad[3] = -p[0] * p[1] * g * T::lit(2.0) * k * d * d / p[3];
    }
    fn unit_interval_params(&self) -> &'static [usize] {
        &[1]
    }
}

/// `(R0/2) [1 - V cos(4 (theta - theta0))]` in HWP degrees, parameters
/// `[R0, V, theta0]`. Period fixed at 90 degrees.
#[derive(Debug, Clone, Copy, Default)]
pub struct FringeModel;

impl<T: Real> FitModel<T> for FringeModel {
    fn name(&self) -> &'static str {
        "fringe"
    }
    fn param_names(&self) -> &'static [&'static str] {
        &["R0", "V", "theta0"]
    }
    fn value(&self, x: T, p: &[T]) -> T {
        let arg = (T::lit(4.0) * (x - p[2])).to_radians();
        p[0] * T::lit(0.5) * (T::one() - p[1] * arg.cos())
    }
    fn gradient(&self, x: T, p: &[T], grad: &mut [T]) {
        let arg = (T::lit(4.0) * (x - p[2])).to_radians();
        let (s, c) = arg.sin_cos();
        let half = T::lit(0.5);
        grad[0] = half * (T::one() - p[1] * c);
        grad[1] = -half * p[0] * c;
        grad[2] = -half * p[0] * p[1] * s * T::lit(4.0).to_radians();
    }
    fn unit_interval_params(&self) -> &'static [usize] {
        &[1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult<T> {
    pub model: String,
    /// Parameter order used by `covariance`.
    pub names: Vec<String>,
    pub params: BTreeMap<String, T>,
    pub std_errors: BTreeMap<String, T>,
    pub covariance: Matrix<T>,
    pub chi2: T,
    pub dof: usize,
    pub reduced_chi2: T,
    pub iterations: usize,
}

impl<T: Real> FitResult<T> {
    pub fn param(&self, name: &str) -> Option<T> {
        self.params.get(name).copied()
    }

    pub fn error(&self, name: &str) -> Option<T> {
        self.std_errors.get(name).copied()
    }

    pub fn values(&self) -> Vec<T> {
        self.names.iter().map(|n| self.params[n]).collect()
    }
}

pub const MAX_ITERATIONS: usize = 500;

/// Starting values are kept this far inside `[0, 1]`; the transform has no
/// slope on the bounds themselves.
const UNIT_MARGIN: f64 = 1e-4;

fn to_internal<T: Real>(p: &[T], unit: &[usize]) -> Vec<T> {
    let mut u = p.to_vec();
    let margin = T::lit(UNIT_MARGIN);
    for &j in unit {
        let v = p[j].max(margin).min(T::one() - margin);
        u[j] = (v + v - T::one()).asin();
    }
    u
}

fn to_physical<T: Real>(u: &[T], unit: &[usize]) -> Vec<T> {
    let mut p = u.to_vec();
    for &j in unit {
        p[j] = (T::one() + u[j].sin()) * T::lit(0.5);
    }
    p
}

fn chi2_of<T: Real, M: FitModel<T>>(model: &M, x: &[T], y: &[T], sigma: &[T], p: &[T]) -> T {
    x.iter()
        .zip(y)
        .zip(sigma)
        .map(|((&xi, &yi), &si)| {
            let r = (yi - model.value(xi, p)) / si;
            r * r
        })
        .sum()
}

/// Weighted Jacobian `(df/dp_j) / sigma_i` and residuals `(y - f)/sigma`.
fn jacobian<T: Real, M: FitModel<T>>(model: &M, x: &[T], y: &[T], sigma: &[T], p: &[T]) -> (Matrix<T>, Vec<T>) {
    let k = p.len();
    let mut grad = vec![T::zero(); k];
    let mut jac = Vec::with_capacity(x.len());
    let mut res = Vec::with_capacity(x.len());
    for ((&xi, &yi), &si) in x.iter().zip(y).zip(sigma) {
        model.gradient(xi, p, &mut grad);
        jac.push(grad.iter().map(|&g| g / si).collect());
        res.push((yi - model.value(xi, p)) / si);
    }
    (jac, res)
}

fn normal_matrix<T: Real>(jac: &Matrix<T>, k: usize) -> Matrix<T> {
    let mut a = zeros(k, k);
    for row in jac {
        for i in 0..k {
            for j in 0..k {
                a[i][j] += row[i] * row[j];
            }
        }
    }
    a
}

/// Gradient of chi^2 with respect to the physical parameters.
pub fn chi2_gradient<T: Real, M: FitModel<T>>(model: &M, data: &ScanData<T>, p: &[T]) -> Vec<T> {
    let (jac, res) = jacobian(model, &data.x, &data.rates(), &data.sigmas(), p);
    (0..p.len())
        .map(|j| -T::lit(2.0) * jac.iter().zip(&res).map(|(row, &r)| row[j] * r).sum::<T>())
        .collect()
}

pub fn chi2<T: Real, M: FitModel<T>>(model: &M, data: &ScanData<T>, p: &[T]) -> T {
    chi2_of(model, &data.x, &data.rates(), &data.sigmas(), p)
}

/// Levenberg-Marquardt from `initial`. Unit-interval parameters are mapped
/// through `V = (1 + sin u)/2`; the covariance `(J^T W J)^-1` is evaluated in
/// physical parameters at the optimum.
pub fn fit_model<T: Real, M: FitModel<T>>(model: &M, data: &ScanData<T>, initial: &[T]) -> Result<FitResult<T>> {
    let k = model.param_names().len();
    if initial.len() != k {
        return Err(Error::InvalidInput(format!("expected {k} initial parameters, got {}", initial.len())));
    }
    if data.len() <= k {
        return Err(Error::InsufficientData { need: k + 1, got: data.len() });
    }
    let unit = model.unit_interval_params();
    let (x, y, sigma) = (&data.x, data.rates(), data.sigmas());

    // chain rule factor dp/du
    let dpdu = |u: &[T]| -> Vec<T> {
        let mut d = vec![T::one(); u.len()];
        for &j in unit {
            d[j] = u[j].cos() * T::lit(0.5);
        }
        d
    };

    let mut u = to_internal(initial, unit);
    let mut p = to_physical(&u, unit);
    let mut chi2 = chi2_of(model, x, &y, &sigma, &p);
    if !chi2.is_finite() {
        return Err(Error::InvalidInput("initial parameters give a non-finite chi^2".into()));
    }
    let mut lambda = T::lit(1e-3);
    let mut converged = false;
    let mut iterations = 0;
    let tiny = T::min_positive_value().sqrt();

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let (mut jac, res) = jacobian(model, x, &y, &sigma, &p);
        let d = dpdu(&u);
        for row in jac.iter_mut() {
            for j in 0..k {
                row[j] *= d[j];
            }
        }
        let a = normal_matrix(&jac, k);
        let g: Vec<T> = (0..k).map(|j| jac.iter().zip(&res).map(|(row, &r)| row[j] * r).sum()).collect();
        // Marquardt scaling; parameters with a vanishing column (a unit-interval
        // parameter sitting on its bound) are held for this step
        let diag_max = (0..k).fold(T::zero(), |m, j| m.max(a[j][j]));
        let active: Vec<usize> = (0..k).filter(|&j| a[j][j] > diag_max * tiny).collect();
        let scale: Vec<T> = active.iter().map(|&j| a[j][j].sqrt()).collect();
        let scaled: Matrix<T> = active
            .iter()
            .zip(&scale)
            .map(|(&i, &si)| active.iter().zip(&scale).map(|(&j, &sj)| a[i][j] / (si * sj)).collect())
            .collect();
        let rhs: Vec<T> = active.iter().zip(&scale).map(|(&j, &sj)| g[j] / sj).collect();

        let mut accepted = None;
        while lambda < T::lit(1e16) {
            let mut damped = scaled.clone();
            for (j, row) in damped.iter_mut().enumerate() {
                row[j] += lambda;
            }
            if let Some(z) = solve(&damped, &rhs) {
                let mut step = vec![T::zero(); k];
                for ((&j, &sj), &zj) in active.iter().zip(&scale).zip(&z) {
                    step[j] = zj / sj;
                }
                let u_new: Vec<T> = u.iter().zip(&step).map(|(&a, &b)| a + b).collect();
                let p_new = to_physical(&u_new, unit);
                let c = chi2_of(model, x, &y, &sigma, &p_new);
                if c.is_finite() && c <= chi2 {
                    accepted = Some((u_new, p_new, c, step));
                    break;
                }
            }
            lambda *= T::lit(10.0);
        }
        let Some((u_new, p_new, c, step)) = accepted else {
            // no downhill step at any damping: at the minimum to working precision
            converged = true;
            break;
        };
        let drop = chi2 - c;
        let small_step = step
            .iter()
            .zip(&u)
            .all(|(&s, &v)| s.abs() <= T::lit(1e-12) * (v.abs() + T::lit(1e-12)));
        u = u_new;
        p = p_new;
        chi2 = c;
        lambda = (lambda / T::lit(10.0)).max(T::lit(1e-15));
        if drop <= T::epsilon() * T::lit(4.0) * chi2 || small_step || chi2 <= tiny {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::FitNonConvergence {
            iterations,
            chi2: chi2.as_f64(),
        });
    }

    let (jac, _) = jacobian(model, x, &y, &sigma, &p);
    let cov = invert(&normal_matrix(&jac, k))
        .ok_or_else(|| Error::InvalidState("singular normal matrix at the optimum".into()))?;
    let names: Vec<String> = model.param_names().iter().map(|s| s.to_string()).collect();
    let dof = data.len() - k;
    Ok(FitResult {
        model: model.name().to_string(),
        params: names.iter().cloned().zip(p.iter().copied()).collect(),
        std_errors: names
            .iter()
            .cloned()
            .zip((0..k).map(|j| cov[j][j].max(T::zero()).sqrt()))
            .collect(),
        names,
        covariance: cov,
        chi2,
        dof,
        reduced_chi2: chi2 / T::lit(dof as f64),
        iterations,
    })
}

pub const MIN_FIT_POINTS: usize = 6;

fn check_points<T: Real>(data: &ScanData<T>) -> Result<()> {
    if data.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData {
            need: MIN_FIT_POINTS,
            got: data.len(),
        });
    }
    Ok(())
}

fn extrema<T: Real>(y: &[T]) -> (usize, T, T) {
    let mut imin = 0;
    for (i, v) in y.iter().enumerate() {
        if *v < y[imin] {
            imin = i;
        }
    }
    let max = y.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    (imin, y[imin], max)
}

/// Sorted copy of `(x, y)`.
fn sorted<T: Real>(data: &ScanData<T>) -> (Vec<T>, Vec<T>) {
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.sort_by(|&a, &b| data.x[a].partial_cmp(&data.x[b]).unwrap_or(std::cmp::Ordering::Equal));
    let y = data.rates();
    (idx.iter().map(|&i| data.x[i]).collect(), idx.iter().map(|&i| y[i]).collect())
}

/// Initial dip guess: `V = (max - min)/max`, center at the minimum, width from
/// the half-height crossings.
pub fn dip_initial_guess<T: Real>(data: &ScanData<T>) -> Result<Vec<T>> {
    check_points(data)?;
    let (x, y) = sorted(data);
    let (imin, min, max) = extrema(&y);
    if !(max > min) {
        return Err(Error::NoDipDetected("constant counts".into()));
    }
    let half = (max + min) * T::lit(0.5);
    let crossing = |i: usize, j: usize| {
        // linear interpolation between a point below and one at/above half height
        let t = (half - y[i]) / (y[j] - y[i]);
        x[i] + (x[j] - x[i]) * t
    };
    let left = (0..imin).rev().find(|&i| y[i] >= half).map(|i| crossing(i + 1, i));
    let right = (imin + 1..y.len()).find(|&i| y[i] >= half).map(|i| crossing(i - 1, i));
    let span = x[x.len() - 1] - x[0];
    let w = match (left, right) {
        (Some(l), Some(r)) if r > l => r - l,
        (Some(l), None) => (x[imin] - l) * T::lit(2.0),
        (None, Some(r)) => (r - x[imin]) * T::lit(2.0),
        _ => span / T::lit(4.0),
    };
    let w = if w > T::zero() { w } else { span / T::lit(4.0) };
    Ok(vec![max, (max - min) / max, x[imin], w])
}

/// Initial fringe guess: `V = (max - min)/(max + min)`, `R0 = max + min`,
/// `theta0` at the minimum.
pub fn fringe_initial_guess<T: Real>(data: &ScanData<T>) -> Result<Vec<T>> {
    check_points(data)?;
    let (x, y) = sorted(data);
    let (imin, min, max) = extrema(&y);
    if !(max > min) {
        return Err(Error::NoDipDetected("constant counts".into()));
    }
    Ok(vec![max + min, (max - min) / (max + min), x[imin]])
}

/// Fits a Gaussian dip; `w` is its FWHM.
pub fn fit_dip<T: Real>(data: &ScanData<T>) -> Result<FitResult<T>> {
    let init = dip_initial_guess(data)?;
    fit_model(&DipModel, data, &init)
}

/// Fits a 90-degree-period fringe in HWP angle.
pub fn fit_fringe<T: Real>(data: &ScanData<T>) -> Result<FitResult<T>> {
    let init = fringe_initial_guess(data)?;
    let mut fit = fit_model(&FringeModel, data, &init)?;
    // fold theta0 into (-45, 45]
    if let Some(t) = fit.params.get_mut("theta0") {
        let period = T::lit(90.0);
        let mut r = *t % period;
        if r > T::lit(45.0) {
            r -= period;
        } else if r <= T::lit(-45.0) {
            r += period;
        }
        *t = r;
    }
    Ok(fit)
}

/// A fitted fringe together with Alice's HWP angle.
#[derive(Debug, Clone, Copy)]
pub struct FringeFit<'a, T> {
    pub alice_hwp_deg: T,
    pub fit: &'a FitResult<T>,
}

fn same_hwp<T: Real>(a: T, b: T) -> bool {
    let r = (a - b) % T::lit(90.0);
    r.abs() < T::lit(1e-6) || (r.abs() - T::lit(90.0)).abs() < T::lit(1e-6)
}

/// CHSH from four fringes taken at Alice HWP angles covering `a/2`, `(a+90)/2`,
/// `a'/2` and `(a'+90)/2`. Each fitted fringe is evaluated at Bob's HWP angles
/// `b/2` and `(b+90)/2`; the error follows from each fit's covariance.
pub fn chsh_from_fits<T: Real>(fringes: &[FringeFit<'_, T>], settings_deg: [T; 4]) -> Result<ChshResult<T>> {
    if fringes.len() != 4 {
        return Err(Error::SettingCount {
            expected: 4,
            got: fringes.len(),
        });
    }
    if let Some(f) = fringes.iter().find(|f| f.fit.model != "fringe") {
        return Err(Error::InvalidInput(format!("expected fringe fits, got '{}'", f.fit.model)));
    }
    let half = T::lit(0.5);
    let ninety = T::lit(90.0);
    let find = |pol: T| {
        fringes
            .iter()
            .position(|f| same_hwp(f.alice_hwp_deg, pol * half))
            .ok_or_else(|| Error::InvalidInput(format!("no fringe measured at Alice HWP {}", pol * half)))
    };
    let [a, a2, b, b2] = settings_deg;
    let alice = [(find(a)?, find(a + ninety)?), (find(a2)?, find(a2 + ninety)?)];
    let bob = [b, b2];

    let k = 3;
    let params: Vec<T> = fringes.iter().flat_map(|f| f.fit.values()).collect();
    let s_of = |p: &[T]| -> Result<T> {
        let rate = |fringe: usize, pol: T| FitModel::<T>::value(&FringeModel, pol * half, &p[fringe * k..fringe * k + k]);
        let mut e = [[T::zero(); 2]; 2];
        for (i, &(fa, fa_perp)) in alice.iter().enumerate() {
            for (j, &pb) in bob.iter().enumerate() {
                let pb_perp = pb + ninety;
                let rates = [rate(fa, pb), rate(fa, pb_perp), rate(fa_perp, pb), rate(fa_perp, pb_perp)]
                    .map(|r| r.max(T::zero()));
                e[i][j] = correlation_e(rates)?;
            }
        }
        Ok((e[0][0] - e[0][1]).abs() + (e[1][0] + e[1][1]).abs())
    };
    let s = s_of(&params)?;

    let mut var = T::zero();
    let mut q = params.clone();
    for (f, fringe) in fringes.iter().enumerate() {
        let mut grad = [T::zero(); 3];
        for (j, g) in grad.iter_mut().enumerate() {
            let idx = f * k + j;
            let h = T::epsilon().cbrt() * params[idx].abs().max(T::one());
            q[idx] = params[idx] + h;
            let up = s_of(&q)?;
            q[idx] = params[idx] - h;
            let down = s_of(&q)?;
            q[idx] = params[idx];
            *g = (up - down) / (h + h);
        }
        let cov = &fringe.fit.covariance;
        for i in 0..k {
            for j in 0..k {
                var += grad[i] * cov[i][j] * grad[j];
            }
        }
    }
    let std_error = var.max(T::zero()).sqrt();
    Ok(ChshResult {
        s,
        std_error,
        n_sigma_violation: n_sigma(s, std_error),
    })
}

/// Smallest covariance eigenvalue relative to the largest; negative values
/// beyond rounding would indicate an invalid covariance.
pub fn covariance_min_relative_eigenvalue<T: Real>(fit: &FitResult<T>) -> T {
    let ev = symmetric_eigenvalues(&fit.covariance);
    let max = ev.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
    if max == T::zero() {
        return T::zero();
    }
    ev[0] / max
}
