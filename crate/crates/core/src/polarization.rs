//! Jones calculus for single photons and polarization density matrices for
//! photon pairs.
//!
//! Two-photon operators use the ordered basis `(HH, HV, VH, VV)` where the
//! first letter is Alice's photon and the second Bob's. Angles enter the
//! public API in degrees; phases in radians.

use std::ops::Mul;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;

/// Index of each basis state in the two-photon ordering.
pub const HH: usize = 0;
pub const HV: usize = 1;
pub const VH: usize = 2;
pub const VV: usize = 3;

fn cplx<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

fn real<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}

/// Single-photon polarization state `amp_h |H> + amp_v |V>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationVector<T> {
    pub amp_h: Complex<T>,
    pub amp_v: Complex<T>,
}

impl<T: Real> PolarizationVector<T> {
    pub fn new(amp_h: Complex<T>, amp_v: Complex<T>) -> Self {
        Self { amp_h, amp_v }
    }

    pub fn horizontal() -> Self {
        Self::new(real(T::one()), Complex::default())
    }

    pub fn vertical() -> Self {
        Self::new(Complex::default(), real(T::one()))
    }

    /// `(H + V)/sqrt(2)`
    pub fn diagonal() -> Self {
        let a = T::FRAC_1_SQRT_2();
        Self::new(real(a), real(a))
    }

    /// `(H - V)/sqrt(2)`
    pub fn antidiagonal() -> Self {
        let a = T::FRAC_1_SQRT_2();
        Self::new(real(a), real(-a))
    }

    /// Linear polarization at `angle_deg` from horizontal.
    pub fn linear(angle_deg: T) -> Self {
        let a = angle_deg.to_radians();
        Self::new(real(a.cos()), real(a.sin()))
    }

    pub fn norm_sqr(&self) -> T {
        self.amp_h.norm_sqr() + self.amp_v.norm_sqr()
    }

    /// Returns the normalized vector, or `None` for the zero vector.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm_sqr().sqrt();
        (n > T::zero()).then(|| Self::new(self.amp_h / n, self.amp_v / n))
    }

    /// `<self|other>`
    pub fn inner(&self, other: &Self) -> Complex<T> {
        self.amp_h.conj() * other.amp_h + self.amp_v.conj() * other.amp_v
    }

    /// `|<self|other>|^2`; equal to one iff the states coincide up to a global phase.
    pub fn fidelity(&self, other: &Self) -> T {
        self.inner(other).norm_sqr()
    }
}

/// 2x2 complex Jones matrix acting on `(amp_h, amp_v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JonesMatrix<T> {
    pub m: [[Complex<T>; 2]; 2],
}

impl<T: Real> JonesMatrix<T> {
    pub fn new(m: [[Complex<T>; 2]; 2]) -> Self {
        Self { m }
    }

    pub fn identity() -> Self {
        Self::diagonal(real(T::one()), real(T::one()))
    }

    pub fn diagonal(d0: Complex<T>, d1: Complex<T>) -> Self {
        Self::new([[d0, Complex::default()], [Complex::default(), d1]])
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.m;
        Self::new([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    pub fn apply(&self, v: &PolarizationVector<T>) -> PolarizationVector<T> {
        let m = &self.m;
        PolarizationVector::new(
            m[0][0] * v.amp_h + m[0][1] * v.amp_v,
            m[1][0] * v.amp_h + m[1][1] * v.amp_v,
        )
    }

    /// Largest element of `|M^dagger M - I|`.
    pub fn unitarity_defect(&self) -> T {
        let p = self.adjoint() * *self;
        let mut worst = T::zero();
        for i in 0..2 {
            for j in 0..2 {
                let target = if i == j { real(T::one()) } else { Complex::default() };
                worst = worst.max((p.m[i][j] - target).norm());
            }
        }
        worst
    }

    pub fn is_unitary(&self, tol: T) -> bool {
        self.unitarity_defect() <= tol
    }

    /// True when `self = e^{i g} other` for some global phase `g`.
    pub fn equals_up_to_phase(&self, other: &Self, tol: T) -> bool {
        // Pick the phase from the largest element of `other`.
        let (mut bi, mut bj, mut best) = (0, 0, T::zero());
        for i in 0..2 {
            for j in 0..2 {
                if other.m[i][j].norm() > best {
                    best = other.m[i][j].norm();
                    bi = i;
                    bj = j;
                }
            }
        }
        if best == T::zero() {
            return self.m.iter().flatten().all(|z| z.norm() <= tol);
        }
        let a = self.m[bi][bj];
        if a.norm() == T::zero() {
            return false;
        }
        let phase = a / other.m[bi][bj];
        let phase = phase / phase.norm();
        (0..2).all(|i| (0..2).all(|j| (self.m[i][j] - phase * other.m[i][j]).norm() <= tol))
    }

    /// Kronecker product `self (x) other` as a 4x4 matrix in `(HH, HV, VH, VV)` order.
    pub fn kron(&self, other: &Self) -> [[Complex<T>; 4]; 4] {
        let mut out = [[Complex::default(); 4]; 4];
        for (i, j, k, l) in quad() {
            out[2 * i + k][2 * j + l] = self.m[i][j] * other.m[k][l];
        }
        out
    }
}

fn quad() -> impl Iterator<Item = (usize, usize, usize, usize)> {
    (0..16).map(|n| (n >> 3 & 1, n >> 2 & 1, n >> 1 & 1, n & 1))
}

impl<T: Real> Mul for JonesMatrix<T> {
    type Output = Self;

    fn mul(self, rhs: Self) -> Self {
        let mut out = [[Complex::default(); 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = self.m[i][0] * rhs.m[0][j] + self.m[i][1] * rhs.m[1][j];
            }
        }
        Self::new(out)
    }
}

/// Half-wave plate with its fast axis at `theta_deg`.
///
/// `H` is mapped onto linear polarization at `2 * theta_deg`, which is why an
/// analyzer made of a HWP followed by a PBS acts as a polarizer at twice the
/// plate angle.
pub fn hwp_matrix<T: Real>(theta_deg: T) -> JonesMatrix<T> {
    let two = (theta_deg * T::lit(2.0)).to_radians();
    let (s, c) = two.sin_cos();
    JonesMatrix::new([[real(c), real(s)], [real(s), real(-c)]])
}

/// Quarter-wave plate with its fast axis at `theta_deg`: `R(theta) diag(1, i) R(-theta)`.
pub fn qwp_matrix<T: Real>(theta_deg: T) -> JonesMatrix<T> {
    let (s, c) = theta_deg.to_radians().sin_cos();
    let off = cplx(c * s, -c * s);
    JonesMatrix::new([[cplx(c * c, s * s), off], [off, cplx(s * s, c * c)]])
}

/// Soleil-Babinet compensator: relative phase `phi` on `V`.
pub fn sb_matrix<T: Real>(phi: T) -> JonesMatrix<T> {
    JonesMatrix::diagonal(real(T::one()), Complex::from_polar(T::one(), phi))
}

/// Analyzer made of a half-wave plate followed by a PBS, with an optional
/// Soleil-Babinet phase (only used on Alice's side).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyzerSetting<T> {
    pub hwp_angle: T,
    pub sb_phase: T,
}

impl<T: Real> AnalyzerSetting<T> {
    pub fn new(hwp_angle: T, sb_phase: T) -> Self {
        Self { hwp_angle, sb_phase }
    }

    /// Effective polarizer angle `2 * hwp_angle`, reduced to `[0, 180)`.
    pub fn polarizer_angle(&self) -> T {
        let a = T::lit(2.0) * self.hwp_angle;
        let half_turn = T::lit(180.0);
        let r = a % half_turn;
        if r < T::zero() {
            r + half_turn
        } else {
            r
        }
    }
}

/// 4x4 two-photon polarization density matrix over `(HH, HV, VH, VV)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPhotonDensityMatrix<T> {
    rho: [[Complex<T>; 4]; 4],
}

impl<T: Real> TwoPhotonDensityMatrix<T> {
    /// Validates and wraps a raw matrix: Hermitian, unit trace, positive semidefinite.
    pub fn new(rho: [[Complex<T>; 4]; 4]) -> Result<Self> {
        let s = Self { rho };
        s.validate()?;
        Ok(s)
    }

    /// Projector onto a (normalized) pure state given by its four amplitudes.
    pub fn from_pure(amps: [Complex<T>; 4]) -> Result<Self> {
        let norm: T = amps.iter().map(|a| a.norm_sqr()).sum();
        if !(norm > T::zero()) {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let mut rho = [[Complex::default(); 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                rho[i][j] = amps[i] * amps[j].conj() / norm;
            }
        }
        Ok(Self { rho })
    }

    pub fn matrix(&self) -> &[[Complex<T>; 4]; 4] {
        &self.rho
    }

    pub fn element(&self, row: usize, col: usize) -> Complex<T> {
        self.rho[row][col]
    }

    pub fn trace(&self) -> Complex<T> {
        (0..4).map(|i| self.rho[i][i]).fold(Complex::default(), |a, b| a + b)
    }

    pub fn hermiticity_defect(&self) -> T {
        let mut worst = T::zero();
        for i in 0..4 {
            for j in 0..4 {
                worst = worst.max((self.rho[i][j] - self.rho[j][i].conj()).norm());
            }
        }
        worst
    }

    /// Eigenvalues in ascending order.
    ///
    /// Uses the real 8x8 symmetric embedding `[[Re, -Im], [Im, Re]]`, whose
    /// spectrum is that of the Hermitian matrix with every value doubled.
    pub fn eigenvalues(&self) -> [T; 4] {
        let mut big = linalg::zeros::<T>(8, 8);
        for i in 0..4 {
            for j in 0..4 {
                // symmetrize to absorb rounding in the input
                let z = (self.rho[i][j] + self.rho[j][i].conj()) * T::lit(0.5);
                big[i][j] = z.re;
                big[i + 4][j + 4] = z.re;
                big[i][j + 4] = -z.im;
                big[i + 4][j] = z.im;
            }
        }
        let ev = linalg::symmetric_eigenvalues(&big);
        [ev[0], ev[2], ev[4], ev[6]]
    }

    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_defect();
        if herm > T::tolerance(1e-12) {
            return Err(Error::InvalidState(format!(
                "not Hermitian (defect {:e})",
                herm.as_f64()
            )));
        }
        let tr = self.trace();
        if (tr - real(T::one())).norm() > T::tolerance(1e-12) {
            return Err(Error::InvalidState(format!(
                "trace {} != 1",
                tr.re.as_f64()
            )));
        }
        let min_ev = self.eigenvalues()[0];
        if min_ev < -T::tolerance(1e-10) {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {:e}",
                min_ev.as_f64()
            )));
        }
        Ok(())
    }

    /// `rho * rho`
    pub fn squared(&self) -> [[Complex<T>; 4]; 4] {
        mat4_mul(&self.rho, &self.rho)
    }

    /// `Tr(rho^2)`; one for pure states.
    pub fn purity(&self) -> T {
        let sq = self.squared();
        (0..4).map(|i| sq[i][i].re).sum()
    }

    /// Largest element-wise distance to another density matrix.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        let mut worst = T::zero();
        for i in 0..4 {
            for j in 0..4 {
                worst = worst.max((self.rho[i][j] - other.rho[i][j]).norm());
            }
        }
        worst
    }
}

fn mat4_mul<T: Real>(a: &[[Complex<T>; 4]; 4], b: &[[Complex<T>; 4]; 4]) -> [[Complex<T>; 4]; 4] {
    let mut out = [[Complex::default(); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4).fold(Complex::default(), |acc, k| acc + a[i][k] * b[k][j]);
        }
    }
    out
}

fn mat4_adjoint<T: Real>(a: &[[Complex<T>; 4]; 4]) -> [[Complex<T>; 4]; 4] {
    let mut out = [[Complex::default(); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = a[j][i].conj();
        }
    }
    out
}

/// State `1/sqrt(2) [|H_a V_b> + e^{i phi} |V_a H_b>]` with its `HV <-> VH`
/// coherence scaled by `coherence` to model partial distinguishability.
pub fn make_psi_state<T: Real>(coherence: T, phi: T) -> Result<TwoPhotonDensityMatrix<T>> {
    if !(coherence >= T::zero() && coherence <= T::one()) {
        return Err(Error::OutOfRange {
            what: "coherence",
            value: coherence.as_f64(),
            range: "[0, 1]",
        });
    }
    let half = T::lit(0.5);
    let mut rho = [[Complex::default(); 4]; 4];
    rho[HV][HV] = real(half);
    rho[VH][VH] = real(half);
    rho[HV][VH] = Complex::from_polar(coherence * half, -phi);
    rho[VH][HV] = Complex::from_polar(coherence * half, phi);
    Ok(TwoPhotonDensityMatrix { rho })
}

/// Local unitary evolution `(j_a (x) j_b) rho (j_a (x) j_b)^dagger`.
pub fn apply_local<T: Real>(
    rho: &TwoPhotonDensityMatrix<T>,
    j_a: &JonesMatrix<T>,
    j_b: &JonesMatrix<T>,
) -> Result<TwoPhotonDensityMatrix<T>> {
    let tol = T::tolerance(1e-10);
    for j in [j_a, j_b] {
        let defect = j.unitarity_defect();
        if defect > tol {
            return Err(Error::NonUnitary {
                defect: defect.as_f64(),
            });
        }
    }
    let u = j_a.kron(j_b);
    let out = mat4_mul(&mat4_mul(&u, &rho.rho), &mat4_adjoint(&u));
    Ok(TwoPhotonDensityMatrix { rho: out })
}

/// Which PBS output a photon is registered in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Port {
    /// Projection onto the analyzer's polarizer angle.
    Transmitted,
    /// Projection onto the orthogonal angle.
    Reflected,
}

fn product_amplitudes<T: Real>(alpha_deg: T, beta_deg: T) -> [Complex<T>; 4] {
    let a = PolarizationVector::linear(alpha_deg);
    let b = PolarizationVector::linear(beta_deg);
    [
        a.amp_h * b.amp_h,
        a.amp_h * b.amp_v,
        a.amp_v * b.amp_h,
        a.amp_v * b.amp_v,
    ]
}

/// `<alpha, beta| rho |alpha, beta>`: the probability that Alice's photon
/// passes a polarizer at `alpha_deg` and Bob's one at `beta_deg`.
pub fn coincidence_prob<T: Real>(rho: &TwoPhotonDensityMatrix<T>, alpha_deg: T, beta_deg: T) -> T {
    let v = product_amplitudes(alpha_deg, beta_deg);
    let mut acc = Complex::<T>::default();
    for i in 0..4 {
        for j in 0..4 {
            acc = acc + v[i].conj() * rho.rho[i][j] * v[j];
        }
    }
    acc.re.max(T::zero()).min(T::one())
}

/// Joint probability of a given pair of PBS outputs.
pub fn outcome_prob<T: Real>(
    rho: &TwoPhotonDensityMatrix<T>,
    alpha_deg: T,
    beta_deg: T,
    port_a: Port,
    port_b: Port,
) -> T {
    let right = T::lit(90.0);
    let shift = |angle: T, port: Port| match port {
        Port::Transmitted => angle,
        Port::Reflected => angle + right,
    };
    coincidence_prob(rho, shift(alpha_deg, port_a), shift(beta_deg, port_b))
}
