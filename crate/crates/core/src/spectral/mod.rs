//! Second-order (filter-function) description of the echo signal.
//!
//! With couplings `V_0 = lambda (eta + 1) V / 2`, `V_1 = lambda (eta - 1) V / 2`
//! the echo coherence is `W(2 tau) ~ 1 - lambda^2 chi - i eta lambda^2 phi`,
//! where
//!
//! ```text
//! chi = 1/2 int_{t1 > t2} f(t1) f(t2) C(t1, t2)
//! phi = 1/2 int_{t1 > t2} f(t1) K(t1, t2)
//! C(t1, t2) = Tr R {V(t1), V(t2)},  K = -i theta(t1 - t2) Tr R [V(t1), V(t2)]
//! ```
//!
//! and `f` is the echo filter. For a stationary environment with power
//! spectrum `S(w) = sum_k 2 pi s_k delta(w - w_k)`,
//! `chi = sum_k s_k 4 sin^4(w_k tau/2) / w_k^2`, and in a thermal state
//! `phi = sum_k s_k 4 sin^3(w_k tau/2) cos(w_k tau/2) tanh(beta w_k/2) / w_k^2`.

mod quadrature;

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{comm_norm, commutator_tolerance, eig_hermitian, max_abs, CMatrix, Hermitian, LinalgError, C64};
use crate::model::{Branch, EnvDensity, ModelError, PureDephasingModel};

pub use quadrature::{adaptive_simpson, GaussLegendre, QuadratureError};

/// Peaks closer than this in frequency are merged.
pub const MERGE_TOL: f64 = 1e-9;
/// Default absolute tolerance for integrals over analytic spectra.
pub const QUAD_TOL: f64 = 1e-9;
/// `|phi|` above this certifies an entangling evolution.
pub const WITNESS_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("environment state does not commute with H_E (|[R, H_E]| = {0:.3e}); use the time-domain functions")]
    NonStationary(f64),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("witness hypothesis violated: {0}")]
    Hypothesis(String),
}

pub type Result<T, E = SpectralError> = std::result::Result<T, E>;

/// `H_E`, `V` and `R(0)` expressed in the eigenbasis of `H_E`.
#[derive(Debug, Clone)]
pub struct EnvironmentOperators {
    energies: Vec<f64>,
    v: CMatrix,
    r: CMatrix,
}

impl EnvironmentOperators {
    pub fn new(h_e: &Hermitian, v: &Hermitian, r0: &EnvDensity) -> Result<Self> {
        let n = h_e.dim();
        if v.dim() != n || r0.dim() != n {
            return Err(LinalgError::DimensionMismatch(format!(
                "H_E is {n}x{n}, V is {0}x{0}, R0 is {1}x{1}",
                v.dim(),
                r0.dim()
            ))
            .into());
        }
        let eig = eig_hermitian(h_e)?;
        let u = eig.vectors.matrix();
        Ok(Self { v: u.adjoint() * v.matrix() * u, r: u.adjoint() * r0.matrix() * u, energies: eig.values })
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Largest Bohr frequency.
    pub fn bandwidth(&self) -> f64 {
        self.energies.last().unwrap_or(&0.0) - self.energies.first().unwrap_or(&0.0)
    }

    /// Heisenberg-picture `V(t) = e^{i H_E t} V e^{-i H_E t}` in the eigenbasis.
    fn heisenberg(&self, t: f64) -> CMatrix {
        let e = &self.energies;
        CMatrix::from_fn(self.dim(), self.dim(), |n, m| self.v[(n, m)] * C64::from_polar(1.0, (e[n] - e[m]) * t))
    }

    fn ordered_products(&self, t1: f64, t2: f64) -> (C64, C64) {
        let (a, b) = (self.heisenberg(t1), self.heisenberg(t2));
        ((&self.r * &a * &b).trace(), (&self.r * &b * &a).trace())
    }

    /// `C(t1, t2) = Tr R(0) {V(t1), V(t2)}`.
    pub fn correlation(&self, t1: f64, t2: f64) -> C64 {
        let (ab, ba) = self.ordered_products(t1, t2);
        ab + ba
    }

    /// `K(t1, t2) = -i theta(t1 - t2) Tr R(0) [V(t1), V(t2)]`.
    pub fn response(&self, t1: f64, t2: f64) -> f64 {
        if t1 < t2 {
            return 0.0;
        }
        let (ab, ba) = self.ordered_products(t1, t2);
        (C64::new(0.0, -1.0) * (ab - ba)).re
    }

    /// `|[R(0), H_E]|`.
    pub fn stationarity_deviation(&self) -> f64 {
        let e = &self.energies;
        let n = self.dim();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += (self.r[(i, j)] * (e[j] - e[i])).norm_sqr();
            }
        }
        s.sqrt()
    }

    pub fn is_stationary(&self) -> bool {
        let scale = self.bandwidth().max(self.energies.iter().fold(0.0f64, |m, x| m.max(x.abs())));
        self.stationarity_deviation() < 1e-10 * (scale * (self.dim() as f64).sqrt() + 1.0)
    }
}

pub fn correlation(h_e: &Hermitian, v: &Hermitian, r0: &EnvDensity, t1: f64, t2: f64) -> Result<C64> {
    Ok(EnvironmentOperators::new(h_e, v, r0)?.correlation(t1, t2))
}

pub fn response(h_e: &Hermitian, v: &Hermitian, r0: &EnvDensity, t1: f64, t2: f64) -> Result<f64> {
    Ok(EnvironmentOperators::new(h_e, v, r0)?.response(t1, t2))
}

/// `+1` on `[0, tau)`, `-1` on `(tau, 2 tau]`, `0` at `t = tau` and outside.
pub fn echo_filter(t: f64, tau: f64) -> f64 {
    if t < 0.0 || t > 2.0 * tau || t == tau {
        0.0
    } else if t < tau {
        1.0
    } else {
        -1.0
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0 + x.powi(4) / 120.0
    } else {
        x.sin() / x
    }
}

/// `4 sin^4(w tau/2) / w^2`, zero at `w = 0`.
pub fn chi_kernel(omega: f64, tau: f64) -> f64 {
    let x = omega * tau / 2.0;
    tau * tau * x * x * sinc(x).powi(4)
}

/// `4 sin^3(w tau/2) cos(w tau/2) / w^2`, zero at `w = 0`.
pub fn phi_kernel(omega: f64, tau: f64) -> f64 {
    let x = omega * tau / 2.0;
    tau * tau * x * sinc(x).powi(3) * x.cos()
}

/// `tanh(beta w/2)` with `beta = inf` giving `sign(w)`.
fn thermal_factor(omega: f64, beta: f64) -> f64 {
    if beta.is_infinite() {
        omega.signum() * f64::from(omega != 0.0)
    } else {
        (beta * omega / 2.0).tanh()
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_nan() || beta < 0.0 {
        return Err(SpectralError::InvalidParameter(format!("beta must be nonnegative, got {beta}")));
    }
    Ok(())
}

/// One line of a discrete spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BohrPeak {
    pub omega: f64,
    /// Weight in `C(dt) = sum_k weight_k e^{-i w_k dt}`; nonnegative.
    pub weight: f64,
    /// Weight in `K(dt) = -sum_k response_k sin(w_k dt)`; odd in `w`.
    pub response: f64,
}

/// `S(w) = sum_k 2 pi weight_k delta(w - w_k)`, peaks sorted by frequency.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BohrSpectrum {
    pub peaks: Vec<BohrPeak>,
}

impl BohrSpectrum {
    /// Peaks given directly; responses are zero (infinite temperature).
    pub fn from_peaks(peaks: &[(f64, f64)]) -> Result<Self> {
        if let Some(&(w, s)) = peaks.iter().find(|(w, s)| !(w.is_finite() && s.is_finite() && *s >= 0.0)) {
            return Err(SpectralError::InvalidParameter(format!("peak ({w}, {s}) needs finite frequency and weight >= 0")));
        }
        Ok(Self::merged(peaks.iter().map(|&(omega, weight)| BohrPeak { omega, weight, response: 0.0 }).collect()))
    }

    fn merged(mut raw: Vec<BohrPeak>) -> Self {
        raw.sort_by(|a, b| a.omega.total_cmp(&b.omega));
        let mut peaks: Vec<BohrPeak> = Vec::with_capacity(raw.len());
        for p in raw {
            match peaks.last_mut() {
                Some(last) if (p.omega - last.omega).abs() < MERGE_TOL => {
                    let w = last.weight + p.weight;
                    if w > 0.0 {
                        last.omega = (last.omega * last.weight + p.omega * p.weight) / w;
                    }
                    last.weight = w;
                    last.response += p.response;
                }
                _ => peaks.push(p),
            }
        }
        Self { peaks }
    }

    pub fn total_weight(&self) -> f64 {
        self.peaks.iter().map(|p| p.weight).sum()
    }

    pub fn correlation(&self, dt: f64) -> C64 {
        self.peaks.iter().map(|p| p.weight * C64::from_polar(1.0, -p.omega * dt)).sum()
    }

    pub fn response(&self, dt: f64) -> f64 {
        if dt < 0.0 {
            return 0.0;
        }
        -self.peaks.iter().map(|p| p.response * (p.omega * dt).sin()).sum::<f64>()
    }

    pub fn chi_echo(&self, tau: f64) -> f64 {
        self.peaks.iter().map(|p| p.weight * chi_kernel(p.omega, tau)).sum()
    }

    /// Phase term assuming a thermal state at `beta`.
    pub fn phi_echo(&self, tau: f64, beta: f64) -> Result<f64> {
        check_beta(beta)?;
        Ok(self.peaks.iter().map(|p| p.weight * thermal_factor(p.omega, beta) * phi_kernel(p.omega, tau)).sum())
    }

    /// Phase term from the recorded response weights; valid for any
    /// stationary state.
    pub fn phi_echo_stationary(&self, tau: f64) -> f64 {
        self.peaks.iter().map(|p| p.response * phi_kernel(p.omega, tau)).sum()
    }
}

/// Discrete spectrum of `V` in the stationary state `R(0)`.
pub fn bohr_spectrum(h_e: &Hermitian, v: &Hermitian, r0: &EnvDensity) -> Result<BohrSpectrum> {
    EnvironmentOperators::new(h_e, v, r0)?.bohr_spectrum()
}

impl EnvironmentOperators {
    pub fn bohr_spectrum(&self) -> Result<BohrSpectrum> {
        if !self.is_stationary() {
            return Err(SpectralError::NonStationary(self.stationarity_deviation()));
        }
        let n = self.dim();
        let e = &self.energies;
        let degenerate = |i: usize, j: usize| (e[i] - e[j]).abs() < MERGE_TOL;
        // a[n][m] = sum_{k ~ n} R_kn V_nm V_mk: the e^{i(E_n - E_m) t1} term
        // of Tr R V(t1) V(t2)
        let mut raw = Vec::with_capacity(2 * n * n);
        for i in 0..n {
            for j in 0..n {
                let a: C64 = (0..n).filter(|&k| degenerate(k, i)).map(|k| self.r[(k, i)] * self.v[(i, j)] * self.v[(j, k)]).sum();
                let a = a.re;
                raw.push(BohrPeak { omega: e[j] - e[i], weight: a, response: a });
                raw.push(BohrPeak { omega: e[i] - e[j], weight: a, response: -a });
            }
        }
        let mut s = BohrSpectrum::merged(raw);
        let scale = s.peaks.iter().map(|p| p.weight.abs()).fold(0.0, f64::max);
        s.peaks.retain(|p| p.weight.abs() > 1e-14 * scale || p.response.abs() > 1e-14 * scale);
        for p in &mut s.peaks {
            p.weight = p.weight.max(0.0);
        }
        Ok(s)
    }
}

/// Continuous noise spectra, all even in `w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnalyticPsd {
    /// `alpha |w| exp(-|w| / cutoff)`.
    Ohmic { alpha: f64, cutoff: f64 },
    /// `2 amplitude width / (w^2 + width^2)`, i.e. `C(dt) = amplitude e^{-width |dt|}`.
    Lorentzian { amplitude: f64, width: f64 },
    /// `amplitude / |w|` for `low <= |w| <= high`, zero elsewhere.
    OneOverF { amplitude: f64, low: f64, high: f64 },
}

impl AnalyticPsd {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Ohmic { alpha, cutoff } => alpha >= 0.0 && cutoff > 0.0 && cutoff.is_finite(),
            Self::Lorentzian { amplitude, width } => amplitude >= 0.0 && width > 0.0 && amplitude.is_finite(),
            Self::OneOverF { amplitude, low, high } => amplitude >= 0.0 && low > 0.0 && high > low && high.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(SpectralError::InvalidParameter(format!("invalid spectrum parameters {self:?}")))
        }
    }

    pub fn density(&self, omega: f64) -> f64 {
        self.density_on_panel(omega, omega.abs())
    }

    /// Density with the band membership of `1/f` decided at `mid`, so that
    /// a panel ending on a band edge sees a continuous integrand.
    fn density_on_panel(&self, omega: f64, mid: f64) -> f64 {
        let w = omega.abs();
        match *self {
            Self::Ohmic { alpha, cutoff } => alpha * w * (-w / cutoff).exp(),
            Self::Lorentzian { amplitude, width } => 2.0 * amplitude * width / (w * w + width * width),
            Self::OneOverF { amplitude, low, high } => {
                if (low..=high).contains(&mid) {
                    amplitude / w
                } else {
                    0.0
                }
            }
        }
    }

    /// Integration breakpoints on `w >= 0` and the upper cutoff.
    fn support(&self, tau: f64, tol: f64) -> Vec<f64> {
        let top = match *self {
            Self::Ohmic { cutoff, .. } => 60.0 * cutoff,
            // both kernels are bounded by 4 / w^2, so the tail past W is
            // below 8 A width / (3 pi W^3)
            Self::Lorentzian { amplitude, width } => (80.0 * amplitude * width / (3.0 * PI * tol)).cbrt().max(10.0 * width),
            Self::OneOverF { high, .. } => high,
        };
        let mut cuts = vec![0.0];
        if let Self::OneOverF { low, .. } = *self {
            cuts.push(low);
        }
        // panels a quarter period of the kernel wide
        let period = 2.0 * PI / tau;
        let panels = ((top / (0.25 * period)).ceil() as usize).clamp(1, 200_000);
        for k in 1..panels {
            cuts.push(top * k as f64 / panels as f64);
        }
        cuts.push(top);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        cuts
    }

    /// `int_{-inf}^{inf} g(w) S(w) dw / 2 pi` for even `g S`.
    fn integrate_even(&self, tau: f64, tol: f64, g: impl Fn(f64) -> f64 + Sync) -> Result<f64> {
        self.validate()?;
        if !(tau > 0.0) || !(tol > 0.0) {
            return Err(SpectralError::InvalidParameter(format!("need tau > 0 and tol > 0, got {tau}, {tol}")));
        }
        let cuts = self.support(tau, tol);
        let per_panel = tol / cuts.len() as f64;
        let total = cuts
            .par_windows(2)
            .map(|ab| {
                let (a, b) = (ab[0], ab[1]);
                let mid = 0.5 * (a + b);
                adaptive_simpson(&|w: f64| g(w) * self.density_on_panel(w, mid), a, b, per_panel * PI)
            })
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .sum::<f64>();
        Ok(total / PI)
    }

    pub fn chi_echo(&self, tau: f64, tol: f64) -> Result<f64> {
        self.integrate_even(tau, tol, |w| chi_kernel(w, tau))
    }

    pub fn phi_echo(&self, tau: f64, beta: f64, tol: f64) -> Result<f64> {
        check_beta(beta)?;
        self.integrate_even(tau, tol, |w| phi_kernel(w, tau) * thermal_factor(w, beta))
    }
}

/// Either kind of noise spectrum.
#[derive(Debug, Clone, PartialEq)]
pub enum Psd {
    Bohr(BohrSpectrum),
    Analytic(AnalyticPsd),
}

impl Psd {
    pub fn chi_echo(&self, tau: f64) -> Result<f64> {
        match self {
            Psd::Bohr(s) => Ok(s.chi_echo(tau)),
            Psd::Analytic(s) => s.chi_echo(tau, QUAD_TOL),
        }
    }

    pub fn phi_echo(&self, tau: f64, beta: f64) -> Result<f64> {
        match self {
            Psd::Bohr(s) => s.phi_echo(tau, beta),
            Psd::Analytic(s) => s.phi_echo(tau, beta, QUAD_TOL),
        }
    }
}

/// Gauss-Legendre nodes per panel for the time-domain double integrals.
const TIME_NODES: usize = 16;

fn panels(bandwidth: f64, len: f64) -> usize {
    // at most two radians of the fastest oscillation per panel
    ((bandwidth * len / 2.0).ceil() as usize).max(1)
}

impl EnvironmentOperators {
    /// `int_a^b dt1 int_c^{min(t1, d)} dt2 g(t1, t2)` with `c <= a`.
    fn region(&self, gl: &GaussLegendre, (a, b): (f64, f64), (c, d): (f64, f64), g: &(impl Fn(f64, f64) -> f64 + Sync)) -> f64 {
        let outer: Vec<(f64, f64)> = gl.composite(a, b, panels(self.bandwidth(), b - a)).collect();
        outer
            .par_iter()
            .map(|&(t1, w1)| {
                let hi = t1.min(d);
                if hi <= c {
                    return 0.0;
                }
                w1 * gl.integrate(c, hi, panels(self.bandwidth(), hi - c), |t2| g(t1, t2))
            })
            .sum()
    }

    /// `1/2 int_{0 < t2 < t1 < 2 tau} f(t1) f(t2) g(t1, t2)` with the
    /// filter's sign pattern resolved into three smooth pieces.
    fn filtered(&self, tau: f64, both: bool, g: impl Fn(f64, f64) -> f64 + Sync) -> f64 {
        let gl = GaussLegendre::new(TIME_NODES);
        let early = self.region(&gl, (0.0, tau), (0.0, tau), &g);
        let cross = self.region(&gl, (tau, 2.0 * tau), (0.0, tau), &g);
        let late = self.region(&gl, (tau, 2.0 * tau), (tau, 2.0 * tau), &g);
        if both {
            0.5 * (early - cross + late)
        } else {
            0.5 * (early - cross - late)
        }
    }

    /// Attenuation from the double time integral of `C`; no stationarity needed.
    pub fn chi_time_domain(&self, tau: f64) -> f64 {
        self.filtered(tau, true, |t1, t2| self.correlation(t1, t2).re)
    }

    /// Phase term from the double time integral of `K`.
    pub fn phi_time_domain(&self, tau: f64) -> f64 {
        self.filtered(tau, false, |t1, t2| self.response(t1, t2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecondOrderResult {
    pub chi: f64,
    pub phi: f64,
    pub lambda: f64,
    pub eta: f64,
    #[serde(serialize_with = "ser_complex")]
    pub w_approx: C64,
}

fn ser_complex<S: serde::Serializer>(z: &C64, s: S) -> std::result::Result<S::Ok, S::Error> {
    [z.re, z.im].serialize(s)
}

impl SecondOrderResult {
    /// `exp(-lambda^2 chi)`, the magnitude for Gaussian noise.
    pub fn gaussian_magnitude(&self) -> f64 {
        (-self.lambda * self.lambda * self.chi).exp()
    }
}

/// `W(2 tau) ~ 1 - lambda^2 chi - i eta lambda^2 phi`.
pub fn second_order_w(lambda: f64, eta: f64, chi: f64, phi: f64) -> Result<SecondOrderResult> {
    if chi < -1e-12 || !chi.is_finite() || !phi.is_finite() {
        return Err(SpectralError::InvalidParameter(format!("need finite chi >= 0 and phi, got {chi}, {phi}")));
    }
    let l2 = lambda * lambda;
    Ok(SecondOrderResult { chi, phi, lambda, eta, w_approx: C64::new(1.0 - l2 * chi, -eta * l2 * phi) })
}

/// Couplings written as `V_0 = (eta + 1) V / 2`, `V_1 = (eta - 1) V / 2`
/// with `lambda = 1`, i.e. `V = V_0 - V_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasedForm {
    pub v: Hermitian,
    pub eta: f64,
}

impl BiasedForm {
    pub fn from_model(model: &PureDephasingModel) -> Result<Self> {
        let v0 = model.coupling(Branch::Zero).matrix();
        let v1 = model.coupling(Branch::One).matrix();
        let v = v0 - v1;
        let vv = v.norm_squared();
        let scale = v0.norm().max(v1.norm()).max(1.0);
        if vv.sqrt() < 1e-12 * scale {
            return Err(SpectralError::InvalidParameter("V0 = V1: the qubit does not dephase".into()));
        }
        let sum = v0 + v1;
        let eta = v.iter().zip(sum.iter()).map(|(a, b)| (a.conj() * b).re).sum::<f64>() / vv;
        let residual = max_abs(&(&sum - &v * C64::new(eta, 0.0)));
        if residual > 1e-10 * scale {
            return Err(SpectralError::InvalidParameter(format!(
                "V0 and V1 are not proportional to a common operator (residual {residual:.3e})"
            )));
        }
        Ok(Self { v: Hermitian::new(v)?, eta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WitnessVerdict {
    CertifiedEntangling,
    NotCertified,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessReport {
    pub verdict: WitnessVerdict,
    /// `(tau, phi(2 tau))` per grid point.
    pub phi: Vec<(f64, f64)>,
    pub max_abs_phi: f64,
    pub threshold: f64,
    /// `|[V_1, R(0)]|`; nonzero exactly when the evolution can entangle.
    pub comm_v1_r0: f64,
    /// Certification agrees with `[V_1, R(0)] != 0`.
    pub consistent: bool,
}

/// Echo phase-shift witness for a model with `V_0 = 0` and a stationary
/// environment. Such a model is the biased coupling with `eta = -1`; the
/// phase term is quadratic in the coupling, so the sign of `V = -V_1` is
/// irrelevant. A nonzero phase term certifies qubit-environment
/// entanglement.
pub fn witness(model: &PureDephasingModel, r0: &EnvDensity, grid: &[f64], threshold: Option<f64>) -> Result<WitnessReport> {
    let v0 = model.coupling(Branch::Zero);
    let v1 = model.coupling(Branch::One);
    let scale = max_abs(v1.matrix()).max(1.0);
    if max_abs(v0.matrix()) > 1e-12 * scale {
        return Err(SpectralError::Hypothesis(format!(
            "V0 must vanish (max |V0| = {:.3e}); the witness is derived for a qubit coupled only in |1>",
            max_abs(v0.matrix())
        )));
    }
    let ops = EnvironmentOperators::new(model.h_e(), v1, r0)?;
    if !ops.is_stationary() {
        return Err(SpectralError::Hypothesis(format!(
            "R0 must commute with H_E (|[R0, H_E]| = {:.3e}); the witness assumes a stationary environment",
            ops.stationarity_deviation()
        )));
    }
    if grid.is_empty() || grid.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
        return Err(SpectralError::InvalidParameter("witness grid must be nonempty with positive delays".into()));
    }
    let threshold = threshold.unwrap_or(WITNESS_THRESHOLD);
    let phi: Vec<(f64, f64)> = grid.iter().map(|&tau| (tau, ops.phi_time_domain(tau))).collect();
    let max_abs_phi = phi.iter().map(|(_, p)| p.abs()).fold(0.0, f64::max);
    let verdict = if max_abs_phi > threshold { WitnessVerdict::CertifiedEntangling } else { WitnessVerdict::NotCertified };
    let comm_v1_r0 = comm_norm(v1.matrix(), r0.matrix())?;
    let noncommuting = comm_v1_r0 > commutator_tolerance(v1.matrix(), r0.matrix());
    // a nonzero phase term is impossible when [V1, R0] = 0
    let consistent = verdict == WitnessVerdict::NotCertified || noncommuting;
    Ok(WitnessReport { verdict, phi, max_abs_phi, threshold, comm_v1_r0, consistent })
}
