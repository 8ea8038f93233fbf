//! Separability of the pre-pulse and echoed states, negativity, pure-state
//! entanglement entropy and scans over the echo delay.
//!
//! The joint state at `tau` is separable iff `[w_0^dagger w_1, R(0)] = 0`;
//! the echoed state at `2 tau` is separable iff
//! `[w_0^dagger w_1^dagger w_0 w_1, R(0)] = 0`.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dynamics::{self, Amplitudes, DynamicsError, JointState, QubitState};
use crate::linalg::{comm_norm, commutator_tolerance, hermitian_spectrum, partial_transpose, CMatrix, LinalgError, Subsystem, C64};
use crate::model::{Branch, EnvDensity, EnvKind, ModelError, PropagatorPair, PSD_TOL};

/// Negativity below this is separable.
pub const NEGATIVITY_SEPARABLE: f64 = 1e-10;
/// Negativity above this is entangled; values in between are inconclusive.
pub const NEGATIVITY_ENTANGLED: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EntanglementError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("tau grid is empty")]
    EmptyGrid,
    #[error("tau grid must be finite and strictly increasing (index {0})")]
    NonMonotoneGrid(usize),
    #[error("reduced state has eigenvalue {0:.3e}")]
    NotPositive(f64),
    #[error("invalid refinement: {0}")]
    InvalidRefinement(String),
}

impl From<LinalgError> for EntanglementError {
    fn from(e: LinalgError) -> Self {
        Self::Dynamics(e.into())
    }
}

impl From<ModelError> for EntanglementError {
    fn from(e: ModelError) -> Self {
        Self::Dynamics(e.into())
    }
}

pub type Result<T, E = EntanglementError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeparabilityVerdict {
    pub commutator_norm: f64,
    pub separable: bool,
    pub tolerance: f64,
}

impl SeparabilityVerdict {
    fn decide(op: &CMatrix, r: &CMatrix, tol: Option<f64>) -> Result<Self> {
        let commutator_norm = comm_norm(op, r)?;
        let tolerance = tol.unwrap_or_else(|| commutator_tolerance(op, r));
        Ok(Self { commutator_norm, separable: commutator_norm < tolerance, tolerance })
    }
}

/// `w_0^dagger(tau) w_1(tau)`.
pub fn prepulse_operator(p: &PropagatorPair, tau: f64) -> Result<CMatrix> {
    let (w0, w1) = p.pair(tau)?;
    Ok(w0.matrix().adjoint() * w1.matrix())
}

/// `w_0^dagger w_1^dagger w_0 w_1`, all at `tau`.
pub fn echo_operator(p: &PropagatorPair, tau: f64) -> Result<CMatrix> {
    let (w0, w1) = p.pair(tau)?;
    let (w0, w1) = (w0.matrix(), w1.matrix());
    Ok(w0.adjoint() * w1.adjoint() * w0 * w1)
}

fn check_dims(p: &PropagatorPair, r0: &EnvDensity) -> Result<()> {
    if p.env_dim() != r0.dim() {
        return Err(DynamicsError::EnvMismatch { expected: p.env_dim(), found: r0.dim() }.into());
    }
    Ok(())
}

/// Separability of `sigma(tau)`. `tol` defaults to the scale-aware
/// commutator tolerance.
pub fn prepulse_separability(p: &PropagatorPair, r0: &EnvDensity, tau: f64, tol: Option<f64>) -> Result<SeparabilityVerdict> {
    check_dims(p, r0)?;
    SeparabilityVerdict::decide(&prepulse_operator(p, tau)?, r0.matrix(), tol)
}

/// Separability of the echoed state `sigma(2 tau)`.
pub fn echoed_separability(p: &PropagatorPair, r0: &EnvDensity, tau: f64, tol: Option<f64>) -> Result<SeparabilityVerdict> {
    check_dims(p, r0)?;
    SeparabilityVerdict::decide(&echo_operator(p, tau)?, r0.matrix(), tol)
}

/// Sum of the magnitudes of the negative eigenvalues of the partial
/// transpose over the qubit.
pub fn negativity(s: &JointState) -> Result<f64> {
    let pt = partial_transpose(s.matrix(), (2, s.env_dim()), Subsystem::A)?;
    Ok(hermitian_spectrum(&pt)?.iter().filter(|&&x| x < 0.0).map(|x| -x).sum::<f64>() + 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NegativityClass {
    Separable,
    Inconclusive,
    Entangled,
}

impl NegativityClass {
    pub fn of(negativity: f64) -> Self {
        if negativity < NEGATIVITY_SEPARABLE {
            Self::Separable
        } else if negativity > NEGATIVITY_ENTANGLED {
            Self::Entangled
        } else {
            Self::Inconclusive
        }
    }
}

/// Comparison of a commutator verdict with the negativity class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Agreement {
    Agree,
    Disagree,
    Inconclusive,
}

pub fn agreement(verdict: &SeparabilityVerdict, negativity: f64) -> Agreement {
    match (NegativityClass::of(negativity), verdict.separable) {
        (NegativityClass::Inconclusive, _) => Agreement::Inconclusive,
        (NegativityClass::Separable, true) | (NegativityClass::Entangled, false) => Agreement::Agree,
        _ => Agreement::Disagree,
    }
}

/// `R_ii(t) = w_i(t) R(0) w_i^dagger(t)`.
pub fn conditional_env_state(p: &PropagatorPair, r0: &EnvDensity, branch: Branch, t: f64) -> Result<EnvDensity> {
    check_dims(p, r0)?;
    let w = p.propagator(branch, t)?;
    let r = w.matrix() * r0.matrix() * w.matrix().adjoint();
    Ok(EnvDensity::new(r, EnvKind::General)?)
}

fn binary_entropy(lo: f64) -> f64 {
    let h = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    h(lo) + h(1.0 - lo)
}

/// Von Neumann entropy (base 2) of the reduced qubit state. Meaningful as
/// an entanglement measure only when the joint state is pure.
pub fn pure_entanglement_entropy(rho: &QubitState) -> Result<f64> {
    let [lo, _] = rho.eigenvalues();
    if lo < PSD_TOL {
        return Err(EntanglementError::NotPositive(lo));
    }
    Ok(binary_entropy(lo.clamp(0.0, 0.5)).clamp(0.0, 1.0))
}

/// Entropy from the coherence alone, with reduced-state eigenvalues
/// `(1 +- sqrt(D))/2`, `D = 1 - 4|a|^2|b|^2 (1 - |W|^2)`.
pub fn entropy_closed_form(population_product: f64, w_abs: f64) -> f64 {
    let d = (1.0 - 4.0 * population_product * (1.0 - w_abs * w_abs)).clamp(0.0, 1.0);
    binary_entropy((1.0 - d.sqrt()) / 2.0)
}

/// Everything recorded at one echo delay.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EchoRecord {
    pub tau: f64,
    #[serde(serialize_with = "ser_complex")]
    pub w_pre: C64,
    #[serde(serialize_with = "ser_complex")]
    pub w_echo: C64,
    pub verdict_pre: SeparabilityVerdict,
    pub verdict_echo: SeparabilityVerdict,
    pub negativity_pre: f64,
    pub negativity_echo: f64,
    /// Present only for a pure environment state.
    pub entropy_pre: Option<f64>,
    pub entropy_echo: Option<f64>,
}

fn ser_complex<S: serde::Serializer>(z: &C64, s: S) -> std::result::Result<S::Ok, S::Error> {
    [z.re, z.im].serialize(s)
}

impl EchoRecord {
    /// Separable before the pulse, entangled after the echo.
    pub fn echo_induced(&self) -> bool {
        self.verdict_pre.separable && !self.verdict_echo.separable
    }
}

pub fn echo_record(p: &PropagatorPair, amps: Amplitudes, r0: &EnvDensity, tau: f64, tol: Option<f64>) -> Result<EchoRecord> {
    let pre = dynamics::joint_state(p, amps, r0, tau)?;
    let echo = dynamics::echoed_joint_state(p, amps, r0, tau)?;
    let (entropy_pre, entropy_echo) = if r0.is_pure() {
        (
            Some(pure_entanglement_entropy(&pre.reduced_qubit()?)?),
            Some(pure_entanglement_entropy(&echo.reduced_qubit()?)?),
        )
    } else {
        (None, None)
    };
    Ok(EchoRecord {
        tau,
        w_pre: dynamics::coherence(p, r0, tau)?,
        w_echo: dynamics::echoed_coherence(p, r0, tau)?,
        verdict_pre: prepulse_separability(p, r0, tau, tol)?,
        verdict_echo: echoed_separability(p, r0, tau, tol)?,
        negativity_pre: negativity(&pre)?,
        negativity_echo: negativity(&echo)?,
        entropy_pre,
        entropy_echo,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ScanSummary {
    pub points: usize,
    pub echo_induced_indices: Vec<usize>,
    pub echo_induced_taus: Vec<f64>,
    pub separable_pre: usize,
    pub separable_echo: usize,
    pub entangled_pre: usize,
    pub entangled_echo: usize,
    /// Negativity inside the dead band, counted per state.
    pub inconclusive: usize,
    /// Commutator verdict and negativity class disagree, counted per state.
    pub disagreements: usize,
}

impl ScanSummary {
    fn add(mut self, (i, r): (usize, &EchoRecord)) -> Self {
        self.points += 1;
        if r.echo_induced() {
            self.echo_induced_indices.push(i);
            self.echo_induced_taus.push(r.tau);
        }
        for (v, neg) in [(&r.verdict_pre, r.negativity_pre), (&r.verdict_echo, r.negativity_echo)] {
            match agreement(v, neg) {
                Agreement::Agree => {}
                Agreement::Disagree => self.disagreements += 1,
                Agreement::Inconclusive => self.inconclusive += 1,
            }
        }
        let count = |v: &SeparabilityVerdict, sep: &mut usize, ent: &mut usize| {
            if v.separable {
                *sep += 1
            } else {
                *ent += 1
            }
        };
        count(&r.verdict_pre, &mut self.separable_pre, &mut self.entangled_pre);
        count(&r.verdict_echo, &mut self.separable_echo, &mut self.entangled_echo);
        self
    }

    /// Fraction of evaluated states whose negativity fell in the dead band.
    pub fn inconclusive_fraction(&self) -> f64 {
        if self.points == 0 {
            0.0
        } else {
            self.inconclusive as f64 / (2 * self.points) as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanReport {
    pub records: Vec<EchoRecord>,
    pub summary: ScanSummary,
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(EntanglementError::EmptyGrid);
    }
    for (i, t) in grid.iter().enumerate() {
        if !t.is_finite() || (i > 0 && !(*t > grid[i - 1])) {
            return Err(EntanglementError::NonMonotoneGrid(i));
        }
    }
    Ok(())
}

/// One record per grid point, computed in parallel.
pub fn classify_scan(
    p: &PropagatorPair,
    amps: Amplitudes,
    r0: &EnvDensity,
    grid: &[f64],
    tol: Option<f64>,
) -> Result<ScanReport> {
    check_grid(grid)?;
    check_dims(p, r0)?;
    let records = grid.par_iter().map(|&tau| echo_record(p, amps, r0, tau, tol)).collect::<Result<Vec<_>>>()?;
    let summary = records.iter().enumerate().fold(ScanSummary::default(), ScanSummary::add);
    Ok(ScanReport { records, summary })
}

/// Only the two commutator verdicts at `tau`.
pub fn is_echo_induced(p: &PropagatorPair, r0: &EnvDensity, tau: f64, tol: Option<f64>) -> Result<bool> {
    Ok(prepulse_separability(p, r0, tau, tol)?.separable && !echoed_separability(p, r0, tau, tol)?.separable)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementLevel {
    pub points: usize,
    pub step: f64,
    pub flagged: usize,
    pub fraction: f64,
    /// Longest run of consecutive flagged grid points.
    pub max_run: usize,
}

/// Echo-induced fractions on uniform grids over `interval`, starting from
/// `base_points` and halving the spacing at each of `levels` levels.
pub fn isolation_refinement(
    p: &PropagatorPair,
    r0: &EnvDensity,
    interval: (f64, f64),
    base_points: usize,
    levels: usize,
    tol: Option<f64>,
) -> Result<Vec<RefinementLevel>> {
    let (lo, hi) = interval;
    if levels < 2 || base_points < 2 || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(EntanglementError::InvalidRefinement(format!(
            "need levels >= 2, base_points >= 2 and a nonempty interval, got {levels}, {base_points}, [{lo}, {hi}]"
        )));
    }
    check_dims(p, r0)?;
    let mut points = base_points;
    let mut out = Vec::with_capacity(levels);
    for _ in 0..levels {
        let step = (hi - lo) / (points - 1) as f64;
        let flags = (0..points)
            .into_par_iter()
            .map(|i| is_echo_induced(p, r0, lo + (hi - lo) * i as f64 / (points - 1) as f64, tol))
            .collect::<Result<Vec<_>>>()?;
        let flagged = flags.iter().filter(|&&f| f).count();
        let max_run = flags
            .iter()
            .scan(0usize, |run, &f| {
                *run = if f { *run + 1 } else { 0 };
                Some(*run)
            })
            .max()
            .unwrap_or(0);
        out.push(RefinementLevel { points, step, flagged, fraction: flagged as f64 / points as f64, max_run });
        points = 2 * points - 1;
    }
    Ok(out)
}

/// Locate a local minimum of the pre-pulse commutator norm in `[lo, hi]`
/// by golden-section search. Returns `(tau, norm)`.
pub fn polish_separable_instant(p: &PropagatorPair, r0: &EnvDensity, lo: f64, hi: f64, xtol: f64) -> Result<(f64, f64)> {
    check_dims(p, r0)?;
    let f = |t: f64| -> Result<f64> { Ok(comm_norm(&prepulse_operator(p, t)?, r0.matrix())?) };
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (b - a).abs() > xtol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    let t = (a + b) / 2.0;
    Ok((t, f(t)?))
}
