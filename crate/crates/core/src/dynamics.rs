//! Joint and reduced states with and without the echo pulse.
//!
//! The joint density matrix is stored in the `2N x 2N` product space with
//! the qubit as the slow index: block `(i, j)` is
//! `c_i c_j^* w_i R(0) w_j^dagger` where `(c_0, c_1) = (a, b)`.
//!
//! The echo sequence is free evolution for `tau`, a `sigma_x` pulse, free
//! evolution for `tau`, and a second `sigma_x` pulse. Its propagator is block
//! diagonal again with `w_0' = w_1 w_0` and `w_1' = w_0 w_1`.

use thiserror::Error;

use crate::linalg::{self, hermiticity_deviation, partial_trace, CMatrix, Hermitian, LinalgError, Subsystem, C64};
use crate::model::{EnvDensity, ModelError, PropagatorPair, PSD_TOL, TRACE_TOL};

/// Tolerance on `|a|^2 + |b|^2 = 1`.
pub const AMPLITUDE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("qubit amplitudes are not normalized: |a|^2 + |b|^2 = {0}")]
    Unnormalized(f64),
    #[error("environment state is {found}-dimensional, propagators act on {expected} levels")]
    EnvMismatch { expected: usize, found: usize },
    #[error("invalid state: {0}")]
    InvalidState(String),
}

pub type Result<T, E = DynamicsError> = std::result::Result<T, E>;

/// Initial qubit state `a|0> + b|1>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Amplitudes {
    a: C64,
    b: C64,
}

impl Amplitudes {
    pub fn new(a: C64, b: C64) -> Result<Self> {
        let n = a.norm_sqr() + b.norm_sqr();
        if !n.is_finite() || (n - 1.0).abs() > AMPLITUDE_TOL {
            return Err(DynamicsError::Unnormalized(n));
        }
        Ok(Self { a, b })
    }

    /// `a = b = 1/sqrt(2)`.
    pub fn equal() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self { a: C64::new(s, 0.0), b: C64::new(s, 0.0) }
    }

    pub fn a(&self) -> C64 {
        self.a
    }

    pub fn b(&self) -> C64 {
        self.b
    }

    /// `|a|^2 |b|^2`.
    pub fn population_product(&self) -> f64 {
        self.a.norm_sqr() * self.b.norm_sqr()
    }

    fn coeffs(&self) -> [C64; 2] {
        [self.a, self.b]
    }
}

/// Qubit-environment density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    s: CMatrix,
    env_dim: usize,
    amplitudes: Amplitudes,
}

impl JointState {
    pub fn matrix(&self) -> &CMatrix {
        &self.s
    }

    pub fn env_dim(&self) -> usize {
        self.env_dim
    }

    pub fn amplitudes(&self) -> Amplitudes {
        self.amplitudes
    }

    /// Environment block `(i, j)` in the qubit pointer basis.
    pub fn block(&self, i: usize, j: usize) -> CMatrix {
        let n = self.env_dim;
        self.s.view((i * n, j * n), (n, n)).into_owned()
    }

    pub fn reduced_qubit(&self) -> Result<QubitState> {
        QubitState::new(partial_trace(&self.s, (2, self.env_dim), Subsystem::B)?)
    }

    pub fn reduced_env(&self) -> Result<CMatrix> {
        Ok(partial_trace(&self.s, (2, self.env_dim), Subsystem::A)?)
    }

    /// Hermiticity, unit trace and positivity at the crate tolerances.
    pub fn check_invariants(&self) -> Result<()> {
        let dev = hermiticity_deviation(&self.s);
        if dev > 1e-12 {
            return Err(DynamicsError::InvalidState(format!("joint state not Hermitian ({dev:.3e})")));
        }
        let tr = linalg::trace(&self.s);
        if (tr - C64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(DynamicsError::InvalidState(format!("joint state trace {tr}")));
        }
        let min = linalg::hermitian_spectrum(&self.s)?[0];
        if min < PSD_TOL {
            return Err(DynamicsError::InvalidState(format!("joint state eigenvalue {min:.3e}")));
        }
        Ok(())
    }
}

/// Reduced 2x2 qubit density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitState {
    rho: CMatrix,
}

impl QubitState {
    pub fn new(rho: CMatrix) -> Result<Self> {
        if rho.shape() != (2, 2) {
            return Err(DynamicsError::InvalidState(format!("qubit state must be 2x2, got {:?}", rho.shape())));
        }
        let h = Hermitian::new(rho)?;
        let tr = linalg::trace(h.matrix());
        if (tr - C64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(DynamicsError::InvalidState(format!("qubit trace {tr}")));
        }
        Ok(Self { rho: h.into_inner() })
    }

    /// `[[|a|^2, a b^* W], [a^* b W^*, |b|^2]]`.
    pub fn from_coherence(amps: Amplitudes, w: C64) -> Result<Self> {
        let (a, b) = (amps.a, amps.b);
        let off = a * b.conj() * w;
        Self::new(CMatrix::from_row_slice(2, 2, &[C64::new(a.norm_sqr(), 0.0), off, off.conj(), C64::new(b.norm_sqr(), 0.0)]))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.rho
    }

    /// Normalized coherence `rho_01 / (a b^*)`; `None` when `a b = 0`.
    pub fn coherence(&self, amps: Amplitudes) -> Option<C64> {
        let ab = amps.a * amps.b.conj();
        (ab.norm() > 0.0).then(|| self.rho[(0, 1)] / ab)
    }

    /// Eigenvalues, ascending, from the 2x2 trace and discriminant.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let tr = self.rho[(0, 0)].re + self.rho[(1, 1)].re;
        let d = (self.rho[(0, 0)].re - self.rho[(1, 1)].re).hypot(2.0 * self.rho[(0, 1)].norm());
        [(tr - d) / 2.0, (tr + d) / 2.0]
    }
}

fn check_env(p: &PropagatorPair, r0: &EnvDensity) -> Result<()> {
    if p.env_dim() != r0.dim() {
        return Err(DynamicsError::EnvMismatch { expected: p.env_dim(), found: r0.dim() });
    }
    Ok(())
}

/// Joint state generated by the block-diagonal propagator `diag(w0, w1)`
/// from `|psi><psi| (x) R(0)`.
pub fn evolve_product(w: [&CMatrix; 2], amps: Amplitudes, r0: &EnvDensity) -> JointState {
    let n = r0.dim();
    let c = amps.coeffs();
    let r = r0.matrix();
    let mut s = CMatrix::zeros(2 * n, 2 * n);
    for i in 0..2 {
        for j in 0..2 {
            let block = (w[i] * r * w[j].adjoint()) * (c[i] * c[j].conj());
            s.view_mut((i * n, j * n), (n, n)).copy_from(&block);
        }
    }
    JointState { s, env_dim: n, amplitudes: amps }
}

/// `sigma(t)` without any pulse.
pub fn joint_state(p: &PropagatorPair, amps: Amplitudes, r0: &EnvDensity, t: f64) -> Result<JointState> {
    check_env(p, r0)?;
    let (w0, w1) = p.pair(t)?;
    Ok(evolve_product([w0.matrix(), w1.matrix()], amps, r0))
}

/// `W(t) = Tr[R(0) w_1^dagger(t) w_0(t)]`.
pub fn coherence(p: &PropagatorPair, r0: &EnvDensity, t: f64) -> Result<C64> {
    check_env(p, r0)?;
    let (w0, w1) = p.pair(t)?;
    Ok((r0.matrix() * w1.matrix().adjoint() * w0.matrix()).trace())
}

/// Effective propagators of the full echo sequence, `(w_1 w_0, w_0 w_1)`.
pub fn echo_propagators(p: &PropagatorPair, tau: f64) -> Result<(CMatrix, CMatrix)> {
    let (w0, w1) = p.pair(tau)?;
    Ok((w1.matrix() * w0.matrix(), w0.matrix() * w1.matrix()))
}

/// `sigma(2 tau)` after both pulses.
pub fn echoed_joint_state(p: &PropagatorPair, amps: Amplitudes, r0: &EnvDensity, tau: f64) -> Result<JointState> {
    check_env(p, r0)?;
    let (e0, e1) = echo_propagators(p, tau)?;
    Ok(evolve_product([&e0, &e1], amps, r0))
}

/// `W(2 tau) = Tr[R(0) w_1^dagger w_0^dagger w_1 w_0]` with all propagators at `tau`.
pub fn echoed_coherence(p: &PropagatorPair, r0: &EnvDensity, tau: f64) -> Result<C64> {
    check_env(p, r0)?;
    let (w0, w1) = p.pair(tau)?;
    let (w0, w1) = (w0.matrix(), w1.matrix());
    Ok((r0.matrix() * w1.adjoint() * w0.adjoint() * w1 * w0).trace())
}
