//! Pure-dephasing Hamiltonians, environment states and conditional propagators.
//!
//! Units have hbar = 1, so every energy is an angular frequency. The qubit
//! couples to an `N`-level environment through
//! `H = sum_i eps_i |i><i| + H_E + |0><0| (x) V0 + |1><1| (x) V1`, and the
//! joint propagator is block diagonal with environment blocks
//! `w_i(t) = exp(-i eps_i t) exp(-i (H_E + V_i) t)`.

pub mod json;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::linalg::{
    self, comm_norm, eig_hermitian, max_abs, max_abs_diff, CMatrix, Hermitian, HermitianEigen, LinalgError, Unitary, C64,
};

/// Environment dimension cap.
pub const MAX_ENV_DIM: usize = 64;
/// Trace tolerance for density matrices.
pub const TRACE_TOL: f64 = 1e-12;
/// Smallest eigenvalue still accepted as positive semidefinite.
pub const PSD_TOL: f64 = -1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("environment dimension {0} outside 2..={MAX_ENV_DIM}")]
    EnvDimOutOfRange(usize),
    #[error("operator dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),
    #[error("inverse temperature must be >= 0, got {0}")]
    InvalidBeta(f64),
    #[error("invalid branch index {0}, expected 0 or 1")]
    InvalidBranch(u8),
    #[error("spectral projectors are not a complete orthonormal set (deviation {0:.3e})")]
    NotOrthonormal(f64),
    #[error("fixed-time propagator pair is only defined at t = {fixed}, requested t = {requested}")]
    FixedTime { fixed: f64, requested: f64 },
    #[error("time must be finite, got {0}")]
    NonFiniteTime(f64),
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;

/// Qubit pointer state selecting a conditional propagator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Zero,
    One,
}

impl Branch {
    pub fn index(self) -> usize {
        match self {
            Branch::Zero => 0,
            Branch::One => 1,
        }
    }
}

impl TryFrom<u8> for Branch {
    type Error = ModelError;

    fn try_from(value: u8) -> Result<Self> {
        match value {
            0 => Ok(Branch::Zero),
            1 => Ok(Branch::One),
            other => Err(ModelError::InvalidBranch(other)),
        }
    }
}

fn check_env_dim(n: usize) -> Result<()> {
    if (2..=MAX_ENV_DIM).contains(&n) {
        Ok(())
    } else {
        Err(ModelError::EnvDimOutOfRange(n))
    }
}

/// Qubit splittings plus the three environment operators.
#[derive(Debug, Clone, PartialEq)]
pub struct PureDephasingModel {
    epsilon: [f64; 2],
    h_e: Hermitian,
    v: [Hermitian; 2],
    rotating_frame: bool,
}

impl PureDephasingModel {
    pub fn new(epsilon: [f64; 2], h_e: Hermitian, v0: Hermitian, v1: Hermitian) -> Result<Self> {
        let n = h_e.dim();
        check_env_dim(n)?;
        if v0.dim() != n || v1.dim() != n {
            return Err(ModelError::DimensionMismatch(format!(
                "H_E is {n}x{n} but V0 is {0}x{0} and V1 is {1}x{1}",
                v0.dim(),
                v1.dim()
            )));
        }
        if !epsilon.iter().all(|e| e.is_finite()) {
            return Err(ModelError::DimensionMismatch("qubit energies must be finite".into()));
        }
        Ok(Self { epsilon, h_e, v: [v0, v1], rotating_frame: false })
    }

    /// Drop the free qubit phases `exp(-i eps_i t)` from the propagators.
    pub fn with_rotating_frame(mut self, on: bool) -> Self {
        self.rotating_frame = on;
        self
    }

    pub fn rotating_frame(&self) -> bool {
        self.rotating_frame
    }

    pub fn env_dim(&self) -> usize {
        self.h_e.dim()
    }

    /// Qubit energies as stored, independent of the rotating-frame flag.
    pub fn epsilon(&self) -> [f64; 2] {
        self.epsilon
    }

    /// Energies that actually enter the propagators.
    pub fn effective_epsilon(&self) -> [f64; 2] {
        if self.rotating_frame {
            [0.0, 0.0]
        } else {
            self.epsilon
        }
    }

    pub fn h_e(&self) -> &Hermitian {
        &self.h_e
    }

    pub fn coupling(&self, branch: Branch) -> &Hermitian {
        &self.v[branch.index()]
    }

    /// `H_E + V_i`.
    pub fn conditional_hamiltonian(&self, branch: Branch) -> Hermitian {
        self.h_e.add(self.coupling(branch)).expect("dimensions checked at construction")
    }

    /// Same model with both couplings multiplied by `lambda`.
    pub fn scale_couplings(&self, lambda: f64) -> Self {
        Self {
            epsilon: self.epsilon,
            h_e: self.h_e.clone(),
            v: [self.v[0].scale(lambda), self.v[1].scale(lambda)],
            rotating_frame: self.rotating_frame,
        }
    }

    pub fn with_epsilon(mut self, epsilon: [f64; 2]) -> Self {
        self.epsilon = epsilon;
        self
    }
}

/// How an environment state was constructed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnvKind {
    Pure,
    Diagonal,
    Thermal { beta: f64 },
    Random { seed: u64 },
    General,
}

/// Initial environment density matrix `R(0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvDensity {
    r: Hermitian,
    kind: EnvKind,
}

impl EnvDensity {
    /// Validate trace, Hermiticity and positivity.
    pub fn new(m: CMatrix, kind: EnvKind) -> Result<Self> {
        let r = Hermitian::new(m)?;
        check_env_dim(r.dim())?;
        let tr = linalg::trace(r.matrix());
        if (tr - C64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(ModelError::InvalidDensity(format!("trace is {tr}, expected 1")));
        }
        let min = eig_hermitian(&r)?.values[0];
        if min < PSD_TOL {
            return Err(ModelError::InvalidDensity(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(Self { r, kind })
    }

    /// `|psi><psi|` for a normalized state vector.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if (norm2 - 1.0).abs() > TRACE_TOL {
            return Err(ModelError::InvalidDensity(format!("state vector has squared norm {norm2}")));
        }
        let v = DVector::from_column_slice(psi);
        Self::new(&v * v.adjoint(), EnvKind::Pure)
    }

    pub fn diagonal(populations: &[f64]) -> Result<Self> {
        if populations.iter().any(|&p| !(p >= 0.0)) {
            return Err(ModelError::InvalidDensity("populations must be nonnegative".into()));
        }
        Self::new(Hermitian::diagonal(populations).into_inner(), EnvKind::Diagonal)
    }

    pub fn maximally_mixed(n: usize) -> Result<Self> {
        Self::diagonal(&vec![1.0 / n as f64; n])
    }

    /// Seeded full-rank state `G G^dagger / Tr(G G^dagger)` with complex Gaussian `G`.
    pub fn random(n: usize, seed: u64) -> Result<Self> {
        check_env_dim(n)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = complex_gaussian(n, &mut rng);
        let w = &g * g.adjoint();
        let w = w.unscale(linalg::trace(&w).re);
        Self::new(w, EnvKind::Random { seed })
    }

    pub fn matrix(&self) -> &CMatrix {
        self.r.matrix()
    }

    pub fn hermitian(&self) -> &Hermitian {
        &self.r
    }

    pub fn kind(&self) -> EnvKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.r.dim()
    }

    /// `Tr R^2`.
    pub fn purity(&self) -> f64 {
        (self.r.matrix() * self.r.matrix()).trace().re
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.kind, EnvKind::Pure) || (self.purity() - 1.0).abs() < 1e-12
    }
}

/// Gibbs state `exp(-beta H_E) / Tr exp(-beta H_E)`.
///
/// `beta = f64::INFINITY` gives the uniform mixture over the ground
/// eigenspace (the ground-state projector when it is nondegenerate).
pub fn thermal_state(h_e: &Hermitian, beta: f64) -> Result<EnvDensity> {
    if beta.is_nan() || beta < 0.0 {
        return Err(ModelError::InvalidBeta(beta));
    }
    let eig = eig_hermitian(h_e)?;
    let e_min = eig.values[0];
    let scale = max_abs(h_e.matrix()).max(1.0);
    let weights: Vec<f64> = eig
        .values
        .iter()
        .map(|&e| {
            if beta.is_infinite() {
                if e - e_min <= 1e-10 * scale {
                    1.0
                } else {
                    0.0
                }
            } else {
                (-beta * (e - e_min)).exp()
            }
        })
        .collect();
    let z: f64 = weights.iter().sum();
    let v = eig.vectors.matrix();
    let mut scaled = v.clone();
    for (k, w) in weights.iter().enumerate() {
        scaled.column_mut(k).scale_mut(w / z);
    }
    let r = scaled * v.adjoint();
    EnvDensity::new(r, EnvKind::Thermal { beta })
}

pub(crate) fn complex_gaussian(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re * s, im * s)
    })
}

/// GUE-style Hermitian matrix `scale * (G + G^dagger) / 2`.
pub(crate) fn gue(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> Hermitian {
    let g = complex_gaussian(n, rng);
    Hermitian::new((&g + g.adjoint()).scale(0.5 * scale)).expect("symmetrized by construction")
}

/// Seeded random model: qubit energies are standard normal, `H_E`, `V0`,
/// `V1` are drawn from the GUE ensemble, everything multiplied by `scale`.
pub fn random_model(n: usize, seed: u64, scale: f64) -> Result<PureDephasingModel> {
    check_env_dim(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e0: f64 = StandardNormal.sample(&mut rng);
    let e1: f64 = StandardNormal.sample(&mut rng);
    let h_e = gue(n, scale, &mut rng);
    let v0 = gue(n, scale, &mut rng);
    let v1 = gue(n, scale, &mut rng);
    PureDephasingModel::new([e0 * scale, e1 * scale], h_e, v0, v1)
}

/// Coupling `lambda/2 (eta 1 - sigma_z) (x) V`, i.e.
/// `V0 = lambda (eta + 1) V / 2` and `V1 = lambda (eta - 1) V / 2`.
///
/// `eta = 0` is the unbiased coupling; `eta = -1` leaves `|0>` uncoupled.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasedCoupling {
    pub lambda: f64,
    pub eta: f64,
    pub v: Hermitian,
}

impl BiasedCoupling {
    pub fn couplings(&self) -> (Hermitian, Hermitian) {
        (
            self.v.scale(0.5 * self.lambda * (self.eta + 1.0)),
            self.v.scale(0.5 * self.lambda * (self.eta - 1.0)),
        )
    }
}

pub fn expand_biased(c: &BiasedCoupling, epsilon0: f64, epsilon1: f64, h_e: Hermitian) -> Result<PureDephasingModel> {
    let (v0, v1) = c.couplings();
    PureDephasingModel::new([epsilon0, epsilon1], h_e, v0, v1)
}

/// One branch of a spectrally specified propagator,
/// `w(t) = sum_k exp(+i omega_k t) |psi_k><psi_k|`.
///
/// The `+i` sign is kept as written for this family; it corresponds to a
/// generator `H = -sum_k omega_k |psi_k><psi_k|`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBranch {
    components: Vec<(f64, DVector<C64>)>,
}

impl SpectralBranch {
    pub fn new(components: Vec<(f64, DVector<C64>)>) -> Result<Self> {
        let n = components.len();
        check_env_dim(n)?;
        if components.iter().any(|(w, v)| v.len() != n || !w.is_finite()) {
            return Err(ModelError::DimensionMismatch(format!(
                "{n} spectral components need {n}-dimensional vectors and finite frequencies"
            )));
        }
        let basis = CMatrix::from_fn(n, n, |i, k| components[k].1[i]);
        let deviation = max_abs_diff(&(basis.adjoint() * &basis), &linalg::identity(n));
        if deviation > 1e-12 {
            return Err(ModelError::NotOrthonormal(deviation));
        }
        Ok(Self { components })
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[(f64, DVector<C64>)] {
        &self.components
    }

    pub fn evaluate(&self, t: f64) -> Unitary {
        let n = self.dim();
        let mut w = CMatrix::zeros(n, n);
        for (omega, psi) in &self.components {
            w += (psi * psi.adjoint()) * C64::from_polar(1.0, omega * t);
        }
        Unitary::from_trusted(w)
    }
}

/// The two conditional environment propagators `w_0(t)`, `w_1(t)`.
#[derive(Debug, Clone)]
pub enum PropagatorPair {
    /// Generated by a Hamiltonian; the eigendecompositions of `H_E + V_i`
    /// are cached.
    Generated { model: PureDephasingModel, eig: [HermitianEigen; 2] },
    /// Given by spectral data per branch.
    Spectral([SpectralBranch; 2]),
    /// A snapshot of both propagators at one instant.
    Fixed { time: f64, w: [Unitary; 2] },
}

impl PropagatorPair {
    pub fn generated(model: PureDephasingModel) -> Result<Self> {
        let e0 = eig_hermitian(&model.conditional_hamiltonian(Branch::Zero))?;
        let e1 = eig_hermitian(&model.conditional_hamiltonian(Branch::One))?;
        Ok(Self::Generated { model, eig: [e0, e1] })
    }

    pub fn spectral(b0: SpectralBranch, b1: SpectralBranch) -> Result<Self> {
        if b0.dim() != b1.dim() {
            return Err(ModelError::DimensionMismatch(format!("branch dimensions {} and {}", b0.dim(), b1.dim())));
        }
        Ok(Self::Spectral([b0, b1]))
    }

    pub fn fixed(time: f64, w0: Unitary, w1: Unitary) -> Result<Self> {
        if w0.dim() != w1.dim() {
            return Err(ModelError::DimensionMismatch(format!("w0 is {0}x{0}, w1 is {1}x{1}", w0.dim(), w1.dim())));
        }
        check_env_dim(w0.dim())?;
        Ok(Self::Fixed { time, w: [w0, w1] })
    }

    pub fn env_dim(&self) -> usize {
        match self {
            Self::Generated { model, .. } => model.env_dim(),
            Self::Spectral(b) => b[0].dim(),
            Self::Fixed { w, .. } => w[0].dim(),
        }
    }

    pub fn model(&self) -> Option<&PureDephasingModel> {
        match self {
            Self::Generated { model, .. } => Some(model),
            _ => None,
        }
    }

    /// `w_i(t)`.
    pub fn propagator(&self, branch: Branch, t: f64) -> Result<Unitary> {
        if !t.is_finite() {
            return Err(ModelError::NonFiniteTime(t));
        }
        let i = branch.index();
        match self {
            Self::Generated { model, eig } => {
                let eps = model.effective_epsilon()[i];
                let phase = C64::from_polar(1.0, -eps * t);
                Ok(Unitary::from_trusted(eig[i].apply_phases(|lam| C64::from_polar(1.0, -lam * t) * phase)))
            }
            Self::Spectral(b) => Ok(b[i].evaluate(t)),
            Self::Fixed { time, w } => {
                if (t - time).abs() > 1e-12 * time.abs().max(1.0) {
                    return Err(ModelError::FixedTime { fixed: *time, requested: t });
                }
                Ok(w[i].clone())
            }
        }
    }

    /// `(w_0(t), w_1(t))`.
    pub fn pair(&self, t: f64) -> Result<(Unitary, Unitary)> {
        Ok((self.propagator(Branch::Zero, t)?, self.propagator(Branch::One, t)?))
    }
}

/// `w_branch(t)` with the branch given as a raw index.
pub fn conditional_propagator(p: &PropagatorPair, branch: u8, t: f64) -> Result<Unitary> {
    p.propagator(Branch::try_from(branch)?, t)
}

/// Frobenius norm of `[A, B]` for two Hermitian operators.
pub fn hermitian_comm_norm(a: &Hermitian, b: &Hermitian) -> f64 {
    comm_norm(a.matrix(), b.matrix()).expect("same dimension")
}
