//! Built-in systems: the two-level echo snapshot, the periodic two-level
//! environment, commuting families, and seeded random ensembles.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::dynamics::Amplitudes;
use crate::linalg::{eig_hermitian, from_real_rows, CMatrix, Hermitian, Unitary, C64};
use crate::model::{
    expand_biased, gue, random_model, thermal_state, BiasedCoupling, EnvDensity, EnvKind, ModelError, PropagatorPair,
    PureDephasingModel, SpectralBranch,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid scenario parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown scenario {0:?} (expected one of sec4b, fig1, commuting, random, zx)")]
    Unknown(String),
}

pub type Result<T, E = ScenarioError> = std::result::Result<T, E>;

/// Uniform grid of `points` values from `start` to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauGrid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl TauGrid {
    pub fn new(start: f64, stop: f64, points: usize) -> Result<Self> {
        if points < 2 || !(stop > start) || !(start >= 0.0) || !stop.is_finite() {
            return Err(ScenarioError::InvalidParameter(format!(
                "grid needs points >= 2 and stop > start >= 0, got [{start}, {stop}] x {points}"
            )));
        }
        Ok(Self { start, stop, points })
    }

    pub fn step(&self) -> f64 {
        (self.stop - self.start) / (self.points - 1) as f64
    }

    pub fn values(&self) -> Vec<f64> {
        let span = self.stop - self.start;
        let last = (self.points - 1) as f64;
        (0..self.points).map(|i| self.start + span * (i as f64) / last).collect()
    }

    /// Same interval with the spacing halved.
    pub fn refined(&self) -> Self {
        Self { points: 2 * self.points - 1, ..*self }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub pair: PropagatorPair,
    pub r0: EnvDensity,
    pub amplitudes: Amplitudes,
    /// Default evaluation times.
    pub grid: Vec<f64>,
    /// The time at which the scenario's reference identities hold, if any.
    pub reference_tau: Option<f64>,
    pub notes: &'static str,
}

impl Scenario {
    pub fn model(&self) -> Option<&PureDephasingModel> {
        self.pair.model()
    }
}

/// Snapshot time of [`sec4b_snapshot`].
pub const SNAPSHOT_TAU: f64 = 1.0;

/// Two-level environment snapshot with
/// `w_0^dagger = [[1, 1], [-1, 1]]/sqrt2`, `w_1 = [[1, 1], [1, -1]]/sqrt2`
/// and `R(0) = diag(c0, 1 - c0)`.
///
/// The pre-pulse state is separable for every `c0` while the echoed state
/// is entangled unless `c0 = 1/2`.
pub fn sec4b_snapshot(c0: f64) -> Result<Scenario> {
    if !(0.0..=1.0).contains(&c0) {
        return Err(ScenarioError::InvalidParameter(format!("c0 must lie in [0, 1], got {c0}")));
    }
    let s = FRAC_1_SQRT_2;
    let w0 = Unitary::new(from_real_rows(&[&[s, -s], &[s, s]])).map_err(ModelError::from)?;
    let w1 = Unitary::new(from_real_rows(&[&[s, s], &[s, -s]])).map_err(ModelError::from)?;
    Ok(Scenario {
        name: "sec4b".into(),
        pair: PropagatorPair::fixed(SNAPSHOT_TAU, w0, w1)?,
        r0: EnvDensity::diagonal(&[c0, 1.0 - c0])?,
        amplitudes: Amplitudes::equal(),
        grid: vec![SNAPSHOT_TAU],
        reference_tau: Some(SNAPSHOT_TAU),
        notes: "fixed-time snapshot: separable before the pulse, echoed state entangled unless c0 = 1/2",
    })
}

fn ket(re_im: [(f64, f64); 2]) -> DVector<C64> {
    DVector::from_vec(re_im.iter().map(|&(r, i)| C64::new(r, i)).collect())
}

/// Spectral propagators of the periodic two-level environment, in the
/// basis `{|R0>, |R1>}`.
///
/// Branch 0 has frequencies `+-pi/(4 tau0)` on `(|R0> -+ i|R1>)/sqrt2`;
/// branch 1 has `pi/tau0` and `2 pi/tau0` on the eigenvectors of
/// `[[1, 1], [1, -1]]/sqrt2`. At `t = tau0` both reduce to the snapshot
/// operators of [`sec4b_snapshot`].
pub fn fig1_propagators(tau0: f64) -> Result<PropagatorPair> {
    if !(tau0 > 0.0) || !tau0.is_finite() {
        return Err(ScenarioError::InvalidParameter(format!("tau0 must be positive, got {tau0}")));
    }
    let s = FRAC_1_SQRT_2;
    let lo = (2.0 - SQRT_2).sqrt() / 2.0; // sin(pi/8)
    let hi = (2.0 + SQRT_2).sqrt() / 2.0; // cos(pi/8)
    let b0 = SpectralBranch::new(vec![
        (PI / (4.0 * tau0), ket([(s, 0.0), (0.0, -s)])),
        (-PI / (4.0 * tau0), ket([(s, 0.0), (0.0, s)])),
    ])?;
    let b1 = SpectralBranch::new(vec![
        (PI / tau0, ket([(lo, 0.0), (-hi, 0.0)])),
        (2.0 * PI / tau0, ket([(hi, 0.0), (lo, 0.0)])),
    ])?;
    Ok(PropagatorPair::spectral(b0, b1)?)
}

/// Default number of grid points over one `4 tau0` period.
pub const FIG1_POINTS: usize = 801;

/// Periodic two-level environment starting in the pure state `|R0>`.
pub fn fig1_model(tau0: f64) -> Result<Scenario> {
    fig1_with(tau0, Amplitudes::equal(), FIG1_POINTS)
}

pub fn fig1_with(tau0: f64, amplitudes: Amplitudes, points: usize) -> Result<Scenario> {
    let pair = fig1_propagators(tau0)?;
    let r0 = EnvDensity::pure(&[C64::new(1.0, 0.0), C64::new(0.0, 0.0)])?;
    Ok(Scenario {
        name: "fig1".into(),
        pair,
        r0,
        amplitudes,
        grid: TauGrid::new(0.0, 4.0 * tau0, points)?.values(),
        reference_tau: Some(tau0),
        notes: "periodic two-level environment in a pure state; echo-induced entanglement at tau0",
    })
}

fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let h = gue(n, 1.0, rng);
    eig_hermitian(&h).expect("GUE sample diagonalizes").vectors.into_inner()
}

fn normals(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn conjugate(u: &CMatrix, m: &CMatrix) -> Hermitian {
    Hermitian::new(u * m * u.adjoint()).expect("unitary conjugation of a Hermitian matrix")
}

/// Operators block diagonal as `block (+) diag(rest)` in a random basis.
struct BlockBasis {
    u: CMatrix,
    block: usize,
}

impl BlockBasis {
    fn operator(&self, block: &Hermitian, rest: &[f64]) -> Hermitian {
        let n = self.u.nrows();
        let mut m = CMatrix::zeros(n, n);
        m.view_mut((0, 0), (self.block, self.block)).copy_from(block.matrix());
        for (k, &x) in rest.iter().enumerate() {
            m[(self.block + k, self.block + k)] = C64::new(x, 0.0);
        }
        conjugate(&self.u, &m)
    }
}

const COMMUTING_BETA: f64 = 1.0;

fn commuting_model(n: usize, seed: u64, with_v_commuting: bool) -> Result<PureDephasingModel> {
    if n < 2 {
        return Err(ScenarioError::InvalidParameter(format!("commuting family needs N >= 2, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = random_unitary(n, &mut rng);
    let eps = normals(2, &mut rng);
    let model = if with_v_commuting {
        let diag = |rng: &mut ChaCha8Rng| Hermitian::diagonal(&normals(n, rng));
        let basis = BlockBasis { u, block: 0 };
        let h_e = basis.operator(&Hermitian::zeros(0), &normals(n, &mut rng));
        let v0 = conjugate(&basis.u, diag(&mut rng).matrix());
        let v1 = conjugate(&basis.u, diag(&mut rng).matrix());
        PureDephasingModel::new([eps[0], eps[1]], h_e, v0, v1)?
    } else {
        // H_E degenerate on a two-dimensional block where V0 and V1 act as
        // noncommuting 2x2 operators
        let basis = BlockBasis { u, block: 2 };
        let e = normals(n - 1, &mut rng);
        let h_e = basis.operator(&Hermitian::identity(2).scale(e[0]), &e[1..]);
        let b0 = gue(2, 1.0, &mut rng);
        let b1 = gue(2, 1.0, &mut rng);
        let v0 = basis.operator(&b0, &normals(n - 2, &mut rng));
        let v1 = basis.operator(&b1, &normals(n - 2, &mut rng));
        PureDephasingModel::new([eps[0], eps[1]], h_e, v0, v1)?
    };
    Ok(model)
}

/// `[V_i, H_E] = 0` with a thermal environment (`beta = 1`).
///
/// With `with_v_commuting` all operators share one eigenbasis and the echo
/// is perfect; otherwise `H_E` has a degenerate pair on which `V0`, `V1`
/// do not commute, so the evolution stays separable but the echo is not
/// perfect.
pub fn commuting_family(n: usize, seed: u64, with_v_commuting: bool) -> Result<Scenario> {
    let model = commuting_model(n, seed, with_v_commuting)?;
    let r0 = thermal_state(model.h_e(), COMMUTING_BETA)?;
    Ok(Scenario {
        name: "commuting".into(),
        pair: PropagatorPair::generated(model)?,
        r0,
        amplitudes: Amplitudes::equal(),
        grid: TauGrid::new(0.0, 10.0, FIG1_POINTS)?.values(),
        reference_tau: None,
        notes: if with_v_commuting {
            "couplings commute with H_E and each other; thermal state; perfect echo, no entanglement"
        } else {
            "couplings commute with H_E but not each other; thermal state; separable, imperfect echo"
        },
    })
}

/// Fully commuting operators with a random full-rank environment state that
/// does not commute with `V0 - V1`: perfect echo, entangled before the pulse.
pub fn commuting_family_nonstationary(n: usize, seed: u64) -> Result<Scenario> {
    let model = commuting_model(n, seed, true)?;
    let r0 = EnvDensity::random(n, seed.wrapping_add(0x5EED))?;
    Ok(Scenario {
        name: "commuting-nonstationary".into(),
        pair: PropagatorPair::generated(model)?,
        r0,
        amplitudes: Amplitudes::equal(),
        grid: TauGrid::new(0.0, 10.0, FIG1_POINTS)?.values(),
        reference_tau: None,
        notes: "commuting propagators, environment not stationary: perfect echo, entangled at tau",
    })
}

/// Environment that never evolves: `R(0)` is proportional to the identity
/// on the block where `H_E`, `V0`, `V1` act nontrivially, so
/// `w_i R(0) w_i^dagger = R(0)` for both branches. Needs `N >= 3`.
pub fn frozen_environment(n: usize, seed: u64) -> Result<Scenario> {
    if n < 3 {
        return Err(ScenarioError::InvalidParameter(format!("frozen environment needs N >= 3, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis = BlockBasis { u: random_unitary(n, &mut rng), block: n - 1 };
    let eps = normals(2, &mut rng);
    let mut ops = Vec::with_capacity(3);
    for _ in 0..3 {
        let b = gue(n - 1, 1.0, &mut rng);
        let tail = normals(1, &mut rng);
        ops.push(basis.operator(&b, &tail));
    }
    let q = 0.5 / n as f64;
    let p = (1.0 - q) / (n - 1) as f64;
    let r = basis.operator(&Hermitian::identity(n - 1).scale(p), &[q]);
    let r0 = EnvDensity::new(r.into_inner(), EnvKind::General)?;
    let v1 = ops.pop().expect("three operators");
    let v0 = ops.pop().expect("three operators");
    let h_e = ops.pop().expect("three operators");
    let model = PureDephasingModel::new([eps[0], eps[1]], h_e, v0, v1)?;
    Ok(Scenario {
        name: "frozen".into(),
        pair: PropagatorPair::generated(model)?,
        r0,
        amplitudes: Amplitudes::equal(),
        grid: TauGrid::new(0.0, 10.0, FIG1_POINTS)?.values(),
        reference_tau: None,
        notes: "environment state invariant under both conditional evolutions",
    })
}

/// Seeded GUE model with couplings scaled by `lambda` and a random
/// full-rank environment.
pub fn random_scenario(n: usize, seed: u64, lambda: f64) -> Result<Scenario> {
    let model = random_model(n, seed, 1.0)?.scale_couplings(lambda);
    let r0 = EnvDensity::random(n, seed.wrapping_add(0x5EED))?;
    Ok(Scenario {
        name: "random".into(),
        pair: PropagatorPair::generated(model)?,
        r0,
        amplitudes: Amplitudes::equal(),
        grid: TauGrid::new(0.0, 4.0, FIG1_POINTS)?.values(),
        reference_tau: None,
        notes: "GUE model with random full-rank environment",
    })
}

/// `H_E = sigma_z`, `V = sigma_x` with biased coupling `(lambda, eta)` and a
/// thermal environment at inverse temperature `beta`.
pub fn zx_model(lambda: f64, eta: f64) -> Result<PureDephasingModel> {
    let sz = Hermitian::new(from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]])).map_err(ModelError::from)?;
    let sx = Hermitian::new(from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])).map_err(ModelError::from)?;
    Ok(expand_biased(&BiasedCoupling { lambda, eta, v: sx }, 0.0, 0.0, sz)?)
}

pub fn zx_scenario(beta: f64, lambda: f64, eta: f64) -> Result<Scenario> {
    let model = zx_model(lambda, eta)?;
    let r0 = thermal_state(model.h_e(), beta)?;
    Ok(Scenario {
        name: "zx".into(),
        pair: PropagatorPair::generated(model)?,
        r0,
        amplitudes: Amplitudes::equal(),
        grid: TauGrid::new(0.0, 2.0 * PI, FIG1_POINTS)?.values(),
        reference_tau: None,
        notes: "sigma_z environment, sigma_x biased coupling, thermal state",
    })
}

/// Parameters used when a scenario is selected by name.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioParams {
    pub c0: f64,
    pub tau0: f64,
    pub env_dim: usize,
    pub seed: u64,
    pub lambda: f64,
    pub eta: f64,
    pub beta: f64,
    pub with_v_commuting: bool,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self { c0: 0.7, tau0: 1.0, env_dim: 3, seed: 0, lambda: 1.0, eta: -1.0, beta: 1.0, with_v_commuting: true }
    }
}

pub const SCENARIO_NAMES: [&str; 5] = ["sec4b", "fig1", "commuting", "random", "zx"];

pub fn by_name(name: &str, p: &ScenarioParams) -> Result<Scenario> {
    match name {
        "sec4b" => sec4b_snapshot(p.c0),
        "fig1" => fig1_model(p.tau0),
        "commuting" => commuting_family(p.env_dim, p.seed, p.with_v_commuting),
        "random" => random_scenario(p.env_dim, p.seed, p.lambda),
        "zx" => zx_scenario(p.beta, p.lambda, p.eta),
        other => Err(ScenarioError::Unknown(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{coherence, echo_propagators, echoed_coherence};
    use crate::linalg::{comm_norm, max_abs_diff};
    use crate::model::Branch;

    #[test]
    fn snapshot_operator_identities() {
        let sc = sec4b_snapshot(0.7).unwrap();
        let (w0, w1) = sc.pair.pair(SNAPSHOT_TAU).unwrap();
        let (w0, w1) = (w0.into_inner(), w1.into_inner());
        let s = FRAC_1_SQRT_2;
        assert!(max_abs_diff(&w0.adjoint(), &from_real_rows(&[&[s, s], &[-s, s]])) < 1e-15);
        assert!(max_abs_diff(&(w0.adjoint() * &w1), &from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]])) < 1e-15);
        let echo_op = w0.adjoint() * w1.adjoint() * &w0 * &w1;
        assert!(max_abs_diff(&echo_op, &from_real_rows(&[&[0.0, 1.0], &[-1.0, 0.0]])) < 1e-15);
        assert!((coherence(&sc.pair, &sc.r0, SNAPSHOT_TAU).unwrap() - 0.4).norm() < 1e-15);
        assert!(echoed_coherence(&sc.pair, &sc.r0, SNAPSHOT_TAU).unwrap().norm() < 1e-15);
        assert!(sec4b_snapshot(1.5).is_err());
    }

    #[test]
    fn fig1_matches_snapshot_at_tau0() {
        for tau0 in [1.0, 0.37, 5.0] {
            let p = fig1_propagators(tau0).unwrap();
            let (w0, w1) = p.pair(tau0).unwrap();
            let snap = sec4b_snapshot(0.5).unwrap();
            let (s0, s1) = snap.pair.pair(SNAPSHOT_TAU).unwrap();
            // oracle: explicit 2x2 evaluation of exp(+-i pi/4) projector sums
            let h = FRAC_1_SQRT_2;
            let expected_w0 = from_real_rows(&[&[h, -h], &[h, h]]);
            assert!(max_abs_diff(w0.matrix(), &expected_w0) < 1e-12);
            assert!(max_abs_diff(w0.matrix(), s0.matrix()) < 1e-12);
            assert!(max_abs_diff(w1.matrix(), s1.matrix()) < 1e-12);
            assert!(max_abs_diff(&w0.matrix().adjoint(), &from_real_rows(&[&[h, h], &[-h, h]])) < 1e-12);
        }
    }

    #[test]
    fn fig1_periodicity() {
        let tau0 = 1.0;
        let p = fig1_propagators(tau0).unwrap();
        for k in 0..40 {
            let t = 0.1 * k as f64;
            let (a0, a1) = p.pair(t).unwrap();
            let (b0, b1) = p.pair(t + 4.0 * tau0).unwrap();
            // branch 1 is strictly periodic; branch 0 flips its global sign
            assert!(max_abs_diff(a1.matrix(), b1.matrix()) < 1e-12);
            assert!(max_abs_diff(&(-a0.matrix()), b0.matrix()) < 1e-12);
            let (c0, c1) = p.pair(t + 8.0 * tau0).unwrap();
            assert!(max_abs_diff(a0.matrix(), c0.matrix()) < 1e-12);
            assert!(max_abs_diff(a1.matrix(), c1.matrix()) < 1e-12);
        }
    }

    #[test]
    fn commuting_family_structure() {
        for seed in 0..10 {
            let sc = commuting_family(4, seed, true).unwrap();
            let m = sc.model().unwrap();
            assert!(comm_norm(m.coupling(Branch::Zero).matrix(), m.h_e().matrix()).unwrap() < 1e-12);
            assert!(comm_norm(m.coupling(Branch::Zero).matrix(), m.coupling(Branch::One).matrix()).unwrap() < 1e-12);
            for tau in [0.3, 1.7, 6.1] {
                let (w0, w1) = sc.pair.pair(tau).unwrap();
                assert!(comm_norm(&w0.matrix().adjoint(), w1.matrix()).unwrap() < 1e-12);
            }

            let sc = commuting_family(4, seed, false).unwrap();
            let m = sc.model().unwrap();
            assert!(comm_norm(m.coupling(Branch::One).matrix(), m.h_e().matrix()).unwrap() < 1e-12);
            assert!(comm_norm(m.coupling(Branch::Zero).matrix(), m.coupling(Branch::One).matrix()).unwrap() > 1e-3);
        }
        assert!(commuting_family(1, 0, true).is_err());
    }

    #[test]
    fn frozen_environment_does_not_evolve() {
        let sc = frozen_environment(4, 3).unwrap();
        for tau in [0.4, 2.2] {
            for b in [Branch::Zero, Branch::One] {
                let w = sc.pair.propagator(b, tau).unwrap();
                let r = w.matrix() * sc.r0.matrix() * w.matrix().adjoint();
                assert!(max_abs_diff(&r, sc.r0.matrix()) < 1e-12);
            }
            let (e0, e1) = echo_propagators(&sc.pair, tau).unwrap();
            assert!(comm_norm(&e0, &e1).unwrap() > 1e-3);
        }
    }

    #[test]
    fn random_scenario_determinism_and_zero_coupling() {
        let a = random_scenario(3, 9, 0.5).unwrap();
        let b = random_scenario(3, 9, 0.5).unwrap();
        assert_eq!(a.model(), b.model());
        assert_eq!(a.r0, b.r0);
        let z = random_scenario(3, 9, 0.0).unwrap();
        for tau in [0.5, 1.5, 3.0] {
            assert!((echoed_coherence(&z.pair, &z.r0, tau).unwrap() - 1.0).norm() < 1e-12);
        }
    }

    #[test]
    fn random_scenario_state_invariants() {
        let sc = random_scenario(2, 9, 1.0).unwrap();
        for &tau in sc.grid.iter().step_by(40) {
            crate::dynamics::joint_state(&sc.pair, sc.amplitudes, &sc.r0, tau).unwrap().check_invariants().unwrap();
            crate::dynamics::echoed_joint_state(&sc.pair, sc.amplitudes, &sc.r0, tau)
                .unwrap()
                .check_invariants()
                .unwrap();
        }
    }

    #[test]
    fn grid_values() {
        let g = TauGrid::new(0.0, 4.0, 801).unwrap();
        let v = g.values();
        assert_eq!(v.len(), 801);
        assert_eq!(v[200], 1.0);
        assert_eq!(v[800], 4.0);
        assert_eq!(g.refined().values()[400], 1.0);
        assert!(TauGrid::new(1.0, 1.0, 10).is_err());
        assert!(TauGrid::new(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn names_resolve() {
        for name in SCENARIO_NAMES {
            assert!(by_name(name, &ScenarioParams::default()).is_ok(), "{name}");
        }
        assert!(matches!(by_name("nope", &ScenarioParams::default()), Err(ScenarioError::Unknown(_))));
    }
}
