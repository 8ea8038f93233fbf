//! Dense complex linear algebra for small operators.
//!
//! Everything here works on `nalgebra::DMatrix<Complex64>`. The newtypes
//! [`Hermitian`] and [`Unitary`] carry validated invariants; the rest are
//! free functions over raw matrices. Composite spaces are ordered with the
//! first factor as the slow index, so `|i>|k>` lives at row `i * d_b + k`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Largest square matrix accepted anywhere (a qubit times a 64-level environment).
pub const MAX_DIM: usize = 128;
/// Max-entry tolerance for `M = M^dagger`.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Max-entry tolerance for `U^dagger U = 1`.
pub const UNITARY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix dimension {dim} exceeds the cap of {max}")]
    TooLarge { dim: usize, max: usize },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("matrix is not Hermitian: max |M - M^dagger| = {deviation:.3e}")]
    NotHermitian { deviation: f64 },
    #[error("matrix is not unitary: max |U^dagger U - 1| = {deviation:.3e}")]
    NotUnitary { deviation: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("Hermitian eigensolver did not converge")]
    EigenFailed,
}

pub type Result<T, E = LinalgError> = std::result::Result<T, E>;

/// One side of a bipartite split `A (x) B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

fn check_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(LinalgError::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    if m.nrows() > MAX_DIM {
        return Err(LinalgError::TooLarge { dim: m.nrows(), max: MAX_DIM });
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    Ok(m.nrows())
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entry modulus of `a - b`. Shapes must agree.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "max_abs_diff shape mismatch");
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.norm()
}

pub fn trace(m: &CMatrix) -> C64 {
    m.trace()
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Build a matrix from row-major real/imaginary pairs.
pub fn from_rows(rows: &[&[(f64, f64)]]) -> CMatrix {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    CMatrix::from_fn(n, m, |i, j| C64::new(rows[i][j].0, rows[i][j].1))
}

pub fn from_real_rows(rows: &[&[f64]]) -> CMatrix {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    CMatrix::from_fn(n, m, |i, j| C64::new(rows[i][j], 0.0))
}

pub fn hermiticity_deviation(m: &CMatrix) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

/// A validated Hermitian operator.
///
/// Construction symmetrizes the input, so the stored matrix is Hermitian to
/// the last bit.
#[derive(Debug, Clone, PartialEq)]
pub struct Hermitian(CMatrix);

impl Hermitian {
    pub fn new(m: CMatrix) -> Result<Self> {
        check_square(&m)?;
        let deviation = hermiticity_deviation(&m);
        if deviation > HERMITIAN_TOL * max_abs(&m).max(1.0) {
            return Err(LinalgError::NotHermitian { deviation });
        }
        let sym = (&m + m.adjoint()).scale(0.5);
        Ok(Self(sym))
    }

    pub fn zeros(n: usize) -> Self {
        Self(CMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(identity(n))
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        Self(CMatrix::from_fn(n, n, |i, j| if i == j { C64::new(values[i], 0.0) } else { C64::new(0.0, 0.0) }))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.scale(s))
    }

    pub fn add(&self, other: &Hermitian) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(LinalgError::DimensionMismatch(format!(
                "cannot add {}x{} and {}x{}",
                self.dim(),
                self.dim(),
                other.dim(),
                other.dim()
            )));
        }
        Ok(Self(&self.0 + &other.0))
    }
}

/// A validated unitary operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Unitary(CMatrix);

impl Unitary {
    pub fn new(m: CMatrix) -> Result<Self> {
        let n = check_square(&m)?;
        let deviation = max_abs_diff(&(m.adjoint() * &m), &identity(n));
        if deviation > UNITARY_TOL {
            return Err(LinalgError::NotUnitary { deviation });
        }
        Ok(Self(m))
    }

    /// Wrap a matrix that is unitary by construction (products and
    /// spectral sums of unitaries).
    pub(crate) fn from_trusted(m: CMatrix) -> Self {
        debug_assert!(max_abs_diff(&(m.adjoint() * &m), &identity(m.nrows())) < 1e-9);
        Self(m)
    }

    pub fn identity(n: usize) -> Self {
        Self(identity(n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    pub fn dagger(&self) -> Unitary {
        Self(self.0.adjoint())
    }

    /// Operator product `self * rhs`.
    pub fn then_after(&self, rhs: &Unitary) -> Unitary {
        Self(&self.0 * &rhs.0)
    }

    pub fn unitarity_deviation(&self) -> f64 {
        max_abs_diff(&(self.0.adjoint() * &self.0), &identity(self.dim()))
    }
}

/// Spectral decomposition `M = V diag(values) V^dagger`.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Ascending.
    pub values: Vec<f64>,
    pub vectors: Unitary,
}

impl HermitianEigen {
    pub fn reconstruct(&self) -> CMatrix {
        let v = self.vectors.matrix();
        let mut scaled = v.clone();
        for (k, &lam) in self.values.iter().enumerate() {
            scaled.column_mut(k).scale_mut(lam);
        }
        scaled * v.adjoint()
    }

    /// `V diag(phase(lambda_k)) V^dagger` for an arbitrary unit-modulus map.
    pub fn apply_phases(&self, phase: impl Fn(f64) -> C64) -> CMatrix {
        let v = self.vectors.matrix();
        let mut scaled = v.clone();
        for (k, &lam) in self.values.iter().enumerate() {
            let p = phase(lam);
            scaled.column_mut(k).iter_mut().for_each(|z| *z *= p);
        }
        scaled * v.adjoint()
    }

    /// `exp(-i M t)`.
    pub fn propagator(&self, t: f64) -> Unitary {
        Unitary::from_trusted(self.apply_phases(|lam| C64::from_polar(1.0, -lam * t)))
    }
}

/// Eigendecomposition of a Hermitian matrix with ascending eigenvalues.
///
/// Each eigenvector is rephased so that its largest-magnitude component
/// (the first one, on ties) is real and positive.
pub fn eig_hermitian(h: &Hermitian) -> Result<HermitianEigen> {
    let n = h.dim();
    if n == 0 {
        return Ok(HermitianEigen { values: vec![], vectors: Unitary(CMatrix::zeros(0, 0)) });
    }
    let eig = h.0.clone().try_symmetric_eigen(f64::EPSILON, 0).ok_or(LinalgError::EigenFailed)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let biggest = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let pivot = col
            .iter()
            .position(|z| z.norm() >= biggest * (1.0 - 1e-10))
            .unwrap_or(0);
        let phase = col[pivot].conj() / col[pivot].norm();
        for i in 0..n {
            vectors[(i, dst)] = col[i] * phase;
        }
        // pivot exactly real after rephasing
        vectors[(pivot, dst)] = C64::new(vectors[(pivot, dst)].norm(), 0.0);
    }
    Ok(HermitianEigen { values, vectors: Unitary(vectors) })
}

/// `exp(-i H t)` through the spectral decomposition of `H`.
pub fn expm_hermitian_generator(h: &Hermitian, t: f64) -> Result<Unitary> {
    Ok(eig_hermitian(h)?.propagator(t))
}

fn check_composite(s: &CMatrix, dims: (usize, usize)) -> Result<()> {
    let (da, db) = dims;
    if s.nrows() != s.ncols() || s.nrows() != da * db {
        return Err(LinalgError::DimensionMismatch(format!(
            "{}x{} matrix on a {}x{} composite space",
            s.nrows(),
            s.ncols(),
            da,
            db
        )));
    }
    Ok(())
}

/// Trace out one factor of a bipartite operator.
pub fn partial_trace(s: &CMatrix, dims: (usize, usize), over: Subsystem) -> Result<CMatrix> {
    check_composite(s, dims)?;
    let (da, db) = dims;
    let out = match over {
        Subsystem::B => CMatrix::from_fn(da, da, |i, j| (0..db).map(|k| s[(i * db + k, j * db + k)]).sum()),
        Subsystem::A => CMatrix::from_fn(db, db, |k, l| (0..da).map(|i| s[(i * db + k, i * db + l)]).sum()),
    };
    Ok(out)
}

/// Transpose one factor of a bipartite operator.
pub fn partial_transpose(s: &CMatrix, dims: (usize, usize), on: Subsystem) -> Result<CMatrix> {
    check_composite(s, dims)?;
    let (_, db) = dims;
    let n = s.nrows();
    let out = CMatrix::from_fn(n, n, |r, c| {
        let (i, k) = (r / db, r % db);
        let (j, l) = (c / db, c % db);
        match on {
            Subsystem::A => s[(j * db + k, i * db + l)],
            Subsystem::B => s[(i * db + l, j * db + k)],
        }
    });
    Ok(out)
}

/// Frobenius norm of `AB - BA`.
pub fn comm_norm(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    if a.shape() != b.shape() || a.nrows() != a.ncols() {
        return Err(LinalgError::DimensionMismatch(format!(
            "commutator of {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok((a * b - b * a).norm())
}

/// Scale-aware threshold below which `comm_norm(a, b)` counts as zero.
pub fn commutator_tolerance(a: &CMatrix, b: &CMatrix) -> f64 {
    1e-10 * (a.norm() * b.norm() + 1.0)
}

/// Eigenvalues of a Hermitian matrix without the validation round trip;
/// used for spectra of partial transposes and products that are Hermitian
/// up to rounding.
pub fn hermitian_spectrum(m: &CMatrix) -> Result<Vec<f64>> {
    check_square(m)?;
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = sym.try_symmetric_eigen(f64::EPSILON, 0).ok_or(LinalgError::EigenFailed)?;
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, SQRT_2};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sz() -> CMatrix {
        from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]])
    }

    fn sx() -> CMatrix {
        from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
    }

    fn random_hermitian(n: usize, seed: u64) -> Hermitian {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = CMatrix::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        Hermitian::new((&g + g.adjoint()).scale(0.5)).unwrap()
    }

    fn bell() -> CMatrix {
        let psi = nalgebra::DVector::from_vec(vec![c(FRAC_1_SQRT_2, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(FRAC_1_SQRT_2, 0.0)]);
        &psi * psi.adjoint()
    }

    #[test]
    fn eig_pauli_z_and_x() {
        let e = eig_hermitian(&Hermitian::new(sz()).unwrap()).unwrap();
        assert_eq!(e.values, vec![-1.0, 1.0]);

        let e = eig_hermitian(&Hermitian::new(sx()).unwrap()).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-15 && (e.values[1] - 1.0).abs() < 1e-15);
        let v = e.vectors.matrix();
        // -1 eigenvector (1, -1)/sqrt2 and +1 eigenvector (1, 1)/sqrt2 with the phase convention
        assert!((v[(0, 0)] - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-14);
        assert!((v[(1, 0)] - c(-FRAC_1_SQRT_2, 0.0)).norm() < 1e-14);
        assert!((v[(0, 1)] - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-14);
        assert!((v[(1, 1)] - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn eig_random_reconstructs() {
        let h = random_hermitian(6, 7);
        let e = eig_hermitian(&h).unwrap();
        // oracle: multiply V D V^dagger back out
        let residual = max_abs_diff(&e.reconstruct(), h.matrix());
        assert!(residual < 1e-12, "residual {residual}");
        assert!(e.vectors.unitarity_deviation() < 1e-12);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = from_real_rows(&[&[0.0, 1.0], &[0.5, 0.0]]);
        let err = Hermitian::new(m).unwrap_err();
        assert_eq!(err, LinalgError::NotHermitian { deviation: 0.5 });
        assert!(err.to_string().contains("5.000e-1"));
    }

    #[test]
    fn dimension_cap() {
        let m = CMatrix::zeros(MAX_DIM + 1, MAX_DIM + 1);
        assert!(matches!(Hermitian::new(m), Err(LinalgError::TooLarge { .. })));
    }

    #[test]
    fn expm_examples() {
        let zero = Hermitian::zeros(3);
        assert!(max_abs_diff(expm_hermitian_generator(&zero, 2.7).unwrap().matrix(), &identity(3)) < 1e-15);

        let t = 0.37;
        let u = expm_hermitian_generator(&Hermitian::new(sz()).unwrap(), t).unwrap();
        let expected = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::from_polar(1.0, -t),
            C64::from_polar(1.0, t),
        ]));
        assert!(max_abs_diff(u.matrix(), &expected) < 1e-15);

        let u = expm_hermitian_generator(&Hermitian::new(sx()).unwrap(), FRAC_PI_2).unwrap();
        let expected = sx() * c(0.0, -1.0);
        assert!(max_abs_diff(u.matrix(), &expected) < 1e-15);
    }

    #[test]
    fn partial_trace_examples() {
        let rho = from_rows(&[&[(0.6, 0.0), (0.1, 0.2)], &[(0.1, -0.2), (0.4, 0.0)]]);
        let r = from_real_rows(&[&[0.25, 0.0, 0.0], &[0.0, 0.5, 0.0], &[0.0, 0.0, 0.25]]);
        let s = kron(&rho, &r);
        assert!(max_abs_diff(&partial_trace(&s, (2, 3), Subsystem::B).unwrap(), &rho) < 1e-15);
        assert!(max_abs_diff(&partial_trace(&s, (2, 3), Subsystem::A).unwrap(), &r) < 1e-15);

        let half = identity(2).scale(0.5);
        for side in [Subsystem::A, Subsystem::B] {
            assert!(max_abs_diff(&partial_trace(&bell(), (2, 2), side).unwrap(), &half) < 1e-15);
        }
        assert!(partial_trace(&s, (3, 3), Subsystem::A).is_err());
    }

    #[test]
    fn partial_transpose_examples() {
        let spectrum = hermitian_spectrum(&partial_transpose(&bell(), (2, 2), Subsystem::A).unwrap()).unwrap();
        let expected = [-0.5, 0.5, 0.5, 0.5];
        for (a, b) in spectrum.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }

        let rho = from_rows(&[&[(0.6, 0.0), (0.1, 0.2)], &[(0.1, -0.2), (0.4, 0.0)]]);
        let r = from_rows(&[&[(0.7, 0.0), (0.0, 0.1)], &[(0.0, -0.1), (0.3, 0.0)]]);
        let s = kron(&rho, &r);
        let pt = partial_transpose(&s, (2, 2), Subsystem::A).unwrap();
        assert!(max_abs_diff(&pt, &kron(&rho.transpose(), &r)) < 1e-15);
        let a = hermitian_spectrum(&pt).unwrap();
        let b = hermitian_spectrum(&s).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-14);
        }
        let pt_b = partial_transpose(&s, (2, 2), Subsystem::B).unwrap();
        assert!(max_abs_diff(&pt_b, &kron(&rho, &r.transpose())) < 1e-15);
    }

    #[test]
    fn partial_transpose_is_involution() {
        let h = random_hermitian(8, 3);
        for side in [Subsystem::A, Subsystem::B] {
            let twice = partial_transpose(&partial_transpose(h.matrix(), (2, 4), side).unwrap(), (2, 4), side).unwrap();
            assert!(max_abs_diff(&twice, h.matrix()) < 1e-14);
        }
    }

    #[test]
    fn comm_norm_examples() {
        let d1 = from_real_rows(&[&[1.0, 0.0], &[0.0, 2.0]]);
        let d2 = from_real_rows(&[&[-3.0, 0.0], &[0.0, 0.5]]);
        assert_eq!(comm_norm(&d1, &d2).unwrap(), 0.0);
        assert!((comm_norm(&sx(), &sz()).unwrap() - 2.0 * SQRT_2).abs() < 1e-15);
        assert!(comm_norm(&sx(), &identity(3)).is_err());
    }

    #[test]
    fn unitary_validation() {
        assert!(Unitary::new(sx()).is_ok());
        assert!(matches!(Unitary::new(sz().scale(2.0)), Err(LinalgError::NotUnitary { .. })));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn expm_forward_backward(seed in any::<u64>(), n in 1usize..8, t in -5.0f64..5.0) {
                let h = random_hermitian(n, seed);
                let e = eig_hermitian(&h).unwrap();
                let prod = e.propagator(t).matrix() * e.propagator(-t).matrix();
                prop_assert!(max_abs_diff(&prod, &identity(n)) < 1e-12);
            }

            #[test]
            fn partial_traces_preserve_trace(seed in any::<u64>(), da in 1usize..4, db in 1usize..5) {
                let s = random_hermitian(da * db, seed);
                let t = trace(s.matrix());
                for side in [Subsystem::A, Subsystem::B] {
                    let r = partial_trace(s.matrix(), (da, db), side).unwrap();
                    prop_assert!((trace(&r) - t).norm() < 1e-12);
                    prop_assert!(hermiticity_deviation(&r) < 1e-14);
                }
            }

            #[test]
            fn partial_transpose_spectrum_sums_to_one(seed in any::<u64>(), db in 1usize..5) {
                let n = 2 * db;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let g = CMatrix::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
                let rho = &g * g.adjoint();
                let rho = rho.unscale(trace(&rho).re);
                let spec = hermitian_spectrum(&partial_transpose(&rho, (2, db), Subsystem::A).unwrap()).unwrap();
                prop_assert!((spec.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn eig_reconstruction_many_seeds() {
        for seed in 0..1000u64 {
            let n = 1 + (seed as usize % 16);
            let h = random_hermitian(n, seed);
            let e = eig_hermitian(&h).unwrap();
            assert!(max_abs_diff(&e.reconstruct(), h.matrix()) < 1e-12, "seed {seed}");
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
