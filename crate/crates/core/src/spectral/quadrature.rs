//! Gauss-Legendre rules and adaptive Simpson integration.

use std::f64::consts::PI;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("quadrature did not converge on [{a}, {b}]: estimate {estimate:.6e}, error {error:.3e} > tolerance {tol:.3e} at depth {depth}")]
pub struct QuadratureError {
    pub a: f64,
    pub b: f64,
    pub estimate: f64,
    pub error: f64,
    pub tol: f64,
    pub depth: usize,
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Newton iteration from the Chebyshev-like initial guess
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped onto `panels` equal panels of `[a, b]`.
    pub fn composite(&self, a: f64, b: f64, panels: usize) -> impl Iterator<Item = (f64, f64)> + '_ {
        let panels = panels.max(1);
        let h = (b - a) / panels as f64;
        (0..panels).flat_map(move |p| {
            let mid = a + h * (p as f64 + 0.5);
            self.nodes.iter().zip(&self.weights).map(move |(x, w)| (mid + 0.5 * h * x, 0.5 * h * w))
        })
    }

    pub fn integrate(&self, a: f64, b: f64, panels: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.composite(a, b, panels).map(|(x, w)| w * f(x)).sum()
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Maximum bisection depth of [`adaptive_simpson`].
pub const MAX_DEPTH: usize = 50;

/// Adaptive Simpson integration of `f` over `[a, b]` to absolute
/// tolerance `tol`.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64, QuadratureError> {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 0)
}

#[allow(clippy::too_many_arguments)]
fn step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> Result<f64, QuadratureError> {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if !delta.is_finite() {
        return Err(QuadratureError { a, b, estimate: left + right, error: f64::INFINITY, tol, depth });
    }
    if depth >= 4 && delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth >= MAX_DEPTH {
        return Err(QuadratureError { a, b, estimate: left + right, error: delta.abs() / 15.0, tol, depth });
    }
    Ok(step(f, a, m, fa, flm, fm, left, tol / 2.0, depth + 1)? + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth + 1)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        let gl = GaussLegendre::new(8);
        assert!((gl.weights().iter().sum::<f64>() - 2.0).abs() < 1e-14);
        for k in 0..16 {
            let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
            let got = gl.integrate(-1.0, 1.0, 1, |x| x.powi(k));
            assert!((got - exact).abs() < 1e-14, "x^{k}: {got}");
        }
        // known 3-point rule
        let gl3 = GaussLegendre::new(3);
        assert!((gl3.nodes()[2] - 0.6f64.sqrt()).abs() < 1e-15);
        assert!((gl3.weights()[1] - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn composite_rule_on_oscillatory_integrand() {
        let gl = GaussLegendre::new(16);
        let got = gl.integrate(0.0, 10.0, 8, |x| (3.0 * x).cos());
        assert!((got - (30.0f64).sin() / 3.0).abs() < 1e-14);
    }

    #[test]
    fn simpson_examples() {
        let got = adaptive_simpson(&|x: f64| x.exp(), 0.0, 1.0, 1e-12).unwrap();
        assert!((got - (1f64.exp() - 1.0)).abs() < 1e-12);
        let got = adaptive_simpson(&|x: f64| x.sqrt(), 0.0, 1.0, 1e-10).unwrap();
        assert!((got - 2.0 / 3.0).abs() < 1e-9);
        let err = adaptive_simpson(&|x: f64| 1.0 / x, 0.0, 1.0, 1e-9).unwrap_err();
        assert!(err.error > err.tol || err.error.is_infinite());
    }
}
