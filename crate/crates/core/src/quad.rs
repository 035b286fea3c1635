//! One-dimensional quadrature: Gauss–Legendre rules, an adaptive bisection
//! driver, and independent fixed-rule oracles (composite Simpson, midpoint
//! Riemann) used to cross-check adaptive results.

use crate::error::{Error, Result};

/// Gauss–Legendre rule on `[-1, 1]` with `n` nodes (exact for polynomials of
/// degree `2n-1`). Nodes are roots of the Legendre polynomial `P_n`, found by
/// Newton iteration from the Chebyshev initial guess.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "need at least two nodes");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre_with_derivative(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(n, x);
            nodes[n - 1 - i] = x;
            weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        GaussLegendre { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Applies the rule on `[a, b]` to a fallible integrand.
    pub fn integrate<F>(&self, f: &F, a: f64, b: f64) -> Result<f64>
    where
        F: Fn(f64) -> Result<f64> + ?Sized,
    {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x)?;
        }
        Ok(acc * half)
    }
}

/// Returns `(P_n(x), P_n'(x))` via the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Adaptive Gauss–Legendre integration by interval bisection.
///
/// An interval is accepted when the whole-interval estimate agrees with the
/// sum over its two halves to within the local tolerance; the tolerance is
/// split between halves so the global absolute error stays below `tol`.
#[derive(Debug, Clone)]
pub struct AdaptiveQuad {
    rule: GaussLegendre,
    pub tol: f64,
    pub max_depth: u32,
}

impl AdaptiveQuad {
    pub fn new(tol: f64) -> Self {
        AdaptiveQuad {
            rule: GaussLegendre::new(15),
            tol,
            max_depth: 20,
        }
    }

    pub fn with_depth(tol: f64, max_depth: u32) -> Self {
        AdaptiveQuad {
            rule: GaussLegendre::new(15),
            tol,
            max_depth,
        }
    }

    pub fn integrate<F>(&self, f: &F, a: f64, b: f64) -> Result<f64>
    where
        F: Fn(f64) -> Result<f64> + ?Sized,
    {
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidArgument(
                "adaptive quadrature needs finite endpoints".into(),
            ));
        }
        if a == b {
            return Ok(0.0);
        }
        let whole = self.rule.integrate(f, a, b)?;
        self.refine(f, a, b, whole, self.tol, 0)
    }

    /// Infallible-integrand convenience wrapper.
    pub fn integrate_plain<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Result<f64> {
        self.integrate(&|x| Ok(f(x)), a, b)
    }

    fn refine<F>(&self, f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> Result<f64>
    where
        F: Fn(f64) -> Result<f64> + ?Sized,
    {
        let mid = 0.5 * (a + b);
        let left = self.rule.integrate(f, a, mid)?;
        let right = self.rule.integrate(f, mid, b)?;
        let split = left + right;
        // Accept on the requested tolerance, or once the disagreement is at
        // the rounding floor of the quadrature sums themselves — repeated
        // halving pushes the per-interval tolerance below what floating point
        // arithmetic can distinguish.
        let noise_floor = 1e-14 * (left.abs() + right.abs() + whole.abs());
        if (split - whole).abs() <= tol.max(noise_floor).max(1e-300) {
            return Ok(split);
        }
        if depth >= self.max_depth {
            return Err(Error::QuadratureDidNotConverge {
                tol: self.tol,
                max_depth: self.max_depth,
            });
        }
        let half_tol = 0.5 * tol;
        Ok(self.refine(f, a, mid, left, half_tol, depth + 1)?
            + self.refine(f, mid, b, right, half_tol, depth + 1)?)
    }
}

/// Composite Simpson rule with `panels` sub-intervals (independent oracle path;
/// no shared code with the adaptive driver).
pub fn composite_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    assert!(panels >= 1);
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for i in 0..panels {
        let x0 = a + i as f64 * h;
        let x1 = x0 + 0.5 * h;
        let x2 = x0 + h;
        acc += f(x0) + 4.0 * f(x1) + f(x2);
    }
    acc * h / 6.0
}

/// Midpoint Riemann sum with `points` samples (second independent oracle).
pub fn midpoint_riemann<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, points: usize) -> f64 {
    assert!(points >= 1);
    let h = (b - a) / points as f64;
    (0..points).map(|i| f(a + (i as f64 + 0.5) * h)).sum::<f64>() * h
}
