//! Smooth test functions with exact derivatives of every order used by the
//! verification suites. Each family evaluates `D^α f` analytically so
//! finite-difference and chain-expansion results can be checked against an
//! independent closed form.

use crate::error::{Error, Result};
use crate::index::MultiIndex;

/// A smooth scalar function on ℝⁿ with analytic partial derivatives.
///
/// Implementations must be pure and thread-safe; `derivative` with the zero
/// multi-index must agree with `eval`.
pub trait SmoothFn: Sync + Send {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> f64;
    fn derivative(&self, alpha: &MultiIndex, x: &[f64]) -> f64;

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }
}

/// Multivariate polynomial `Σ c_k x^{α_k}`.
#[derive(Debug, Clone)]
pub struct Polynomial {
    dim: usize,
    terms: Vec<(f64, MultiIndex)>,
}

impl Polynomial {
    pub fn new(dim: usize, terms: Vec<(f64, MultiIndex)>) -> Self {
        assert!(terms.iter().all(|(_, a)| a.dim() == dim));
        Polynomial { dim, terms }
    }

    pub fn constant(dim: usize, value: f64) -> Self {
        Polynomial::new(dim, vec![(value, MultiIndex::zero(dim))])
    }

    /// The coordinate monomial `x_axis^power`.
    pub fn monomial(dim: usize, axis: usize, power: u32) -> Self {
        let mut comps = vec![0u32; dim];
        comps[axis] = power;
        Polynomial::new(dim, vec![(1.0, MultiIndex::new(comps))])
    }
}

impl SmoothFn for Polynomial {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, a)| {
                c * a
                    .components()
                    .iter()
                    .zip(x)
                    .map(|(&p, &xi)| xi.powi(p as i32))
                    .product::<f64>()
            })
            .sum()
    }

    fn derivative(&self, alpha: &MultiIndex, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (c, a) in &self.terms {
            let mut coef = *c;
            let mut ok = true;
            let mut powers = Vec::with_capacity(self.dim);
            for axis in 0..self.dim {
                let p = a.component(axis);
                let d = alpha.component(axis);
                if d > p {
                    ok = false;
                    break;
                }
                // Falling factorial p·(p−1)···(p−d+1).
                for k in 0..d {
                    coef *= (p - k) as f64;
                }
                powers.push(p - d);
            }
            if ok {
                acc += coef
                    * powers
                        .iter()
                        .zip(x)
                        .map(|(&p, &xi)| xi.powi(p as i32))
                        .product::<f64>();
            }
        }
        acc
    }
}

/// Plane-wave sinusoid `A·sin(w·x + φ)`; `D^α = A·(Π w_k^{α_k})·sin^{(|α|)}`.
#[derive(Debug, Clone)]
pub struct Sinusoid {
    pub amplitude: f64,
    pub wave: Vec<f64>,
    pub phase: f64,
}

impl Sinusoid {
    pub fn new(amplitude: f64, wave: Vec<f64>, phase: f64) -> Self {
        assert!(!wave.is_empty());
        Sinusoid { amplitude, wave, phase }
    }
}

impl SmoothFn for Sinusoid {
    fn dim(&self) -> usize {
        self.wave.len()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let arg: f64 = self.wave.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + self.phase;
        self.amplitude * arg.sin()
    }

    fn derivative(&self, alpha: &MultiIndex, x: &[f64]) -> f64 {
        let arg: f64 = self.wave.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + self.phase;
        let mut coef = self.amplitude;
        for (axis, w) in self.wave.iter().enumerate() {
            coef *= w.powi(alpha.component(axis) as i32);
        }
        // sin^{(m)}(u) = sin(u + m·π/2).
        coef * (arg + alpha.order() as f64 * std::f64::consts::FRAC_PI_2).sin()
    }
}

/// Isotropic Gaussian bump `A·exp(−|x−c|²/(2σ²))`.
///
/// Derivatives factor over axes; each 1-d factor is a Hermite polynomial times
/// the Gaussian: `g^{(m)}(t) = (−1/(σ√2))^m·H_m(t/(σ√2))·g(t)`.
#[derive(Debug, Clone)]
pub struct Gaussian {
    pub amplitude: f64,
    pub center: Vec<f64>,
    pub sigma: f64,
}

impl Gaussian {
    pub fn new(amplitude: f64, center: Vec<f64>, sigma: f64) -> Self {
        assert!(sigma > 0.0 && !center.is_empty());
        Gaussian { amplitude, center, sigma }
    }
}

/// Physicists' Hermite polynomial `H_m(u)` by recurrence.
fn hermite(m: u32, u: f64) -> f64 {
    let mut h0 = 1.0;
    if m == 0 {
        return h0;
    }
    let mut h1 = 2.0 * u;
    for k in 1..m {
        let h2 = 2.0 * u * h1 - 2.0 * k as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

impl SmoothFn for Gaussian {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let q: f64 = self
            .center
            .iter()
            .zip(x)
            .map(|(c, xi)| (xi - c) * (xi - c))
            .sum();
        self.amplitude * (-q / (2.0 * self.sigma * self.sigma)).exp()
    }

    fn derivative(&self, alpha: &MultiIndex, x: &[f64]) -> f64 {
        let s = self.sigma * std::f64::consts::SQRT_2;
        let mut acc = self.amplitude;
        for axis in 0..self.dim() {
            let t = x[axis] - self.center[axis];
            let m = alpha.component(axis);
            acc *= (-1.0 / s).powi(m as i32) * hermite(m, t / s) * (-t * t / (s * s)).exp();
        }
        acc
    }
}

/// Regularized radial power `(s² + |x−c|²)^{σ/2}`; with negative `σ` this is a
/// smoothed power singularity of the given exponent.
///
/// Derivatives are produced by a small exact symbolic engine: every partial
/// derivative is a sum of terms `coef·G^{(m)}(u)·Π (x_k−c_k)^{e_k}` with
/// `u = s² + |x−c|²` and `G(u) = u^{σ/2}`, closed under differentiation.
#[derive(Debug, Clone)]
pub struct RadialPower {
    pub exponent: f64,
    pub smoothing: f64,
    pub center: Vec<f64>,
}

impl RadialPower {
    pub fn new(exponent: f64, smoothing: f64, center: Vec<f64>) -> Self {
        assert!(smoothing > 0.0 && !center.is_empty());
        RadialPower { exponent, smoothing, center }
    }

    /// Symbolic terms of `D^α (G∘u)` keyed by `(m, e)`.
    fn symbolic_terms(&self, alpha: &MultiIndex) -> Vec<(f64, u32, MultiIndex)> {
        use std::collections::BTreeMap;
        let dim = self.dim();
        let mut terms: BTreeMap<(u32, MultiIndex), f64> = BTreeMap::new();
        terms.insert((0, MultiIndex::zero(dim)), 1.0);
        for axis in 0..dim {
            for _ in 0..alpha.component(axis) {
                let mut next: BTreeMap<(u32, MultiIndex), f64> = BTreeMap::new();
                for ((m, e), c) in &terms {
                    // d/dx_j [G^{(m)}(u)·Δ^e] = 2Δ_j·G^{(m+1)}·Δ^e + e_j·G^{(m)}·Δ^{e−e_j}.
                    *next.entry((m + 1, e.bump(axis))).or_insert(0.0) += 2.0 * c;
                    let ej = e.component(axis);
                    if ej > 0 {
                        let mut comps = e.components().to_vec();
                        comps[axis] -= 1;
                        *next.entry((*m, MultiIndex::new(comps))).or_insert(0.0) +=
                            c * ej as f64;
                    }
                }
                terms = next;
            }
        }
        terms.into_iter().map(|((m, e), c)| (c, m, e)).collect()
    }
}

impl SmoothFn for RadialPower {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let u: f64 = self.smoothing * self.smoothing
            + self
                .center
                .iter()
                .zip(x)
                .map(|(c, xi)| (xi - c) * (xi - c))
                .sum::<f64>();
        u.powf(self.exponent / 2.0)
    }

    fn derivative(&self, alpha: &MultiIndex, x: &[f64]) -> f64 {
        let u: f64 = self.smoothing * self.smoothing
            + self
                .center
                .iter()
                .zip(x)
                .map(|(c, xi)| (xi - c) * (xi - c))
                .sum::<f64>();
        let half = self.exponent / 2.0;
        let mut acc = 0.0;
        for (c, m, e) in self.symbolic_terms(alpha) {
            // G^{(m)}(u) = (σ/2)(σ/2−1)···(σ/2−m+1)·u^{σ/2−m}.
            let mut gcoef = 1.0;
            for i in 0..m {
                gcoef *= half - i as f64;
            }
            let mono: f64 = e
                .components()
                .iter()
                .zip(x.iter().zip(&self.center))
                .map(|(&p, (&xi, &ci))| (xi - ci).powi(p as i32))
                .product();
            acc += c * gcoef * u.powf(half - m as f64) * mono;
        }
        acc
    }
}

/// Scales and offsets another smooth function: `a·f + b`.
pub struct AffineOf<F: SmoothFn> {
    pub inner: F,
    pub scale: f64,
    pub offset: f64,
}

impl<F: SmoothFn> SmoothFn for AffineOf<F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.scale * self.inner.eval(x) + self.offset
    }

    fn derivative(&self, alpha: &MultiIndex, x: &[f64]) -> f64 {
        let base = self.scale * self.inner.derivative(alpha, x);
        if alpha.is_zero() {
            base + self.offset
        } else {
            base
        }
    }
}
