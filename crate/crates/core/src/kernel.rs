//! Compactly supported moment kernels on `[1, Λ]`.
//!
//! A kernel `τ(λ) = w(λ)·P(u(λ))` is built from the C^∞ bump
//! `w(λ) = exp(−1/(λ−1) − 1/(Λ−λ))` and a polynomial `P` of degree `K` in the
//! rescaled variable `u = (2λ − (1+Λ))/(Λ−1) ∈ [−1, 1]`, chosen so that
//!
//! ```text
//! ∫ τ(λ) dλ = 1,   ∫ λ^k τ(λ) dλ = 0   for k = 1, …, K.
//! ```
//!
//! These vanishing moments make weighted averages of the form
//! `∫ f(y + λ δ) τ(λ) dλ` reproduce polynomials in `y` up to degree `K`
//! exactly, which is the property extension operators built on top of this
//! kernel rely on. The linear system for `P` is assembled with adaptive
//! quadrature and solved by SVD; verification helpers use composite Simpson
//! sums so that checking a kernel never shares code with constructing it.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::quad::{composite_simpson, AdaptiveQuad, GaussLegendre};

/// Maximum acceptable condition number for the moment system.
const CONDITION_LIMIT: f64 = 1e12;

/// A kernel with unit mass and `degree` vanishing moments on `[1, lambda_max]`.
#[derive(Debug, Clone)]
pub struct MomentKernel {
    lambda_max: f64,
    degree: usize,
    /// Coefficients of `P` in monomials of the rescaled variable `u`.
    coeffs: Vec<f64>,
}

impl MomentKernel {
    pub fn new(lambda_max: f64, degree: usize) -> Result<Self> {
        if !(lambda_max > 1.0) || !lambda_max.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "kernel support endpoint must satisfy Λ > 1, got {lambda_max}"
            )));
        }
        let m = degree + 1;
        let quad = AdaptiveQuad::new(1e-13);
        let mut a = DMatrix::<f64>::zeros(m, m);
        for k in 0..m {
            for j in 0..m {
                let entry = quad.integrate_plain(
                    &|lambda: f64| {
                        let u = rescale(lambda, lambda_max);
                        weight(lambda, lambda_max) * lambda.powi(k as i32) * u.powi(j as i32)
                    },
                    1.0,
                    lambda_max,
                )?;
                a[(k, j)] = entry;
            }
        }
        let mut rhs = DVector::<f64>::zeros(m);
        rhs[0] = 1.0;
        let svd = a.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if condition > CONDITION_LIMIT {
            return Err(Error::IllConditioned { condition });
        }
        let sol = svd
            .solve(&rhs, 0.0)
            .map_err(|_| Error::IllConditioned { condition })?;
        Ok(MomentKernel {
            lambda_max,
            degree,
            coeffs: sol.iter().copied().collect(),
        })
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// Kernel value; identically zero outside the open interval `(1, Λ)`.
    pub fn eval(&self, lambda: f64) -> f64 {
        let w = weight(lambda, self.lambda_max);
        if w == 0.0 {
            return 0.0;
        }
        let u = rescale(lambda, self.lambda_max);
        // Horner evaluation of P(u).
        let p = self.coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c);
        w * p
    }

    /// `∫ λ^k τ(λ) dλ` via a composite Simpson rule with `panels` panels.
    /// This is the verification path: it shares no quadrature machinery with
    /// the adaptive rule used to assemble the kernel.
    pub fn moment_simpson(&self, k: usize, panels: usize) -> f64 {
        composite_simpson(
            |lambda: f64| lambda.powi(k as i32) * self.eval(lambda),
            1.0,
            self.lambda_max,
            panels,
        )
    }

    /// All moments `k = 0, …, degree` via [`Self::moment_simpson`].
    pub fn moments_simpson(&self, panels: usize) -> Vec<f64> {
        (0..=self.degree).map(|k| self.moment_simpson(k, panels)).collect()
    }

    /// `∫ |τ(λ)| dλ`. The integrand is split at the sign changes of `P`,
    /// located by a dense scan plus bisection, and each smooth piece is
    /// integrated adaptively.
    pub fn l1_norm(&self) -> Result<f64> {
        let poly = |u: f64| self.coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c);
        let scan = 512;
        let mut cuts = vec![1.0];
        let mut prev_u = -1.0;
        let mut prev_sign = poly(prev_u).signum();
        for i in 1..=scan {
            let u = -1.0 + 2.0 * i as f64 / scan as f64;
            let sign = poly(u).signum();
            if sign != prev_sign && prev_sign != 0.0 && sign != 0.0 {
                let (mut lo, mut hi) = (prev_u, u);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if poly(mid).signum() == prev_sign {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let root = 0.5 * (lo + hi);
                cuts.push(unscale(root, self.lambda_max));
            }
            prev_u = u;
            prev_sign = sign;
        }
        cuts.push(self.lambda_max);
        let quad = AdaptiveQuad::new(1e-11);
        let mut total = 0.0;
        for pair in cuts.windows(2) {
            if pair[1] > pair[0] {
                total +=
                    quad.integrate_plain(&|lambda: f64| self.eval(lambda).abs(), pair[0], pair[1])?;
            }
        }
        Ok(total)
    }

    /// Nodes `λ_i` and weights `w_i τ(λ_i)` of an `n`-point Gauss–Legendre
    /// rule on `[1, Λ]`, so that `∫ F(λ) τ(λ) dλ ≈ Σ_i ŵ_i F(λ_i)`.
    pub fn quadrature(&self, n: usize) -> Vec<(f64, f64)> {
        let rule = GaussLegendre::new(n);
        let mid = 0.5 * (1.0 + self.lambda_max);
        let half = 0.5 * (self.lambda_max - 1.0);
        rule.nodes()
            .iter()
            .zip(rule.weights())
            .map(|(&x, &w)| {
                let lambda = mid + half * x;
                (lambda, w * half * self.eval(lambda))
            })
            .collect()
    }
}

fn rescale(lambda: f64, lambda_max: f64) -> f64 {
    (2.0 * lambda - (1.0 + lambda_max)) / (lambda_max - 1.0)
}

fn unscale(u: f64, lambda_max: f64) -> f64 {
    0.5 * (u * (lambda_max - 1.0) + 1.0 + lambda_max)
}

/// The C^∞ bump `exp(−1/(λ−1) − 1/(Λ−λ))`, zero outside `(1, Λ)`.
fn weight(lambda: f64, lambda_max: f64) -> f64 {
    if lambda <= 1.0 || lambda >= lambda_max {
        return 0.0;
    }
    (-1.0 / (lambda - 1.0) - 1.0 / (lambda_max - lambda)).exp()
}
