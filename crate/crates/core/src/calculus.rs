//! Symbolic and numerical calculus helpers.
//!
//! * [`ChainTerm`] enumerates the exact expansion of `D^α g` for compositions
//!   `g(x) = f(x̄, y + λ h(x))` with `x = (x̄, y)`: every term has the shape
//!   `c · λ^s · (D^β f)(x̄, y + λh(x)) · Π_i (D^{γ_i} h)^{n_i}` with rational
//!   `c`. Two structural invariants hold for each term of the expansion of
//!   `D^α`: the factor orders satisfy `Σ_i n_i (|γ_i| − 1) = |α| − |β|`, and
//!   the power of `λ` equals the number of `h`-factors counted with
//!   multiplicity (so `s = 0` exactly for the factor-free term).
//! * [`fd_derivative`] is a nested central-difference oracle used to validate
//!   symbolic derivatives.
//! * [`smootherstep`] is the degree-9 polynomial ramp with four vanishing
//!   derivatives at both ends; it is the C⁴ glue used by bump functions and
//!   partitions of unity elsewhere in the crate.
//! * [`ConeMollifier`] averages a function over a fixed bump supported
//!   strictly inside an upward cone `{ y > M |x̄| }`, so that mollification of
//!   functions on a Lipschitz epigraph never evaluates them below the graph.

use num_rational::Rational64;
use num_traits::Zero;
use std::collections::BTreeMap;
use std::fmt;

use crate::analytic::SmoothFn;
use crate::error::{Error, Result};
use crate::index::MultiIndex;
use crate::quad::GaussLegendre;

// ---------------------------------------------------------------------------
// Smooth ramp
// ---------------------------------------------------------------------------

/// Coefficients of `u⁵(126 − 420u + 540u² − 315u³ + 70u⁴)` in ascending order.
const RAMP_COEFFS: [f64; 10] = [
    0.0, 0.0, 0.0, 0.0, 0.0, 126.0, -420.0, 540.0, -315.0, 70.0,
];

/// C⁴ ramp: 0 for `u ≤ 0`, 1 for `u ≥ 1`, with the first four derivatives
/// vanishing at both ends.
pub fn smootherstep(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        // Horner cancellation among the ±O(10²) coefficients can overshoot
        // the exact range by ~1e-14 near the ends; clip it away so monotone
        // range claims survive exact comparisons downstream.
        RAMP_COEFFS.iter().rev().fold(0.0, |acc, c| acc * u + c).clamp(0.0, 1.0)
    }
}

/// `m`-th derivative of [`smootherstep`]; identically zero outside `(0, 1)`
/// for `1 ≤ m ≤ 4` by construction.
pub fn smootherstep_deriv(m: u32, u: f64) -> f64 {
    if m == 0 {
        return smootherstep(u);
    }
    if u <= 0.0 || u >= 1.0 {
        return 0.0;
    }
    let mut coeffs: Vec<f64> = RAMP_COEFFS.to_vec();
    for _ in 0..m {
        coeffs = coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| k as f64 * c)
            .collect();
        if coeffs.is_empty() {
            return 0.0;
        }
    }
    coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c)
}

// ---------------------------------------------------------------------------
// Chain-rule expansion
// ---------------------------------------------------------------------------

/// One term `c λ^s (D^β f)(x̄, y + λh(x)) Π_i (D^{γ_i} h)^{n_i}` of the
/// expansion of `D^α [f(x̄, y + λh(x))]`. Factors are kept sorted by their
/// multi-index, so equal terms compare equal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ChainTerm {
    pub lambda_power: u32,
    pub beta: MultiIndex,
    pub factors: Vec<(MultiIndex, u32)>,
    pub coeff: Rational64,
}

impl ChainTerm {
    fn identity(dim: usize) -> ChainTerm {
        ChainTerm {
            lambda_power: 0,
            beta: MultiIndex::zero(dim),
            factors: Vec::new(),
            coeff: Rational64::new(1, 1),
        }
    }

    fn with_factor(mut self, gamma: MultiIndex, count: u32) -> ChainTerm {
        match self.factors.iter_mut().find(|(g, _)| *g == gamma) {
            Some((_, n)) => *n += count,
            None => {
                self.factors.push((gamma, count));
                self.factors.sort();
            }
        }
        self
    }

    /// `Σ_i n_i (|γ_i| − 1)`, which must equal `|α| − |β|`.
    pub fn factor_order_excess(&self) -> i64 {
        self.factors
            .iter()
            .map(|(g, n)| *n as i64 * (g.order() as i64 - 1))
            .sum()
    }

    /// Total `h`-factor multiplicity `Σ_i n_i`, which must equal the power of
    /// `λ`.
    pub fn factor_multiplicity(&self) -> u32 {
        self.factors.iter().map(|(_, n)| n).sum()
    }

    /// Evaluates the term at `x = (x̄, y)` for inner function `h` and outer
    /// function `f`.
    pub fn eval(&self, f: &dyn SmoothFn, h: &dyn SmoothFn, lambda: f64, x: &[f64]) -> f64 {
        let n = x.len();
        let mut inner = x.to_vec();
        inner[n - 1] = x[n - 1] + lambda * h.eval(x);
        let mut value = rational_to_f64(self.coeff)
            * lambda.powi(self.lambda_power as i32)
            * f.derivative(&self.beta, &inner);
        for (gamma, count) in &self.factors {
            value *= h.derivative(gamma, x).powi(*count as i32);
        }
        value
    }
}

impl fmt::Display for ChainTerm {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(out, "{} lambda^{} D[{}]f", self.coeff, self.lambda_power, self.beta)?;
        for (gamma, count) in &self.factors {
            write!(out, " (D[{gamma}]h)^{count}")?;
        }
        Ok(())
    }
}

/// Full expansion of `D^α [f(x̄, y + λh(x))]`, merged and sorted canonically.
pub fn chain_terms(alpha: &MultiIndex) -> Vec<ChainTerm> {
    let dim = alpha.dim();
    let mut terms = vec![ChainTerm::identity(dim)];
    for axis in 0..dim {
        for _ in 0..alpha.component(axis) {
            let mut expanded = Vec::new();
            for term in &terms {
                expanded.extend(differentiate(term, axis, dim));
            }
            terms = merge(expanded);
        }
    }
    terms
}

/// Evaluates the whole expansion at a point.
pub fn chain_eval(
    terms: &[ChainTerm],
    f: &dyn SmoothFn,
    h: &dyn SmoothFn,
    lambda: f64,
    x: &[f64],
) -> f64 {
    terms.iter().map(|t| t.eval(f, h, lambda, x)).sum()
}

/// Product rule for one term with respect to axis `j`. The inner argument
/// `y + λh(x)` contributes a direct `β + e_j` term plus a `λ ∂_j h` term in
/// the last slot, and each `h`-factor differentiates in place.
fn differentiate(term: &ChainTerm, j: usize, dim: usize) -> Vec<ChainTerm> {
    let last = dim - 1;
    let mut out = Vec::with_capacity(2 + term.factors.len());
    // (D^β f) picks up e_j through the explicit x-dependence.
    let mut direct = term.clone();
    direct.beta = direct.beta.bump(j);
    out.push(direct);
    // ...and e_n through the inner argument, spending one power of λ.
    let mut inner = term.clone();
    inner.beta = inner.beta.bump(last);
    inner.lambda_power += 1;
    out.push(inner.with_factor(MultiIndex::unit(dim, j), 1));
    // Each factor (D^γ h)^n differentiates to n (D^γ h)^{n−1} (D^{γ+e_j} h).
    for (i, (gamma, count)) in term.factors.iter().enumerate() {
        let mut t = term.clone();
        t.coeff *= Rational64::new(*count as i64, 1);
        if *count == 1 {
            t.factors.remove(i);
        } else {
            t.factors[i].1 -= 1;
        }
        out.push(t.with_factor(gamma.bump(j), 1));
    }
    out
}

fn merge(terms: Vec<ChainTerm>) -> Vec<ChainTerm> {
    let mut merged: BTreeMap<(u32, MultiIndex, Vec<(MultiIndex, u32)>), Rational64> =
        BTreeMap::new();
    for t in terms {
        *merged
            .entry((t.lambda_power, t.beta, t.factors))
            .or_insert_with(Rational64::zero) += t.coeff;
    }
    merged
        .into_iter()
        .filter(|(_, c)| !c.is_zero())
        .map(|((lambda_power, beta, factors), coeff)| ChainTerm {
            lambda_power,
            beta,
            factors,
            coeff,
        })
        .collect()
}

fn rational_to_f64(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

// ---------------------------------------------------------------------------
// Finite-difference oracle
// ---------------------------------------------------------------------------

/// Step sizes balancing truncation against `ε/h^order` rounding noise of
/// nested central differences.
pub fn fd_step(order: u32) -> f64 {
    match order {
        0 | 1 => 1e-4,
        2 => 1e-3,
        3 => 5e-3,
        _ => 1e-2,
    }
}

/// Nested central differences: `D^α` applied one axis unit at a time.
pub fn fd_derivative<F>(f: &F, alpha: &MultiIndex, x: &[f64], h: f64) -> f64
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    match (0..alpha.dim()).find(|&a| alpha.component(a) > 0) {
        None => f(x),
        Some(axis) => {
            let mut comps = alpha.components().to_vec();
            comps[axis] -= 1;
            let lower = MultiIndex::new(comps);
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[axis] += h;
            xm[axis] -= h;
            (fd_derivative(f, &lower, &xp, h) - fd_derivative(f, &lower, &xm, h)) / (2.0 * h)
        }
    }
}

/// Richardson-extrapolated variant removing the leading `h²` error term.
pub fn fd_derivative_refined<F>(f: &F, alpha: &MultiIndex, x: &[f64]) -> f64
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let h = fd_step(alpha.order());
    let coarse = fd_derivative(f, alpha, x, h);
    let fine = fd_derivative(f, alpha, x, 0.5 * h);
    (4.0 * fine - coarse) / 3.0
}

// ---------------------------------------------------------------------------
// Cone mollifier
// ---------------------------------------------------------------------------

/// Averaging against a smooth bump supported strictly inside the open cone
/// `{ (x̄, y) : y > slope·|x̄| }`, at unit distance scale: the support sits in
/// `{ |x̄| ≤ R_x } × [1 − R_y, 1 + R_y]` with `slope·R_x` safely below
/// `1 − R_y`. Averages are taken as `Σ_i ŵ_i f(x + t z_i)`, with nodes `z_i`
/// and weights `ŵ_i` stored from a tensor Gauss–Legendre rule and normalized
/// so a constant function is reproduced exactly.
#[derive(Debug, Clone)]
pub struct ConeMollifier {
    dim: usize,
    slope: f64,
    nodes: Vec<(Vec<f64>, f64)>,
}

/// Nodes per axis of the stored tensor quadrature.
const MOLLIFIER_NODES_PER_AXIS: usize = 24;

impl ConeMollifier {
    pub fn new(dim: usize, slope: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidArgument(
                "cone mollifier needs at least two dimensions".into(),
            ));
        }
        if !(slope > 0.0) || !slope.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "cone slope must be positive and finite, got {slope}"
            )));
        }
        let rx = (0.5 / slope).min(0.8);
        let ry = 0.2;
        let rule = GaussLegendre::new(MOLLIFIER_NODES_PER_AXIS);
        let axis =
            |lo: f64, hi: f64| -> Vec<(f64, f64)> {
                let mid = 0.5 * (lo + hi);
                let half = 0.5 * (hi - lo);
                rule.nodes()
                    .iter()
                    .zip(rule.weights())
                    .map(|(&u, &w)| (mid + half * u, w * half))
                    .collect()
            };
        let bump = |u: f64| -> f64 {
            if u.abs() < 1.0 {
                (-1.0 / (1.0 - u * u)).exp()
            } else {
                0.0
            }
        };
        // Tensor product over n−1 horizontal axes and the vertical axis.
        let horizontal = axis(-rx, rx);
        let vertical = axis(1.0 - ry, 1.0 + ry);
        let mut nodes: Vec<(Vec<f64>, f64)> = vec![(Vec::new(), 1.0)];
        for _ in 0..dim - 1 {
            let mut next = Vec::with_capacity(nodes.len() * horizontal.len());
            for (z, w) in &nodes {
                for &(c, cw) in &horizontal {
                    let mut zn = z.clone();
                    zn.push(c);
                    next.push((zn, w * cw));
                }
            }
            nodes = next;
        }
        let mut full = Vec::with_capacity(nodes.len() * vertical.len());
        for (z, w) in &nodes {
            let r = z.iter().map(|c| c * c).sum::<f64>().sqrt();
            let radial = bump(r / rx);
            for &(y, yw) in &vertical {
                let density = radial * bump((y - 1.0) / ry);
                if density > 0.0 {
                    let mut zn = z.clone();
                    zn.push(y);
                    full.push((zn, w * yw * density));
                }
            }
        }
        let mass: f64 = full.iter().map(|(_, w)| w).sum();
        if !(mass > 0.0) {
            return Err(Error::DegenerateSample("mollifier bump mass vanished".into()));
        }
        for node in &mut full {
            node.1 /= mass;
        }
        Ok(ConeMollifier { dim, slope, nodes: full })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    /// Quadrature offsets and weights; offsets all lie strictly inside the
    /// cone.
    pub fn nodes(&self) -> &[(Vec<f64>, f64)] {
        &self.nodes
    }

    /// `Σ_i ŵ_i f(x + t z_i)` — the mollified value at distance scale `t`.
    pub fn mollify(&self, f: &dyn SmoothFn, x: &[f64], t: f64) -> Result<f64> {
        self.mollify_derivative(f, &MultiIndex::zero(self.dim), x, t)
    }

    /// Mollified `D^α f`; mollification and differentiation commute, so this
    /// is also `D^α` of the mollified function.
    pub fn mollify_derivative(
        &self,
        f: &dyn SmoothFn,
        alpha: &MultiIndex,
        x: &[f64],
        t: f64,
    ) -> Result<f64> {
        if x.len() != self.dim || alpha.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        if !(t > 0.0) {
            return Err(Error::InvalidArgument(format!("mollifier scale must be > 0, got {t}")));
        }
        let mut acc = 0.0;
        let mut shifted = vec![0.0; self.dim];
        for (z, w) in &self.nodes {
            for a in 0..self.dim {
                shifted[a] = x[a] + t * z[a];
            }
            acc += w * f.derivative(alpha, &shifted);
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Signed;
    use crate::analytic::{Gaussian, Polynomial, Sinusoid};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ramp_endpoint_smoothness_and_midpoint() {
        assert_eq!(smootherstep(-0.5), 0.0);
        assert_eq!(smootherstep(0.0), 0.0);
        assert_eq!(smootherstep(1.0), 1.0);
        assert_eq!(smootherstep(2.0), 1.0);
        assert_relative_eq!(smootherstep(0.5), 0.5);
        // First four derivatives vanish at both ends (one-sided limits; the
        // fourth derivative still grows linearly away from the ends, hence
        // the loose ceiling).
        for m in 1..=4 {
            for u in [1e-9, 1.0 - 1e-9] {
                assert!(
                    smootherstep_deriv(m, u).abs() < 1e-4,
                    "m={m} u={u}: {}",
                    smootherstep_deriv(m, u)
                );
            }
        }
        // Monotone on [0, 1].
        for i in 0..100 {
            let u = i as f64 / 100.0;
            assert!(smootherstep_deriv(1, u) >= 0.0);
        }
    }

    #[test]
    fn ramp_derivatives_match_finite_differences() {
        for m in 1..=4u32 {
            for u in [0.15, 0.4, 0.83] {
                let alpha = MultiIndex::new(vec![m]);
                let f = |x: &[f64]| smootherstep(x[0]);
                let fd = fd_derivative_refined(&f, &alpha, &[u]);
                let exact = smootherstep_deriv(m, u);
                assert_relative_eq!(exact, fd, max_relative = 1e-3, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn first_order_chain_terms_have_textbook_shape() {
        // ∂_x [f(x, y + λh)] = f_x + λ h_x f_y.
        let terms = chain_terms(&MultiIndex::new(vec![1, 0]));
        assert_eq!(terms.len(), 2);
        let plain = &terms[0];
        assert_eq!(plain.lambda_power, 0);
        assert_eq!(plain.beta, MultiIndex::new(vec![1, 0]));
        assert!(plain.factors.is_empty());
        assert_eq!(plain.coeff, Rational64::new(1, 1));
        let inner = &terms[1];
        assert_eq!(inner.lambda_power, 1);
        assert_eq!(inner.beta, MultiIndex::new(vec![0, 1]));
        assert_eq!(inner.factors, vec![(MultiIndex::new(vec![1, 0]), 1)]);
    }

    #[test]
    fn second_vertical_derivative_matches_hand_expansion() {
        // ∂²_y [f(x, y + λh)] = f_yy (1 + λ h_y)² + λ h_yy f_y
        //                     = f_yy + 2λ h_y f_yy + λ² h_y² f_yy + λ h_yy f_y.
        let terms = chain_terms(&MultiIndex::new(vec![0, 2]));
        assert_eq!(terms.len(), 4);
        let find = |s: u32, beta: &[u32], factors: &[(Vec<u32>, u32)]| -> Rational64 {
            let want: Vec<(MultiIndex, u32)> = factors
                .iter()
                .map(|(g, n)| (MultiIndex::new(g.clone()), *n))
                .collect();
            terms
                .iter()
                .find(|t| {
                    t.lambda_power == s
                        && t.beta == MultiIndex::new(beta.to_vec())
                        && t.factors == want
                })
                .map(|t| t.coeff)
                .unwrap_or_else(Rational64::zero)
        };
        assert_eq!(find(0, &[0, 2], &[]), Rational64::new(1, 1));
        assert_eq!(find(1, &[0, 2], &[(vec![0, 1], 1)]), Rational64::new(2, 1));
        assert_eq!(find(2, &[0, 2], &[(vec![0, 1], 2)]), Rational64::new(1, 1));
        assert_eq!(find(1, &[0, 1], &[(vec![0, 2], 1)]), Rational64::new(1, 1));
    }

    #[test]
    fn invariants_hold_for_all_terms_up_to_order_four() {
        for alpha in MultiIndex::enumerate_up_to(2, 4) {
            for term in chain_terms(&alpha) {
                assert_eq!(
                    term.factor_order_excess(),
                    alpha.order() as i64 - term.beta.order() as i64,
                    "order excess violated for α={alpha}: {term}"
                );
                assert_eq!(
                    term.lambda_power,
                    term.factor_multiplicity(),
                    "λ-power bookkeeping violated for α={alpha}: {term}"
                );
                assert_eq!(term.lambda_power == 0, term.factors.is_empty());
                assert!(!term.coeff.is_zero());
                assert!(term.coeff.is_positive());
            }
        }
    }

    #[test]
    fn axis_order_does_not_change_the_expansion() {
        // Differentiate x then y, vs y then x, for α = (1,1): same merged set.
        let via_enumeration = chain_terms(&MultiIndex::new(vec![1, 1]));
        let mut manual = vec![ChainTerm::identity(2)];
        for axis in [1usize, 0] {
            let mut next = Vec::new();
            for t in &manual {
                next.extend(differentiate(t, axis, 2));
            }
            manual = merge(next);
        }
        assert_eq!(via_enumeration, manual);
    }

    #[test]
    fn chain_eval_matches_finite_differences() {
        let f = Gaussian::new(0.9, vec![0.2, -0.1], 0.8);
        let h = Sinusoid::new(0.4, vec![0.9, 0.5], 1.1);
        let lambda = 1.37;
        let g = |x: &[f64]| {
            let inner = [x[0], x[1] + lambda * h.eval(x)];
            f.eval(&inner)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for alpha in MultiIndex::enumerate_up_to(2, 3) {
            let terms = chain_terms(&alpha);
            for _ in 0..8 {
                let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                let symbolic = chain_eval(&terms, &f, &h, lambda, &x);
                let numeric = fd_derivative_refined(&g, &alpha, &x);
                let scale = symbolic.abs().max(numeric.abs()).max(1e-3);
                assert!(
                    (symbolic - numeric).abs() <= 2e-4 * scale,
                    "α={alpha} x={x:?}: {symbolic} vs {numeric}"
                );
            }
        }
    }

    #[test]
    fn mollifier_nodes_sit_strictly_inside_the_cone() {
        for slope in [0.1, 0.35, 1.0, 2.3, 4.0] {
            let m = ConeMollifier::new(2, slope).unwrap();
            // Margin: a tenth of the support diameter.
            let rx = (0.5 / slope).min(0.8);
            let diam = ((2.0 * rx).powi(2) + 0.4f64.powi(2)).sqrt();
            for (z, w) in m.nodes() {
                assert!(*w > 0.0);
                let horizontal = z[0].abs();
                assert!(
                    z[1] - slope * horizontal >= 0.1 * diam,
                    "slope {slope}: node {z:?} too close to cone boundary"
                );
            }
        }
    }

    #[test]
    fn constants_are_reproduced_exactly() {
        let m = ConeMollifier::new(2, 1.0).unwrap();
        let one = Polynomial::constant(2, 1.0);
        for t in [1e-3, 0.05, 0.7] {
            assert!((m.mollify(&one, &[0.3, -2.0], t).unwrap() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn mollification_converges_to_the_point_value() {
        let m = ConeMollifier::new(2, 0.8).unwrap();
        let f = Gaussian::new(1.0, vec![0.0, 0.0], 0.7);
        let x = [0.2, 0.1];
        let mut last = f64::INFINITY;
        for t in [0.4, 0.2, 0.1, 0.05] {
            let err = (m.mollify(&f, &x, t).unwrap() - f.eval(&x)).abs();
            assert!(err < last, "no improvement at t={t}");
            last = err;
        }
        assert!(last < 2e-2);
    }

    #[test]
    fn mollified_derivative_commutes_with_differentiation() {
        let m = ConeMollifier::new(2, 1.5).unwrap();
        let f = Sinusoid::new(1.0, vec![1.2, 0.6], 0.2);
        let t = 0.3;
        let x = [0.4, -0.7];
        for alpha in MultiIndex::enumerate_up_to(2, 2) {
            let direct = m.mollify_derivative(&f, &alpha, &x, t).unwrap();
            let g = |p: &[f64]| m.mollify(&f, p, t).unwrap();
            let numeric = fd_derivative_refined(&g, &alpha, &x);
            assert_relative_eq!(direct, numeric, max_relative = 1e-5, epsilon = 1e-7);
        }
    }

    #[test]
    fn degenerate_mollifier_parameters_are_rejected() {
        assert!(ConeMollifier::new(1, 1.0).is_err());
        assert!(ConeMollifier::new(2, 0.0).is_err());
        assert!(ConeMollifier::new(2, f64::NAN).is_err());
    }
}
