//! Weighted Hardy-type inequality on finite intervals.
//!
//! For `0 < a < b`, `0 < c < d`, `β ∈ ℝ`, `p ≥ 1`, and `f ≥ 0` the shifted
//! inner average obeys
//!
//! ```text
//! ( ∫_a^b ( x^β ∫_{x+c}^{x+d} f(y) dy )^p dx )^{1/p}
//!     ≤  C · ( ∫_{a+c}^{b+d} ( f(x) · x^{β+1} )^p dx )^{1/p},
//! C = ∫_{1+c/b}^{1+d/a} t^{-(β+1+1/p)} dt.
//! ```
//!
//! [`hardy_check`] evaluates both sides and the constant by adaptive
//! quadrature so the inequality can be exercised on arbitrary integrands.
//! The bound is only asserted for nonnegative `f`; a sign violation during
//! evaluation is reported rather than silently ignored.

use std::cell::Cell;

use crate::error::{Error, Result};
use crate::quad::AdaptiveQuad;

/// Evaluated sides of the inequality for one instance.
#[derive(Debug, Clone)]
pub struct HardyCheck {
    /// Left side `( ∫_a^b ( x^β ∫_{x+c}^{x+d} f )^p dx )^{1/p}`.
    pub lhs: f64,
    /// Sharp constant `C` of the inequality.
    pub constant: f64,
    /// Full right side `C · ( ∫_{a+c}^{b+d} (f(x) x^{β+1})^p dx )^{1/p}`.
    pub rhs: f64,
    /// Whether `lhs ≤ rhs` up to a `1e-9` relative slack.
    pub holds: bool,
    /// `f` returned a negative value somewhere; the bound is then void.
    pub saw_negative: bool,
}

/// Evaluates the weighted Hardy inequality for `f` on the window
/// `(a, b) × (c, d)` with weight exponent `β` and integrability `p`.
pub fn hardy_check<F>(f: F, a: f64, b: f64, c: f64, d: f64, beta: f64, p: f64) -> Result<HardyCheck>
where
    F: Fn(f64) -> f64,
{
    for (name, v) in [("a", a), ("b", b), ("c", c), ("d", d)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "interval endpoint {name} must be positive and finite, got {v}"
            )));
        }
    }
    if a >= b || c >= d {
        return Err(Error::InvalidArgument(format!(
            "need a < b and c < d, got a={a}, b={b}, c={c}, d={d}"
        )));
    }
    if !(p >= 1.0) || !p.is_finite() || !beta.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "need finite β and p ≥ 1, got β={beta}, p={p}"
        )));
    }

    let saw_negative = Cell::new(false);
    let sample = |y: f64| -> f64 {
        let v = f(y);
        if v < 0.0 {
            saw_negative.set(true);
        }
        v
    };

    let outer = AdaptiveQuad::new(1e-10);
    let inner = AdaptiveQuad::new(1e-12);

    let lhs_pow = outer.integrate(
        &|x: f64| -> Result<f64> {
            let avg = inner.integrate_plain(&sample, x + c, x + d)?;
            Ok((x.powf(beta) * avg).abs().powf(p))
        },
        a,
        b,
    )?;
    let lhs = lhs_pow.max(0.0).powf(1.0 / p);

    let rhs_pow = outer.integrate_plain(
        |x: f64| (sample(x) * x.powf(beta + 1.0)).abs().powf(p),
        a + c,
        b + d,
    )?;
    let exponent = beta + 1.0 + 1.0 / p;
    let constant =
        outer.integrate_plain(|t: f64| t.powf(-exponent), 1.0 + c / b, 1.0 + d / a)?;
    let rhs = constant * rhs_pow.max(0.0).powf(1.0 / p);

    Ok(HardyCheck {
        lhs,
        constant,
        rhs,
        holds: lhs <= rhs * (1.0 + 1e-9),
        saw_negative: saw_negative.get(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unit_window_with_constant_integrand_has_closed_form() {
        // a=1, b=2, c=1, d=2, β=0, p=1, f ≡ 1: the left side integrates the
        // constant window length 1; C = ∫_{3/2}^{3} t^{-2} dt = 1/3; the
        // right integral is ∫_2^4 x dx = 6, so rhs = 2.
        let out = hardy_check(|_| 1.0, 1.0, 2.0, 1.0, 2.0, 0.0, 1.0).unwrap();
        assert_relative_eq!(out.lhs, 1.0, epsilon = 1e-8);
        assert_relative_eq!(out.constant, 1.0 / 3.0, epsilon = 1e-8);
        assert_relative_eq!(out.rhs, 2.0, epsilon = 1e-8);
        assert!(out.holds);
        assert!(!out.saw_negative);
    }

    #[test]
    fn zero_integrand_holds_with_both_sides_zero() {
        let out = hardy_check(|_| 0.0, 0.5, 3.0, 0.2, 1.7, 1.5, 2.0).unwrap();
        assert_eq!(out.lhs, 0.0);
        assert_eq!(out.rhs, 0.0);
        assert!(out.holds);
    }

    #[test]
    fn random_nonnegative_instances_satisfy_the_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..200 {
            let a = 10f64.powf(rng.gen_range(-1.0..1.0));
            let b = a * (1.0 + 10f64.powf(rng.gen_range(-1.0..0.5)));
            let c = 10f64.powf(rng.gen_range(-1.0..1.0));
            let d = c * (1.0 + 10f64.powf(rng.gen_range(-1.0..0.5)));
            let beta = rng.gen_range(-2.0..2.0);
            let p = *[1.0, 1.5, 2.0, 3.0].get(trial % 4).unwrap();
            let (q0, q1, q2) = (
                rng.gen_range(0.0..2.0),
                rng.gen_range(0.0..2.0),
                rng.gen_range(0.0..1.0),
            );
            let f = |y: f64| q0 + q1 * y + q2 * y * y;
            let out = hardy_check(f, a, b, c, d, beta, p).unwrap();
            assert!(!out.saw_negative);
            assert!(
                out.lhs <= out.rhs * (1.0 + 1e-9),
                "trial {trial}: lhs {} > rhs {} (a={a}, b={b}, c={c}, d={d}, β={beta}, p={p})",
                out.lhs,
                out.rhs,
            );
        }
    }

    #[test]
    fn sign_violations_are_reported() {
        let out = hardy_check(|y| y - 3.0, 1.0, 2.0, 0.5, 1.5, 0.0, 2.0).unwrap();
        assert!(out.saw_negative);
    }

    #[test]
    fn degenerate_windows_and_exponents_error() {
        let f = |_: f64| 1.0;
        assert!(hardy_check(f, 2.0, 1.0, 1.0, 2.0, 0.0, 1.0).is_err());
        assert!(hardy_check(f, 1.0, 2.0, 2.0, 2.0, 0.0, 1.0).is_err());
        assert!(hardy_check(f, 0.0, 2.0, 1.0, 2.0, 0.0, 1.0).is_err());
        assert!(hardy_check(f, 1.0, 2.0, -1.0, 2.0, 0.0, 1.0).is_err());
        assert!(hardy_check(f, 1.0, 2.0, 1.0, 2.0, 0.0, 0.5).is_err());
        assert!(hardy_check(f, 1.0, 2.0, 1.0, 2.0, f64::NAN, 1.0).is_err());
    }
}
