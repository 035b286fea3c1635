//! Domain descriptors: points, Lipschitz graphs and their epigraphs,
//! rotations, balls and boxes, ball coverings of finite point sets, and
//! minimally smooth (uniform Lipschitz patch) domains.

mod covering;
mod minimally_smooth;

pub use covering::{cover_by_balls, BallCover};
pub use minimally_smooth::{
    active_indices, regularize_covering, xi_bound, Membership, MinimallySmoothDomain, Patch,
    PatchRegion, XiEstimate,
};

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A point of ℝⁿ written as `x = (x̄, y)` with `x̄ ∈ ℝ^{n−1}` and `y ∈ ℝ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::InvalidArgument(
                "points need dimension at least 2".into(),
            ));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("point coordinates must be finite".into()));
        }
        Ok(Point { coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// First `n−1` coordinates.
    pub fn xbar(&self) -> &[f64] {
        &self.coords[..self.coords.len() - 1]
    }

    /// Last coordinate.
    pub fn y(&self) -> f64 {
        self.coords[self.coords.len() - 1]
    }

    pub fn dist(&self, other: &Point) -> f64 {
        euclid_dist(&self.coords, &other.coords)
    }
}

pub(crate) fn euclid_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn euclid_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Evaluation profile of a Lipschitz graph function `ψ: ℝ^{n−1} → ℝ`.
#[derive(Debug, Clone)]
pub enum GraphProfile {
    /// `ψ ≡ level`.
    Constant { level: f64 },
    /// Smoothed absolute value `ψ(x̄) = slope·(√(|x̄|² + s²) − s)`; Lipschitz
    /// constant exactly `slope`, `ψ(0) = 0`.
    SmoothedAbs { slope: f64, smoothing: f64 },
    /// `ψ(x̄) = amplitude·sin(frequency·x̄₁)`; Lipschitz constant
    /// `amplitude·frequency`.
    Sinusoid { amplitude: f64, frequency: f64 },
    /// Piecewise-linear interpolation of a 1-d knot table, extended beyond the
    /// ends with the end-segment slopes. Input dimension must be 1.
    PiecewiseLinear { knots: Vec<(f64, f64)> },
    /// Lower circular arc `ψ(t) = −√(radius² − t²)` for `|t| ≤ t_max`,
    /// extended linearly with the tangent slope beyond; even in `t`. Input
    /// dimension must be 1. Used as the local graph of a circle boundary.
    CircularArc { radius: f64, t_max: f64 },
}

/// A Lipschitz function `ψ` together with its certified bound `M`.
///
/// Construction re-checks `|ψ(a) − ψ(b)| ≤ M·|a − b|` on 2000 seeded random
/// pairs; an inconsistent profile/bound combination is rejected.
#[derive(Debug, Clone)]
pub struct LipschitzGraph {
    profile: GraphProfile,
    input_dim: usize,
    lip_bound: f64,
}

impl LipschitzGraph {
    pub fn new(profile: GraphProfile, input_dim: usize) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidArgument("graph input dimension must be ≥ 1".into()));
        }
        let lip_bound = match &profile {
            GraphProfile::Constant { .. } => 0.0,
            GraphProfile::SmoothedAbs { slope, smoothing } => {
                if *slope < 0.0 || *smoothing <= 0.0 {
                    return Err(Error::InvalidArgument(
                        "smoothed-abs profile needs slope ≥ 0 and smoothing > 0".into(),
                    ));
                }
                *slope
            }
            GraphProfile::Sinusoid { amplitude, frequency } => (amplitude * frequency).abs(),
            GraphProfile::PiecewiseLinear { knots } => {
                if input_dim != 1 {
                    return Err(Error::InvalidArgument(
                        "piecewise-linear profiles are one-dimensional".into(),
                    ));
                }
                if knots.len() < 2 || knots.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(Error::InvalidArgument(
                        "piecewise-linear profile needs ≥ 2 strictly increasing knots".into(),
                    ));
                }
                knots
                    .windows(2)
                    .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
                    .fold(0.0, f64::max)
            }
            GraphProfile::CircularArc { radius, t_max } => {
                if input_dim != 1 {
                    return Err(Error::InvalidArgument(
                        "circular-arc profiles are one-dimensional".into(),
                    ));
                }
                if !(*radius > 0.0 && *t_max > 0.0 && t_max < radius) {
                    return Err(Error::InvalidArgument(
                        "circular arc needs 0 < t_max < radius".into(),
                    ));
                }
                t_max / (radius * radius - t_max * t_max).sqrt()
            }
        };
        let graph = LipschitzGraph { profile, input_dim, lip_bound };
        graph.check_lipschitz_sampled()?;
        Ok(graph)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// The certified Lipschitz bound `M`.
    pub fn lipschitz_bound(&self) -> f64 {
        self.lip_bound
    }

    pub fn eval(&self, xbar: &[f64]) -> f64 {
        debug_assert_eq!(xbar.len(), self.input_dim);
        match &self.profile {
            GraphProfile::Constant { level } => *level,
            GraphProfile::SmoothedAbs { slope, smoothing } => {
                let q = xbar.iter().map(|t| t * t).sum::<f64>() + smoothing * smoothing;
                slope * (q.sqrt() - smoothing)
            }
            GraphProfile::Sinusoid { amplitude, frequency } => {
                amplitude * (frequency * xbar[0]).sin()
            }
            GraphProfile::PiecewiseLinear { knots } => {
                let t = xbar[0];
                let seg = match knots.iter().position(|k| k.0 > t) {
                    Some(0) => &knots[0..2],
                    Some(i) => &knots[i - 1..=i],
                    None => &knots[knots.len() - 2..],
                };
                let slope = (seg[1].1 - seg[0].1) / (seg[1].0 - seg[0].0);
                seg[0].1 + slope * (t - seg[0].0)
            }
            GraphProfile::CircularArc { radius, t_max } => {
                let t = xbar[0].abs();
                if t <= *t_max {
                    -(radius * radius - t * t).sqrt()
                } else {
                    let base = -(radius * radius - t_max * t_max).sqrt();
                    base + self.lip_bound * (t - t_max)
                }
            }
        }
    }

    /// Gradient of `ψ` (a subgradient at the finitely many kinks of the
    /// piecewise-linear profile).
    pub fn grad(&self, xbar: &[f64]) -> Vec<f64> {
        debug_assert_eq!(xbar.len(), self.input_dim);
        match &self.profile {
            GraphProfile::Constant { .. } => vec![0.0; self.input_dim],
            GraphProfile::SmoothedAbs { slope, smoothing } => {
                let q = (xbar.iter().map(|t| t * t).sum::<f64>() + smoothing * smoothing).sqrt();
                xbar.iter().map(|t| slope * t / q).collect()
            }
            GraphProfile::Sinusoid { amplitude, frequency } => {
                let mut g = vec![0.0; self.input_dim];
                g[0] = amplitude * frequency * (frequency * xbar[0]).cos();
                g
            }
            GraphProfile::PiecewiseLinear { knots } => {
                let t = xbar[0];
                let seg = match knots.iter().position(|k| k.0 > t) {
                    Some(0) => &knots[0..2],
                    Some(i) => &knots[i - 1..=i],
                    None => &knots[knots.len() - 2..],
                };
                vec![(seg[1].1 - seg[0].1) / (seg[1].0 - seg[0].0)]
            }
            GraphProfile::CircularArc { radius, t_max } => {
                let t = xbar[0];
                let a = t.abs();
                let slope = if a <= *t_max {
                    a / (radius * radius - a * a).sqrt()
                } else {
                    self.lip_bound
                };
                vec![slope * t.signum()]
            }
        }
    }

    /// Upper bound on `|∇ψ|` over the axis-aligned input box `[lo, hi]`,
    /// never exceeding the global bound. Local bounds let distance estimates
    /// near flat graph portions stay sharp even when the profile is steep
    /// elsewhere.
    pub fn slope_bound(&self, lo: &[f64], hi: &[f64]) -> f64 {
        debug_assert_eq!(lo.len(), self.input_dim);
        debug_assert_eq!(hi.len(), self.input_dim);
        let local = match &self.profile {
            GraphProfile::Constant { .. } => 0.0,
            GraphProfile::SmoothedAbs { slope, smoothing } => {
                // |∇ψ| = slope·|x̄|/√(|x̄|² + s²) grows with |x̄|.
                let r2: f64 = lo
                    .iter()
                    .zip(hi)
                    .map(|(&a, &b)| a.abs().max(b.abs()).powi(2))
                    .sum();
                slope * (r2 / (r2 + smoothing * smoothing)).sqrt()
            }
            GraphProfile::Sinusoid { amplitude, frequency } => {
                // |ψ'| = |Aω cos(ωt)|; |cos| attains 1 at multiples of π.
                let (mut a, mut b) = (frequency * lo[0], frequency * hi[0]);
                if a > b {
                    std::mem::swap(&mut a, &mut b);
                }
                let contains_peak =
                    (b / std::f64::consts::PI).floor() >= (a / std::f64::consts::PI).ceil();
                let cos_max = if contains_peak {
                    1.0
                } else {
                    a.cos().abs().max(b.cos().abs())
                };
                (amplitude * frequency).abs() * cos_max
            }
            GraphProfile::PiecewiseLinear { knots } => {
                let mut worst = 0.0f64;
                for (i, w) in knots.windows(2).enumerate() {
                    let seg_lo = if i == 0 { f64::NEG_INFINITY } else { w[0].0 };
                    let seg_hi = if i == knots.len() - 2 { f64::INFINITY } else { w[1].0 };
                    if seg_hi >= lo[0] && seg_lo <= hi[0] {
                        worst = worst.max(((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs());
                    }
                }
                worst
            }
            GraphProfile::CircularArc { radius, t_max } => {
                let a = lo[0].abs().max(hi[0].abs());
                if a >= *t_max {
                    self.lip_bound
                } else {
                    a / (radius * radius - a * a).sqrt()
                }
            }
        };
        local.min(self.lip_bound)
    }

    fn check_lipschitz_sampled(&self) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_CAFE);
        for _ in 0..2000 {
            let a: Vec<f64> = (0..self.input_dim).map(|_| rng.gen_range(-8.0..8.0)).collect();
            let b: Vec<f64> = (0..self.input_dim).map(|_| rng.gen_range(-8.0..8.0)).collect();
            let gap = (self.eval(&a) - self.eval(&b)).abs();
            let reach = self.lip_bound * euclid_dist(&a, &b);
            if gap > reach * (1.0 + 1e-9) + 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "profile violates its Lipschitz bound {}: |Δψ| = {gap} over distance scale {reach}",
                    self.lip_bound
                )));
            }
        }
        Ok(())
    }
}

/// The epigraph `Ω = {(x̄, y) : y > ψ(x̄)}` of a Lipschitz graph; an open set.
#[derive(Debug, Clone)]
pub struct SpecialLipschitzDomain {
    graph: LipschitzGraph,
}

impl SpecialLipschitzDomain {
    pub fn new(graph: LipschitzGraph) -> Self {
        SpecialLipschitzDomain { graph }
    }

    /// Ambient dimension `n` (graph input dimension plus one).
    pub fn dim(&self) -> usize {
        self.graph.input_dim() + 1
    }

    pub fn graph(&self) -> &LipschitzGraph {
        &self.graph
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.graph.lipschitz_bound()
    }

    pub fn psi(&self, xbar: &[f64]) -> f64 {
        self.graph.eval(xbar)
    }

    /// Strict membership `y > ψ(x̄)`; graph points are excluded.
    pub fn contains(&self, p: &[f64]) -> Result<bool> {
        if p.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: p.len() });
        }
        let (xbar, y) = split(p);
        Ok(y > self.graph.eval(xbar))
    }

    /// `ψ(x̄) − y`: positive strictly below the graph, negative inside Ω.
    pub fn vertical_gap(&self, p: &[f64]) -> Result<f64> {
        if p.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: p.len() });
        }
        let (xbar, y) = split(p);
        Ok(self.graph.eval(xbar) - y)
    }
}

pub(crate) fn split(p: &[f64]) -> (&[f64], f64) {
    (&p[..p.len() - 1], p[p.len() - 1])
}

/// An orthogonal matrix with determinant `+1`, validated at construction.
#[derive(Debug, Clone)]
pub struct Rotation {
    mat: DMatrix<f64>,
}

impl Rotation {
    pub fn from_matrix(mat: DMatrix<f64>) -> Result<Self> {
        if !mat.is_square() || mat.nrows() < 2 {
            return Err(Error::InvalidArgument("rotation matrix must be square, n ≥ 2".into()));
        }
        let n = mat.nrows();
        let gram = mat.transpose() * &mat;
        let mut defect = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                defect = defect.max((gram[(i, j)] - target).abs());
            }
        }
        if defect > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "matrix is not orthogonal: max |RᵀR − I| = {defect:.3e}"
            )));
        }
        let det = mat.clone().lu().determinant();
        if (det - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "matrix is not a proper rotation: det = {det}"
            )));
        }
        Ok(Rotation { mat })
    }

    pub fn identity(n: usize) -> Self {
        Rotation { mat: DMatrix::identity(n, n) }
    }

    /// Planar rotation by `theta` (n = 2).
    pub fn planar(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Rotation { mat: DMatrix::from_row_slice(2, 2, &[c, -s, s, c]) }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    /// `R·x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        debug_assert_eq!(x.len(), n);
        (0..n)
            .map(|i| (0..n).map(|j| self.mat[(i, j)] * x[j]).sum())
            .collect()
    }

    /// `R⁻¹·x = Rᵀ·x`.
    pub fn apply_inverse(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        debug_assert_eq!(x.len(), n);
        (0..n)
            .map(|i| (0..n).map(|j| self.mat[(j, i)] * x[j]).sum())
            .collect()
    }
}

/// An open Euclidean ball.
#[derive(Debug, Clone)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if radius <= 0.0 {
            return Err(Error::InvalidArgument("ball radius must be positive".into()));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("ball center must be finite".into()));
        }
        Ok(Ball { center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        euclid_dist(&self.center, x) < self.radius
    }

    /// Whether the closed ball `B̄_r(c)` fits inside this ball.
    pub fn contains_ball(&self, center: &[f64], r: f64) -> bool {
        euclid_dist(&self.center, center) + r <= self.radius
    }

    pub fn intersects_ball(&self, center: &[f64], r: f64) -> bool {
        euclid_dist(&self.center, center) < self.radius + r
    }
}

/// An axis-aligned open box.
#[derive(Debug, Clone)]
pub struct BoxRegion {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl BoxRegion {
    pub fn new(min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        if min.len() != max.len() || min.iter().zip(&max).any(|(a, b)| a >= b) {
            return Err(Error::InvalidArgument("box needs min < max per axis".into()));
        }
        Ok(BoxRegion { min, max })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.min.iter().zip(&self.max))
            .all(|(v, (lo, hi))| v > lo && v < hi)
    }

    pub fn contains_ball(&self, center: &[f64], r: f64) -> bool {
        center
            .iter()
            .zip(self.min.iter().zip(&self.max))
            .all(|(v, (lo, hi))| v - lo >= r && hi - v >= r)
    }

    pub fn intersects_ball(&self, center: &[f64], r: f64) -> bool {
        // Distance from center to the box, via per-axis clamping.
        let d2: f64 = center
            .iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(v, (lo, hi))| {
                let c = v.clamp(*lo, *hi);
                (v - c) * (v - c)
            })
            .sum();
        d2.sqrt() < r
    }
}

/// Volume `ω_n` of the unit ball in ℝⁿ, via `ω_n = ω_{n−2}·2π/n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(n - 2) * 2.0 * std::f64::consts::PI / n as f64,
    }
}
