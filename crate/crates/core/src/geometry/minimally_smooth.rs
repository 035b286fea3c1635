//! Minimally smooth domains: a uniform family of boundary patches, each of
//! which sees the domain as a rotated special Lipschitz epigraph, with an
//! overlap (multiplicity) bound and a patch size parameter ε.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    euclid_dist, euclid_norm, unit_ball_volume, Ball, BoxRegion, GraphProfile, LipschitzGraph,
    Rotation, SpecialLipschitzDomain,
};
use crate::error::{Error, Result};

/// Patch geometry: a finite union of open balls or a single open box. These
/// shapes admit exact ball-containment and ball-intersection predicates.
#[derive(Debug, Clone)]
pub enum PatchRegion {
    Balls(Vec<Ball>),
    Box(BoxRegion),
}

impl PatchRegion {
    pub fn dim(&self) -> usize {
        match self {
            PatchRegion::Balls(balls) => balls[0].dim(),
            PatchRegion::Box(b) => b.dim(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            PatchRegion::Balls(balls) => balls.iter().any(|b| b.contains(x)),
            PatchRegion::Box(b) => b.contains(x),
        }
    }

    /// Whether the closed ball `B̄_r(center)` fits inside the region. For ball
    /// unions this asks for a single containing ball, which is the sufficient
    /// condition the regular-covering construction needs.
    pub fn contains_ball(&self, center: &[f64], r: f64) -> bool {
        match self {
            PatchRegion::Balls(balls) => balls.iter().any(|b| b.contains_ball(center, r)),
            PatchRegion::Box(b) => b.contains_ball(center, r),
        }
    }

    pub fn intersects_ball(&self, center: &[f64], r: f64) -> bool {
        match self {
            PatchRegion::Balls(balls) => balls.iter().any(|b| b.intersects_ball(center, r)),
            PatchRegion::Box(b) => b.intersects_ball(center, r),
        }
    }

    /// Axis-aligned bounding box of the region.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            PatchRegion::Balls(balls) => {
                let dim = balls[0].dim();
                let mut min = vec![f64::INFINITY; dim];
                let mut max = vec![f64::NEG_INFINITY; dim];
                for b in balls {
                    for a in 0..dim {
                        min[a] = min[a].min(b.center[a] - b.radius);
                        max[a] = max[a].max(b.center[a] + b.radius);
                    }
                }
                (min, max)
            }
            PatchRegion::Box(b) => (b.min.clone(), b.max.clone()),
        }
    }
}

/// One boundary patch: within `region`, domain membership agrees with
/// membership in the rotated epigraph `rotation(special)`.
#[derive(Debug, Clone)]
pub struct Patch {
    pub region: PatchRegion,
    pub rotation: Rotation,
    pub special: SpecialLipschitzDomain,
}

/// Global membership descriptor for Ω.
#[derive(Debug, Clone)]
pub enum Membership {
    /// Ω is an open ball (the bounded model case; exact signed distance).
    Ball(Ball),
    /// Ω is itself an epigraph (unbounded; used by fixtures and tests).
    Epigraph(SpecialLipschitzDomain),
}

impl Membership {
    pub fn dim(&self) -> usize {
        match self {
            Membership::Ball(b) => b.dim(),
            Membership::Epigraph(d) => d.dim(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Membership::Ball(b) => b.contains(x),
            Membership::Epigraph(d) => d.contains(x).unwrap_or(false),
        }
    }

    /// Signed gap to the boundary: positive inside Ω, negative outside. Exact
    /// for balls; for epigraphs a Lipschitz-controlled lower bound
    /// `(y − ψ(x̄))/√(1+M²)` on the Euclidean distance.
    pub fn signed_boundary_gap(&self, x: &[f64]) -> f64 {
        match self {
            Membership::Ball(b) => b.radius - euclid_dist(&b.center, x),
            Membership::Epigraph(d) => {
                let m = d.lipschitz_bound();
                let gap = -d.vertical_gap(x).unwrap_or(f64::NAN);
                gap / (1.0 + m * m).sqrt()
            }
        }
    }
}

/// A minimally smooth domain: patches `(U_i, R_i, D_i)`, patch scale ε,
/// multiplicity bound N, uniform Lipschitz bound M, and a membership
/// evaluator for Ω.
#[derive(Debug, Clone)]
pub struct MinimallySmoothDomain {
    pub patches: Vec<Patch>,
    pub eps: f64,
    pub mult_bound: usize,
    pub lip_bound: f64,
    pub membership: Membership,
}

impl MinimallySmoothDomain {
    pub fn new(
        patches: Vec<Patch>,
        eps: f64,
        mult_bound: usize,
        lip_bound: f64,
        membership: Membership,
    ) -> Result<Self> {
        if patches.is_empty() {
            return Err(Error::InvalidArgument("need at least one patch".into()));
        }
        if eps <= 0.0 || mult_bound == 0 {
            return Err(Error::InvalidArgument("need ε > 0 and N ≥ 1".into()));
        }
        let dim = membership.dim();
        for (i, p) in patches.iter().enumerate() {
            if p.region.dim() != dim || p.rotation.dim() != dim || p.special.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: p.region.dim() });
            }
            if p.special.lipschitz_bound() > lip_bound * (1.0 + 1e-12) {
                return Err(Error::InvalidArgument(format!(
                    "patch {i} has Lipschitz bound {} above the family bound {lip_bound}",
                    p.special.lipschitz_bound()
                )));
            }
        }
        Ok(MinimallySmoothDomain { patches, eps, mult_bound, lip_bound, membership })
    }

    pub fn dim(&self) -> usize {
        self.membership.dim()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.membership.contains(x)
    }

    /// Bounding box of Ω enlarged by `margin`.
    pub fn bounding_box(&self, margin: f64) -> (Vec<f64>, Vec<f64>) {
        match &self.membership {
            Membership::Ball(b) => {
                let r = b.radius + margin;
                (
                    b.center.iter().map(|c| c - r).collect(),
                    b.center.iter().map(|c| c + r).collect(),
                )
            }
            Membership::Epigraph(_) => {
                let (mut min, mut max) = self.patches[0].region.bounding_box();
                for p in &self.patches[1..] {
                    let (pmin, pmax) = p.region.bounding_box();
                    for a in 0..min.len() {
                        min[a] = min[a].min(pmin[a]);
                        max[a] = max[a].max(pmax[a]);
                    }
                }
                for a in 0..min.len() {
                    min[a] -= margin;
                    max[a] += margin;
                }
                (min, max)
            }
        }
    }

    /// Deterministic seeded boundary sample (n = 2 ball boundaries and
    /// epigraph graphs).
    pub fn boundary_sample(&self, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        if count == 0 {
            return Err(Error::InvalidArgument("boundary sample count must be ≥ 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match &self.membership {
            Membership::Ball(b) => {
                if b.dim() != 2 {
                    return Err(Error::InvalidArgument(
                        "ball boundary sampling implemented for n = 2".into(),
                    ));
                }
                Ok((0..count)
                    .map(|i| {
                        let jitter: f64 = rng.gen_range(0.0..1.0);
                        let theta =
                            2.0 * std::f64::consts::PI * (i as f64 + 0.5 * jitter) / count as f64;
                        vec![
                            b.center[0] + b.radius * theta.cos(),
                            b.center[1] + b.radius * theta.sin(),
                        ]
                    })
                    .collect())
            }
            Membership::Epigraph(d) => {
                let (min, max) = self.bounding_box(0.0);
                let nb = d.dim() - 1;
                Ok((0..count)
                    .map(|_| {
                        let xbar: Vec<f64> =
                            (0..nb).map(|a| rng.gen_range(min[a]..max[a])).collect();
                        let mut p = xbar.clone();
                        p.push(d.psi(&xbar));
                        p
                    })
                    .collect())
            }
        }
    }

    /// Sampled validation of the defining properties: the ε-ball property on
    /// the given boundary samples, multiplicity ≤ N at random probes, and
    /// membership agreement with the rotated epigraph inside every patch.
    pub fn validate_sampled(&self, boundary: &[Vec<f64>], probes: usize, seed: u64) -> Result<()> {
        for (k, x) in boundary.iter().enumerate() {
            if !self.patches.iter().any(|p| p.region.contains_ball(x, self.eps)) {
                return Err(Error::InvalidArgument(format!(
                    "boundary sample {k} has no patch containing its ε-ball"
                )));
            }
        }
        let (min, max) = self.bounding_box(self.eps);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..probes {
            let x: Vec<f64> = (0..self.dim())
                .map(|a| rng.gen_range(min[a]..max[a]))
                .collect();
            let mut mult = 0usize;
            for p in &self.patches {
                if p.region.contains(&x) {
                    mult += 1;
                    let local = p.rotation.apply_inverse(&x);
                    let in_epi = p.special.contains(&local)?;
                    if in_epi != self.membership.contains(&x) {
                        return Err(Error::InvalidArgument(format!(
                            "membership disagrees with rotated epigraph at {x:?}"
                        )));
                    }
                }
            }
            if mult > self.mult_bound {
                return Err(Error::InvalidArgument(format!(
                    "multiplicity {mult} exceeds bound {} at {x:?}",
                    self.mult_bound
                )));
            }
        }
        Ok(())
    }

    /// The unit disk described by `patch_count` congruent ball patches with
    /// anchors on the circle. Each patch sees the circle as the epigraph of a
    /// lower circular arc after rotating the patch anchor to the bottom.
    pub fn disk(patch_count: usize, patch_radius: f64, eps: f64, mult_bound: usize) -> Result<Self> {
        if patch_count < 3 {
            return Err(Error::InvalidArgument("need at least 3 disk patches".into()));
        }
        if !(eps < patch_radius && patch_radius < 1.0) {
            return Err(Error::InvalidArgument(
                "disk patches need ε < patch_radius < 1".into(),
            ));
        }
        let t_max = (patch_radius + 0.02).min(0.99);
        let mut patches = Vec::with_capacity(patch_count);
        let mut lip = 0.0f64;
        for i in 0..patch_count {
            let phi = 2.0 * std::f64::consts::PI * i as f64 / patch_count as f64;
            let anchor = vec![phi.cos(), phi.sin()];
            let graph =
                LipschitzGraph::new(GraphProfile::CircularArc { radius: 1.0, t_max }, 1)?;
            lip = lip.max(graph.lipschitz_bound());
            patches.push(Patch {
                region: PatchRegion::Balls(vec![Ball::new(anchor, patch_radius)?]),
                // Rotating by φ + π/2 sends the local "up" direction to the
                // inward normal at the anchor.
                rotation: Rotation::planar(phi + std::f64::consts::FRAC_PI_2),
                special: SpecialLipschitzDomain::new(graph),
            });
        }
        MinimallySmoothDomain::new(
            patches,
            eps,
            mult_bound,
            lip,
            Membership::Ball(Ball::new(vec![0.0, 0.0], 1.0)?),
        )
    }
}

/// Replaces each patch region by the union of sampled boundary ε-balls it
/// contains; patches that contain no sampled ε-ball are dropped. The result
/// has the ε-ball property by construction: every point of a returned patch
/// lies in one of its generating ε-balls.
pub fn regularize_covering(
    msd: &MinimallySmoothDomain,
    boundary_sample: &[Vec<f64>],
) -> Result<MinimallySmoothDomain> {
    if boundary_sample.is_empty() {
        return Err(Error::InvalidArgument("boundary sample must be nonempty".into()));
    }
    let mut patches = Vec::new();
    for p in &msd.patches {
        let generating: Vec<Ball> = boundary_sample
            .iter()
            .filter(|x| p.region.contains_ball(x, msd.eps))
            .map(|x| Ball::new(x.clone(), msd.eps))
            .collect::<Result<_>>()?;
        if !generating.is_empty() {
            patches.push(Patch {
                region: PatchRegion::Balls(generating),
                rotation: p.rotation.clone(),
                special: p.special.clone(),
            });
        }
    }
    if patches.is_empty() {
        return Err(Error::InsufficientSampling(
            "no sampled boundary ε-ball fits inside any patch".into(),
        ));
    }
    MinimallySmoothDomain::new(
        patches,
        msd.eps,
        msd.mult_bound,
        msd.lip_bound,
        msd.membership.clone(),
    )
}

/// Indices of the patches whose region intersects the open ball `b`; the
/// query radius must stay below the configured norm scale `delta`.
pub fn active_indices(msd: &MinimallySmoothDomain, b: &Ball, delta: f64) -> Result<Vec<usize>> {
    if !(b.radius < delta) {
        return Err(Error::InvalidArgument(format!(
            "query radius {} must be below δ = {delta}",
            b.radius
        )));
    }
    Ok(msd
        .patches
        .iter()
        .enumerate()
        .filter(|(_, p)| p.region.intersects_ball(&b.center, b.radius))
        .map(|(i, _)| i)
        .collect())
}

/// Monte Carlo covering-cardinality bound `ξ = N·|Ω^ε| / (ε^n ω_n)`, where
/// `Ω^ε` is the open ε-neighborhood of Ω. The volume estimate is inflated by
/// three standard errors so the returned ξ is a conservative upper bound.
#[derive(Debug, Clone)]
pub struct XiEstimate {
    pub xi: f64,
    pub neighborhood_volume: f64,
    pub std_err: f64,
    pub samples: usize,
}

pub fn xi_bound(msd: &MinimallySmoothDomain, samples: usize, seed: u64) -> Result<XiEstimate> {
    let ball = match &msd.membership {
        Membership::Ball(b) => b,
        Membership::Epigraph(_) => {
            return Err(Error::InvalidArgument(
                "covering-cardinality bound needs a bounded Ω".into(),
            ))
        }
    };
    if samples < 1000 {
        return Err(Error::InvalidArgument("need ≥ 1000 Monte Carlo samples".into()));
    }
    let n = msd.dim();
    let reach = ball.radius + msd.eps;
    let side = 2.0 * reach * 1.05;
    let volume_box = side.powi(n as i32);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..samples {
        let x: Vec<f64> = ball
            .center
            .iter()
            .map(|c| c + rng.gen_range(-0.5 * side..0.5 * side))
            .collect();
        // d(x, Ω) < ε is exact for a ball: |x − c| < r + ε.
        if euclid_norm(
            &x.iter()
                .zip(&ball.center)
                .map(|(a, c)| a - c)
                .collect::<Vec<_>>(),
        ) < reach
        {
            hits += 1;
        }
    }
    let frac = hits as f64 / samples as f64;
    let volume = frac * volume_box;
    let std_err = volume_box * (frac * (1.0 - frac) / samples as f64).sqrt();
    let xi = msd.mult_bound as f64 * (volume + 3.0 * std_err)
        / (msd.eps.powi(n as i32) * unit_ball_volume(n));
    Ok(XiEstimate { xi, neighborhood_volume: volume, std_err, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn disk8() -> MinimallySmoothDomain {
        MinimallySmoothDomain::disk(8, 0.92, 0.5, 4).unwrap()
    }

    fn disk4() -> MinimallySmoothDomain {
        MinimallySmoothDomain::disk(4, 0.95, 0.15, 4).unwrap()
    }

    #[test]
    fn disk_fixtures_pass_sampled_validation() {
        for msd in [disk8(), disk4()] {
            let boundary = msd.boundary_sample(512, 3).unwrap();
            msd.validate_sampled(&boundary, 4000, 17).unwrap();
        }
    }

    #[test]
    fn patch_epigraph_matches_disk_membership_near_anchor() {
        let msd = disk8();
        let p = &msd.patches[0];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5000 {
            let x = [rng.gen_range(-1.6..1.6), rng.gen_range(-1.6..1.6)];
            if p.region.contains(&x) {
                let local = p.rotation.apply_inverse(&x);
                assert_eq!(
                    p.special.contains(&local).unwrap(),
                    msd.contains(&x),
                    "disagreement at {x:?}"
                );
            }
        }
    }

    #[test]
    fn regularize_keeps_nonempty_patches_and_eps_ball_property() {
        let msd = disk4();
        let boundary = msd.boundary_sample(512, 3).unwrap();
        let reg = regularize_covering(&msd, &boundary).unwrap();
        assert_eq!(reg.patches.len(), 4);
        // ε-ball property by construction: random points of each patch lie in
        // a generating ε-ball, which itself lies inside the patch.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for p in &reg.patches {
            let balls = match &p.region {
                PatchRegion::Balls(b) => b,
                PatchRegion::Box(_) => unreachable!(),
            };
            let mut found = 0;
            while found < 1000 {
                let x = [rng.gen_range(-1.6..1.6), rng.gen_range(-1.6..1.6)];
                if p.region.contains(&x) {
                    found += 1;
                    assert!(balls.iter().any(|b| b.contains(&x)));
                }
            }
        }
        // Multiplicity can only drop under regularization.
        reg.validate_sampled(&boundary, 4000, 29).unwrap();
    }

    #[test]
    fn regularize_drops_patch_without_qualifying_ball() {
        let msd = disk4();
        // Keep only boundary samples near the first anchor: the far patches
        // lose all generating balls and are dropped.
        let boundary: Vec<Vec<f64>> = msd
            .boundary_sample(512, 3)
            .unwrap()
            .into_iter()
            .filter(|x| x[0] > 0.95)
            .collect();
        assert!(!boundary.is_empty());
        let reg = regularize_covering(&msd, &boundary).unwrap();
        assert!(reg.patches.len() < 4);
    }

    #[test]
    fn regularize_with_hopeless_sampling_errors() {
        let msd = disk4();
        // Samples far outside every patch cannot generate any ε-ball.
        let bad = vec![vec![50.0, 50.0], vec![-40.0, 10.0]];
        assert!(matches!(
            regularize_covering(&msd, &bad),
            Err(Error::InsufficientSampling(_))
        ));
    }

    #[test]
    fn active_indices_examples() {
        // Three pairwise-disjoint ball patches on a line.
        let mk_patch = |cx: f64| -> Patch {
            let graph =
                LipschitzGraph::new(GraphProfile::Constant { level: 0.0 }, 1).unwrap();
            Patch {
                region: PatchRegion::Balls(vec![Ball::new(vec![cx, 0.0], 1.0).unwrap()]),
                rotation: Rotation::identity(2),
                special: SpecialLipschitzDomain::new(graph),
            }
        };
        let graph = LipschitzGraph::new(GraphProfile::Constant { level: 0.0 }, 1).unwrap();
        let msd = MinimallySmoothDomain::new(
            vec![mk_patch(-5.0), mk_patch(0.0), mk_patch(5.0)],
            0.5,
            1,
            0.0,
            Membership::Epigraph(SpecialLipschitzDomain::new(graph)),
        )
        .unwrap();
        let inside_second = Ball::new(vec![0.0, 0.0], 0.3).unwrap();
        assert_eq!(active_indices(&msd, &inside_second, 1.0).unwrap(), vec![1]);
        let disjoint = Ball::new(vec![0.0, 50.0], 0.3).unwrap();
        assert!(active_indices(&msd, &disjoint, 1.0).unwrap().is_empty());
        assert!(active_indices(&msd, &inside_second, 0.2).is_err());
    }

    #[test]
    fn xi_matches_closed_form_for_unit_disk() {
        // |Ω^ε| = π(1+ε)² for the unit disk; with ε = 0.5, N = 4 the bound is
        // 4·π·1.5² / (0.5²·π) = 36.
        let msd = disk8();
        let est = xi_bound(&msd, 1_000_000, 99).unwrap();
        assert_relative_eq!(
            est.neighborhood_volume,
            std::f64::consts::PI * 2.25,
            max_relative = 0.01
        );
        assert!(est.xi >= 36.0 * 0.99 && est.xi <= 36.0 * 1.03);
        // 100 random query balls: #J never exceeds ξ.
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..100 {
            let b = Ball::new(
                vec![rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)],
                rng.gen_range(0.01..0.49),
            )
            .unwrap();
            let j = active_indices(&msd, &b, 0.5).unwrap();
            assert!((j.len() as f64) <= est.xi);
        }
    }

    #[test]
    fn disk8_multiplicity_stays_at_most_three() {
        // The 8-patch layout was sized so no point lies in more than 3 balls;
        // the declared bound N = 4 then holds with margin.
        let msd = disk8();
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let mut worst = 0usize;
        for _ in 0..20000 {
            let x = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let mult = msd.patches.iter().filter(|p| p.region.contains(&x)).count();
            worst = worst.max(mult);
        }
        assert!(worst <= 3, "observed multiplicity {worst}");
    }
}
