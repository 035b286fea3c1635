//! Covering a finite point set by open balls of radius `D/k` (`D` the set
//! diameter) with an explicitly bounded count.
//!
//! Construction: lay a lattice of half-open cubical cells of spacing
//! `D/(k√n)` over the bounding box. Each occupied cell contributes one ball of
//! radius `D/k` centered at an input point of that cell; the cell diagonal is
//! `D/k`, so the ball covers the whole cell. The bounding box has sides ≤ D,
//! hence at most `⌈k√n⌉ + 1` occupied cell indices per axis, giving the count
//! bound `(⌈k√n⌉ + 1)^n`.

use std::collections::HashMap;

use super::{Ball, Point};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BallCover {
    pub balls: Vec<Ball>,
    pub count: usize,
}

impl BallCover {
    /// Exhaustive membership check: every point lies in at least one ball.
    pub fn covers(&self, points: &[Point]) -> bool {
        points
            .iter()
            .all(|p| self.balls.iter().any(|b| b.contains(p.coords())))
    }
}

/// The explicit count bound `(⌈k√n⌉ + 1)^n` for the lattice construction.
pub fn cover_count_bound(dim: usize, k: usize) -> usize {
    let per_axis = (k as f64 * (dim as f64).sqrt()).ceil() as usize + 1;
    per_axis.pow(dim as u32)
}

pub fn cover_by_balls(points: &[Point], k: usize) -> Result<BallCover> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("cannot cover an empty point set".into()));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    let dim = points[0].dim();
    if points.iter().any(|p| p.dim() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: 0 });
    }

    // Set diameter by exhaustive pairwise scan.
    let mut diameter = 0.0f64;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            diameter = diameter.max(points[i].dist(&points[j]));
        }
    }
    if diameter == 0.0 {
        // Degenerate set: a single ball of any positive radius suffices.
        return Ok(BallCover {
            balls: vec![Ball::new(points[0].coords().to_vec(), 1.0)?],
            count: 1,
        });
    }

    let radius = diameter / k as f64;
    let spacing = diameter / (k as f64 * (dim as f64).sqrt());
    let mins: Vec<f64> = (0..dim)
        .map(|a| {
            points
                .iter()
                .map(|p| p.coords()[a])
                .fold(f64::INFINITY, f64::min)
        })
        .collect();

    // One representative point per occupied half-open cell, first point wins
    // (deterministic given input order).
    let mut cells: HashMap<Vec<i64>, usize> = HashMap::new();
    let mut order: Vec<Vec<i64>> = Vec::new();
    for (idx, p) in points.iter().enumerate() {
        let key: Vec<i64> = p
            .coords()
            .iter()
            .zip(&mins)
            .map(|(x, m)| ((x - m) / spacing).floor() as i64)
            .collect();
        if !cells.contains_key(&key) {
            cells.insert(key.clone(), idx);
            order.push(key);
        }
    }

    let balls: Vec<Ball> = order
        .iter()
        .map(|key| Ball::new(points[cells[key]].coords().to_vec(), radius))
        .collect::<Result<_>>()?;
    let cover = BallCover { count: balls.len(), balls };

    debug_assert!(cover.covers(points));
    debug_assert!(cover.count <= cover_count_bound(dim, k));
    Ok(cover)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pts(coords: &[&[f64]]) -> Vec<Point> {
        coords.iter().map(|c| Point::new(c.to_vec()).unwrap()).collect()
    }

    #[test]
    fn two_points_distance_one() {
        let points = pts(&[&[0.0, 0.0], &[1.0, 0.0]]);
        let cover = cover_by_balls(&points, 2).unwrap();
        assert!(cover.covers(&points));
        // (⌈2√2⌉+1)² = 16.
        assert_eq!(cover_count_bound(2, 2), 16);
        assert!(cover.count <= 16);
        for b in &cover.balls {
            assert!((b.radius - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn degenerate_set_yields_single_ball() {
        let points = pts(&[&[0.3, 0.7], &[0.3, 0.7]]);
        let cover = cover_by_balls(&points, 1).unwrap();
        assert_eq!(cover.count, 1);
        assert!(cover.covers(&points));
    }

    #[test]
    fn near_degenerate_pair_k1_stays_tiny() {
        // A singleton plus an epsilon-close point with k = 1: the pair may
        // straddle a lattice cell boundary, but never needs more than two
        // balls of radius D, and both cover the diameter-scale set.
        let points = pts(&[&[0.0, 0.0], &[1e-9, 0.0]]);
        let cover = cover_by_balls(&points, 1).unwrap();
        assert!(cover.covers(&points));
        assert!(cover.count <= 2);
    }

    #[test]
    fn hundred_uniform_points_unit_square_k3() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let points: Vec<Point> = (0..100)
            .map(|_| Point::new(vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).unwrap())
            .collect();
        let cover = cover_by_balls(&points, 3).unwrap();
        assert!(cover.covers(&points));
        // (⌈3√2⌉+1)² = 36.
        assert_eq!(cover_count_bound(2, 3), 36);
        assert!(cover.count <= 36);
        // All centers are input points.
        for b in &cover.balls {
            assert!(points.iter().any(|p| p.coords() == b.center.as_slice()));
        }
    }

    #[test]
    fn seeded_sweep_over_dims_and_k() {
        for &dim in &[2usize, 3] {
            for &k in &[1usize, 2, 3] {
                for seed in 0..20u64 {
                    let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
                    let count = rng.gen_range(2..120);
                    let points: Vec<Point> = (0..count)
                        .map(|_| {
                            Point::new(
                                (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect(),
                            )
                            .unwrap()
                        })
                        .collect();
                    let cover = cover_by_balls(&points, k).unwrap();
                    assert!(cover.covers(&points), "dim={dim} k={k} seed={seed}");
                    assert!(
                        cover.count <= cover_count_bound(dim, k),
                        "dim={dim} k={k} seed={seed}: {} > {}",
                        cover.count,
                        cover_count_bound(dim, k)
                    );
                }
            }
        }
    }

    #[test]
    fn rejects_empty_input_and_zero_k() {
        assert!(cover_by_balls(&[], 2).is_err());
        let points = pts(&[&[0.0, 0.0]]);
        assert!(cover_by_balls(&points, 0).is_err());
    }
}
