//! Cell-centered uniform grids and masked scalar fields.
//!
//! A [`GridBox`] covers an axis-aligned box with `res_a` cells per axis, all
//! sharing one spacing `h`; samples live at cell centers
//! `x_j = min + (j + ½)h`. A [`GridField`] stores one value per cell in
//! row-major order (last axis contiguous) together with a validity mask.
//! Derivatives are formed axis by axis with second-order stencils; a point
//! falls back from the central stencil to one-sided variants when a neighbor
//! is missing or invalid, and becomes invalid itself when no complete stencil
//! is available.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::index::MultiIndex;

/// Highest per-axis derivative order the stencils support.
pub const MAX_STENCIL_ORDER: u32 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct GridBox {
    min: Vec<f64>,
    max: Vec<f64>,
    res: Vec<usize>,
    spacing: f64,
}

impl GridBox {
    pub fn new(min: Vec<f64>, max: Vec<f64>, res: Vec<usize>) -> Result<Self> {
        if min.len() != max.len() || min.len() != res.len() {
            return Err(Error::DimensionMismatch { expected: min.len(), got: res.len() });
        }
        if min.is_empty() {
            return Err(Error::InvalidArgument("grid dimension must be ≥ 1".into()));
        }
        for a in 0..min.len() {
            if !(min[a] < max[a]) || res[a] == 0 {
                return Err(Error::InvalidArgument(format!(
                    "degenerate grid axis {a}: [{}, {}] with {} cells",
                    min[a], max[a], res[a]
                )));
            }
        }
        let spacing = (max[0] - min[0]) / res[0] as f64;
        for a in 1..min.len() {
            let h = (max[a] - min[a]) / res[a] as f64;
            if (h - spacing).abs() > 1e-9 * spacing {
                return Err(Error::InvalidArgument(format!(
                    "grid spacing must match across axes: h0 = {spacing}, h{a} = {h}"
                )));
            }
        }
        Ok(GridBox { min, max, res, spacing })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn min(&self) -> &[f64] {
        &self.min
    }

    pub fn max(&self) -> &[f64] {
        &self.max
    }

    pub fn res(&self) -> &[usize] {
        &self.res
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.res.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Row-major strides; the last axis is contiguous.
    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1usize; self.res.len()];
        for a in (0..self.res.len().saturating_sub(1)).rev() {
            s[a] = s[a + 1] * self.res[a + 1];
        }
        s
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dim());
        let strides = self.strides();
        idx.iter().zip(&strides).map(|(&i, &s)| i * s).sum()
    }

    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let strides = self.strides();
        let mut idx = vec![0usize; self.dim()];
        for a in 0..self.dim() {
            idx[a] = flat / strides[a];
            flat %= strides[a];
        }
        idx
    }

    pub fn axis_coord(&self, axis: usize, j: usize) -> f64 {
        self.min[axis] + (j as f64 + 0.5) * self.spacing
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.unflatten(flat)
            .iter()
            .enumerate()
            .map(|(a, &j)| self.axis_coord(a, j))
            .collect()
    }

    /// Grid over the same box with half the resolution per axis; every axis
    /// resolution must be even.
    pub fn coarsened(&self) -> Result<GridBox> {
        let res: Vec<usize> = self
            .res
            .iter()
            .map(|&r| {
                if r % 2 == 0 && r >= 2 {
                    Ok(r / 2)
                } else {
                    Err(Error::InvalidArgument(format!(
                        "cannot halve odd axis resolution {r}"
                    )))
                }
            })
            .collect::<Result<_>>()?;
        GridBox::new(self.min.clone(), self.max.clone(), res)
    }
}

#[derive(Debug, Clone)]
pub struct GridField {
    grid: GridBox,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl GridField {
    /// Samples `f` at every cell center; `None` marks the cell invalid.
    pub fn sample<F>(grid: &GridBox, f: F) -> GridField
    where
        F: Fn(&[f64]) -> Option<f64> + Sync,
    {
        let n = grid.len();
        let pairs: Vec<(f64, bool)> = (0..n)
            .into_par_iter()
            .map(|i| match f(&grid.point(i)) {
                Some(v) if v.is_finite() => (v, true),
                _ => (0.0, false),
            })
            .collect();
        GridField {
            grid: grid.clone(),
            values: pairs.iter().map(|p| p.0).collect(),
            valid: pairs.iter().map(|p| p.1).collect(),
        }
    }

    pub fn from_parts(grid: GridBox, values: Vec<f64>, valid: Vec<bool>) -> Result<GridField> {
        if values.len() != grid.len() || valid.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: values.len() });
        }
        Ok(GridField { grid, values, valid })
    }

    pub fn grid(&self) -> &GridBox {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn value(&self, flat: usize) -> Option<f64> {
        self.valid[flat].then(|| self.values[flat])
    }

    pub fn invalid_fraction(&self) -> f64 {
        let bad = self.valid.iter().filter(|&&v| !v).count();
        bad as f64 / self.valid.len() as f64
    }

    /// Pointwise `|v|^p`, keeping the mask; invalid cells stay zero.
    pub fn powered_abs(&self, p: f64) -> GridField {
        let values = self
            .values
            .iter()
            .zip(&self.valid)
            .map(|(&v, &ok)| if ok { v.abs().powf(p) } else { 0.0 })
            .collect();
        GridField { grid: self.grid.clone(), values, valid: self.valid.clone() }
    }

    /// Restricts validity to cells where `keep` holds at the cell center.
    pub fn restricted<F: Fn(&[f64]) -> bool>(&self, keep: F) -> GridField {
        let mut out = self.clone();
        for i in 0..out.valid.len() {
            if out.valid[i] && !keep(&self.grid.point(i)) {
                out.valid[i] = false;
                out.values[i] = 0.0;
            }
        }
        out
    }

    /// `D^α` via axis-by-axis finite differences. Each component of `alpha`
    /// may be at most [`MAX_STENCIL_ORDER`].
    pub fn derivative(&self, alpha: &MultiIndex) -> Result<GridField> {
        if alpha.dim() != self.grid.dim() {
            return Err(Error::DimensionMismatch { expected: self.grid.dim(), got: alpha.dim() });
        }
        for axis in 0..alpha.dim() {
            if alpha.component(axis) > MAX_STENCIL_ORDER {
                return Err(Error::UnsupportedOrder {
                    order: alpha.component(axis),
                    max: MAX_STENCIL_ORDER,
                });
            }
        }
        let mut field = self.clone();
        for axis in 0..alpha.dim() {
            let m = alpha.component(axis);
            if m > 0 {
                field = field.axis_derivative(axis, m);
            }
        }
        Ok(field)
    }

    /// Single-axis derivative of order `m ∈ {1, 2}`, O(h²) everywhere a
    /// complete stencil exists. Preference order: central, then forward,
    /// then backward.
    fn axis_derivative(&self, axis: usize, m: u32) -> GridField {
        debug_assert!(m == 1 || m == 2);
        let h = self.grid.spacing();
        let res = self.grid.res()[axis];
        let stride = self.grid.strides()[axis] as isize;
        let n = self.grid.len();
        let pairs: Vec<(f64, bool)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let j = (i / stride as usize) % res;
                let fetch = |k: isize| -> Option<f64> {
                    let jn = j as isize + k;
                    if jn < 0 || jn >= res as isize {
                        return None;
                    }
                    let flat = (i as isize + k * stride) as usize;
                    self.valid[flat].then(|| self.values[flat])
                };
                let central = || -> Option<f64> {
                    let fm = fetch(-1)?;
                    let fp = fetch(1)?;
                    Some(if m == 1 {
                        (fp - fm) / (2.0 * h)
                    } else {
                        let f0 = fetch(0)?;
                        (fm - 2.0 * f0 + fp) / (h * h)
                    })
                };
                let forward = || -> Option<f64> {
                    if m == 1 {
                        Some((-3.0 * fetch(0)? + 4.0 * fetch(1)? - fetch(2)?) / (2.0 * h))
                    } else {
                        Some(
                            (2.0 * fetch(0)? - 5.0 * fetch(1)? + 4.0 * fetch(2)? - fetch(3)?)
                                / (h * h),
                        )
                    }
                };
                let backward = || -> Option<f64> {
                    if m == 1 {
                        Some((3.0 * fetch(0)? - 4.0 * fetch(-1)? + fetch(-2)?) / (2.0 * h))
                    } else {
                        Some(
                            (2.0 * fetch(0)? - 5.0 * fetch(-1)? + 4.0 * fetch(-2)? - fetch(-3)?)
                                / (h * h),
                        )
                    }
                };
                match central().or_else(forward).or_else(backward) {
                    Some(v) => (v, true),
                    None => (0.0, false),
                }
            })
            .collect();
        GridField {
            grid: self.grid.clone(),
            values: pairs.iter().map(|p| p.0).collect(),
            valid: pairs.iter().map(|p| p.1).collect(),
        }
    }

    /// Block-averages onto the half-resolution grid: a coarse cell is valid
    /// when at least one of its fine cells is, with the mean of the valid
    /// fine values.
    pub fn block_averaged(&self) -> Result<GridField> {
        let coarse = self.grid.coarsened()?;
        let dim = self.grid.dim();
        let n = coarse.len();
        let blocks = 1usize << dim;
        let mut values = vec![0.0; n];
        let mut valid = vec![false; n];
        for i in 0..n {
            let cidx = coarse.unflatten(i);
            let mut sum = 0.0;
            let mut count = 0usize;
            for b in 0..blocks {
                let fidx: Vec<usize> = cidx
                    .iter()
                    .enumerate()
                    .map(|(a, &c)| 2 * c + ((b >> a) & 1))
                    .collect();
                let flat = self.grid.flatten(&fidx);
                if self.valid[flat] {
                    sum += self.values[flat];
                    count += 1;
                }
            }
            if count > 0 {
                values[i] = sum / count as f64;
                valid[i] = true;
            }
        }
        GridField::from_parts(coarse, values, valid)
    }
}
