//! Exact intersection geometry between discs, axis-aligned squares, and the
//! cells of a uniform grid.
//!
//! Local integrals of a cell-wise constant field are computed as
//! `Σ_cells value·|cell ∩ region|`, so the only geometric primitives needed
//! are the exact overlap area of a disc with one cell and cumulative sums
//! that answer axis-aligned rectangle integrals in O(1). For discs the cells
//! split into an interior run (full area `h²`, summed via row prefixes) and a
//! thin rim of partially covered cells whose areas come from a closed-form
//! corner decomposition; because grid centers sit on the same lattice as the
//! cells, the rim pattern is translation invariant and is precomputed once
//! per radius as a [`BallKernel`].

/// `∫_{max(u0,−r)}^{min(u1,r)} clamp(y, −w(u), w(u)) du` with
/// `w(u) = √(r²−u²)`: the signed area of the disc slice over the vertical
/// strip `[u0, u1]` below height `y`, measured from the chord bottom.
fn strip_below(u0: f64, u1: f64, y: f64, r: f64) -> f64 {
    if y < 0.0 {
        return -strip_below(u0, u1, -y, r);
    }
    let a = u0.max(-r);
    let b = u1.min(r);
    if a >= b {
        return 0.0;
    }
    // Antiderivative of w: I(u) = (u·w(u) + r²·asin(u/r))/2.
    let cap = |u: f64| {
        let t = (u / r).clamp(-1.0, 1.0);
        let w = (r * r - u * u).max(0.0).sqrt();
        0.5 * (u * w + r * r * t.asin())
    };
    if y >= r {
        return cap(b) - cap(a);
    }
    // Chord height w(u) crosses y at |u| = u*: flat part contributes y per
    // unit length, the outer parts follow the arc.
    let ustar = (r * r - y * y).max(0.0).sqrt();
    let flat = (b.min(ustar) - a.max(-ustar)).max(0.0) * y;
    let left = if a < -ustar { cap(b.min(-ustar)) - cap(a) } else { 0.0 };
    let right = if b > ustar { cap(b) - cap(a.max(ustar)) } else { 0.0 };
    flat + left + right
}

/// Exact area of `B_r(0) ∩ [u0,u1]×[v0,v1]`.
pub fn disc_cell_area(u0: f64, u1: f64, v0: f64, v1: f64, r: f64) -> f64 {
    debug_assert!(u0 <= u1 && v0 <= v1);
    (strip_below(u0, u1, v1, r) - strip_below(u0, u1, v0, r)).max(0.0)
}

/// One kernel row at cell offset `k0` along axis 0: offsets `|k1| ≤ full`
/// along axis 1 are fully covered (area `h²`), the listed rim cells are
/// partially covered with the stored exact areas.
#[derive(Debug, Clone)]
pub struct KernelRow {
    pub k0: i64,
    pub full: i64,
    pub rim: Vec<(i64, f64)>,
}

/// Translation-invariant overlap pattern of `B_r(x)` with the grid cells when
/// `x` is itself a cell center.
#[derive(Debug, Clone)]
pub struct BallKernel {
    pub radius: f64,
    pub rows: Vec<KernelRow>,
}

impl BallKernel {
    pub fn build(r: f64, h: f64) -> BallKernel {
        assert!(r > 0.0 && h > 0.0);
        let mut rows = Vec::new();
        let kmax = (r / h + 0.5).ceil() as i64;
        for k0 in -kmax..=kmax {
            let d0 = k0.abs() as f64 * h;
            let near0 = (d0 - 0.5 * h).max(0.0);
            if near0 * near0 >= r * r {
                continue;
            }
            let far0 = d0 + 0.5 * h;
            // Largest |k1| with the far corner still inside the disc.
            let full = if far0 < r {
                let reach = (r * r - far0 * far0).sqrt();
                ((reach - 0.5 * h) / h).floor() as i64
            } else {
                -1
            };
            let mut rim = Vec::new();
            for k1 in (full.max(-1) + 1).. {
                let d1 = k1 as f64 * h;
                let near1 = (d1 - 0.5 * h).max(0.0);
                if near0 * near0 + near1 * near1 >= r * r {
                    break;
                }
                let area = disc_cell_area(
                    d1 - 0.5 * h,
                    d1 + 0.5 * h,
                    -d0 - 0.5 * h,
                    -d0 + 0.5 * h,
                    r,
                );
                if area > 0.0 {
                    rim.push((k1, area));
                    if k1 > 0 {
                        rim.push((-k1, area));
                    }
                }
            }
            if full >= 0 || !rim.is_empty() {
                rows.push(KernelRow { k0, full, rim });
            }
        }
        BallKernel { radius: r, rows }
    }

    /// Sum of all cell weights; equals `πr²` up to rounding.
    pub fn total_area(&self, h: f64) -> f64 {
        self.rows
            .iter()
            .map(|row| {
                let full = if row.full >= 0 {
                    (2 * row.full + 1) as f64 * h * h
                } else {
                    0.0
                };
                full + row.rim.iter().map(|&(_, a)| a).sum::<f64>()
            })
            .sum()
    }
}

/// Cumulative tables over a `res0 × res1` cell grid (spacing `h`, values
/// row-major with axis 1 contiguous) answering two queries exactly:
/// axis-aligned rectangle integrals in O(1) and per-row interval sums for the
/// interior runs of a [`BallKernel`].
#[derive(Debug, Clone)]
pub struct CellSums {
    res0: usize,
    res1: usize,
    h: f64,
    /// `a[i][j] = Σ_{ii<i, jj<j} g[ii][jj]·h²`, laid out `(res0+1)×(res1+1)`.
    a: Vec<f64>,
    /// `c1[i][j] = Σ_{jj<j} g[i][jj]·h` (partial column of cell row `i`).
    c1: Vec<f64>,
    /// `c0[i][j] = Σ_{ii<i} g[ii][j]·h` (partial row of cell column `j`).
    c0: Vec<f64>,
    /// Plain per-row prefix sums `rp[i][j] = Σ_{jj<j} g[i][jj]`.
    rp: Vec<f64>,
    values: Vec<f64>,
}

impl CellSums {
    pub fn build(values: &[f64], res0: usize, res1: usize, h: f64) -> CellSums {
        assert_eq!(values.len(), res0 * res1);
        let w1 = res1 + 1;
        let mut a = vec![0.0; (res0 + 1) * w1];
        let mut c1 = vec![0.0; res0 * w1];
        let mut c0 = vec![0.0; (res0 + 1) * res1];
        let mut rp = vec![0.0; res0 * w1];
        for i in 0..res0 {
            let mut run = 0.0;
            for j in 0..res1 {
                run += values[i * res1 + j];
                rp[i * w1 + j + 1] = run;
                c1[i * w1 + j + 1] = run * h;
            }
        }
        for j in 0..res1 {
            let mut run = 0.0;
            for i in 0..res0 {
                run += values[i * res1 + j];
                c0[(i + 1) * res1 + j] = run * h;
            }
        }
        for i in 0..res0 {
            for j in 0..res1 {
                a[(i + 1) * w1 + j + 1] =
                    a[i * w1 + j + 1] + rp[i * w1 + j + 1] * h * h;
            }
        }
        CellSums { res0, res1, h, a, c1, c0, rp, values: values.to_vec() }
    }

    /// `∫_{[0,X]×[0,Y]} g` for the cell-wise constant extension of the values
    /// (zero outside the grid); coordinates are measured from the grid corner.
    fn corner_integral(&self, x: f64, y: f64) -> f64 {
        let lx = self.res0 as f64 * self.h;
        let ly = self.res1 as f64 * self.h;
        let x = x.clamp(0.0, lx);
        let y = y.clamp(0.0, ly);
        let i = ((x / self.h) as usize).min(self.res0);
        let j = ((y / self.h) as usize).min(self.res1);
        let fx = x - i as f64 * self.h;
        let fy = y - j as f64 * self.h;
        let w1 = self.res1 + 1;
        let mut acc = self.a[i * w1 + j];
        if fx > 0.0 {
            acc += fx * self.c1[i * w1 + j];
        }
        if fy > 0.0 {
            acc += fy * self.c0[i * self.res1 + j];
        }
        if fx > 0.0 && fy > 0.0 {
            acc += fx * fy * self.values[i * self.res1 + j];
        }
        acc
    }

    /// Exact `∫_{[x0,x1]×[y0,y1]} g`, coordinates from the grid corner.
    pub fn rect_integral(&self, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
        if x0 >= x1 || y0 >= y1 {
            return 0.0;
        }
        (self.corner_integral(x1, y1) - self.corner_integral(x0, y1)
            - self.corner_integral(x1, y0)
            + self.corner_integral(x0, y0))
        .max(0.0)
    }

    /// `Σ_{j ∈ [j0, j1]} g[i][j]` with the interval clamped to the grid.
    fn row_run(&self, i: usize, j0: i64, j1: i64) -> f64 {
        let lo = j0.max(0) as usize;
        let hi = (j1.min(self.res1 as i64 - 1) + 1).max(0) as usize;
        if lo >= hi {
            return 0.0;
        }
        let w1 = self.res1 + 1;
        self.rp[i * w1 + hi] - self.rp[i * w1 + lo]
    }

    /// `Σ_cells g·|cell ∩ B_r(center)|` for the cell center `(i0, i1)`, using
    /// a precomputed kernel for the same spacing.
    pub fn ball_integral(&self, kernel: &BallKernel, i0: usize, i1: usize) -> f64 {
        let h2 = self.h * self.h;
        let mut acc = 0.0;
        for row in &kernel.rows {
            let gi = i0 as i64 + row.k0;
            if gi < 0 || gi >= self.res0 as i64 {
                continue;
            }
            let gi = gi as usize;
            if row.full >= 0 {
                acc += self.row_run(gi, i1 as i64 - row.full, i1 as i64 + row.full) * h2;
            }
            for &(k1, area) in &row.rim {
                let gj = i1 as i64 + k1;
                if gj >= 0 && gj < self.res1 as i64 {
                    acc += self.values[gi * self.res1 + gj as usize] * area;
                }
            }
        }
        acc
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }
}
