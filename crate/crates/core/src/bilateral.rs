//! Bilateral filtering, exact and grid-accelerated, with optional cross
//! (joint) guidance.
//!
//! Both backends compute, for every pixel `s`,
//!
//! ```text
//! u_s = sum_t Gs(|s - t|) Gr(|guide_s - guide_t|) src_t / Z_s
//! ```
//!
//! with `Z_s` the sum of the same weights. [`blf_brute`] evaluates the sum
//! directly over a `ceil(3 sigma_s)` window clipped to the image;
//! [`blf_grid`] splats into a downsampled (x, y, range) grid, blurs it and
//! slices it back out.

use rayon::prelude::*;

use crate::error::{ensure_positive, Error, Result};
use crate::image::{shape_error, PlanarImage};

/// Spatial (pixels) and range (intensity units) Gaussian widths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeSpatialParams {
    pub sigma_s: f64,
    pub sigma_r: f64,
}

impl RangeSpatialParams {
    pub fn new(sigma_s: f64, sigma_r: f64) -> Result<Self> {
        let p = Self { sigma_s, sigma_r };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("sigma_s", self.sigma_s)?;
        ensure_positive("sigma_r", self.sigma_r)
    }
}

/// Bilateral grid cell sizes. The canonical choice is one cell per sigma
/// along every axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridParams {
    pub spatial_sampling: f64,
    pub range_sampling: f64,
}

impl GridParams {
    pub fn canonical(p: &RangeSpatialParams) -> Self {
        Self {
            spatial_sampling: p.sigma_s,
            range_sampling: p.sigma_r,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("spatial_sampling", self.spatial_sampling)?;
        ensure_positive("range_sampling", self.range_sampling)
    }
}

fn check_guide(src: &PlanarImage, guide: &PlanarImage) -> Result<()> {
    if !src.same_size(guide) {
        return Err(shape_error(src, guide));
    }
    if guide.channels() != 1 && guide.channels() != src.channels() {
        return Err(Error::InvalidInput(format!(
            "guide has {} channels, source has {}",
            guide.channels(),
            src.channels()
        )));
    }
    Ok(())
}

/// Direct evaluation of the (joint) bilateral filter.
///
/// The range distance is the Euclidean norm over all guide channels, so a
/// multi-channel guide couples every source channel to the same weights.
pub fn blf_brute(src: &PlanarImage, guide: &PlanarImage, p: &RangeSpatialParams) -> Result<PlanarImage> {
    p.validate()?;
    check_guide(src, guide)?;
    let (w, h) = (src.width(), src.height());
    let radius = (3.0 * p.sigma_s).ceil() as isize;
    let side = (2 * radius + 1) as usize;
    let inv_s = 1.0 / (2.0 * p.sigma_s * p.sigma_s);
    let inv_r = 1.0 / (2.0 * p.sigma_r * p.sigma_r);
    let spatial: Vec<f64> = (0..side * side)
        .map(|i| {
            let dy = (i / side) as isize - radius;
            let dx = (i % side) as isize - radius;
            (-((dx * dx + dy * dy) as f64) * inv_s).exp()
        })
        .collect();

    let sc = src.channels();
    let n = src.plane_len();
    let src_planes: Vec<&[f64]> = src.planes().collect();
    let guide_planes: Vec<&[f64]> = guide.planes().collect();

    // Rows are filtered independently; results land in a row-interleaved
    // buffer [y][c][x] and are transposed into planar order afterwards.
    let mut rows = vec![0.0; n * sc];
    rows.par_chunks_mut(w * sc).enumerate().for_each(|(y, out)| {
        let mut acc = vec![0.0; sc];
        for x in 0..w {
            let s = y * w + x;
            acc.iter_mut().for_each(|a| *a = 0.0);
            let mut z = 0.0;
            let y0 = (y as isize - radius).max(0) as usize;
            let y1 = (y as isize + radius).min(h as isize - 1) as usize;
            let x0 = (x as isize - radius).max(0) as usize;
            let x1 = (x as isize + radius).min(w as isize - 1) as usize;
            for ty in y0..=y1 {
                let ky = (ty as isize - y as isize + radius) as usize * side;
                for tx in x0..=x1 {
                    let t = ty * w + tx;
                    let kx = (tx as isize - x as isize + radius) as usize;
                    let mut d2 = 0.0;
                    for gp in &guide_planes {
                        let d = gp[s] - gp[t];
                        d2 += d * d;
                    }
                    let wt = spatial[ky + kx] * (-d2 * inv_r).exp();
                    z += wt;
                    for (a, sp) in acc.iter_mut().zip(&src_planes) {
                        *a += wt * sp[t];
                    }
                }
            }
            for c in 0..sc {
                out[c * w + x] = acc[c] / z;
            }
        }
    });
    let mut data = vec![0.0; n * sc];
    for y in 0..h {
        for c in 0..sc {
            let from = &rows[(y * sc + c) * w..(y * sc + c + 1) * w];
            data[c * n + y * w..c * n + (y + 1) * w].copy_from_slice(from);
        }
    }
    PlanarImage::new(w, h, sc, data)
}

/// Dense (x, y, range) accumulator. Layout is `[y][x][z]` so range
/// neighbours are contiguous.
struct Grid {
    nx: usize,
    ny: usize,
    nz: usize,
}

impl Grid {
    #[inline]
    fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (y * self.nx + x) * self.nz + z
    }

    fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }
}

/// Trilinear cell coordinates of one pixel: base indices and fractions.
#[derive(Clone, Copy)]
struct Cell {
    i: [usize; 3],
    f: [f64; 3],
}

impl Cell {
    /// Visits the eight surrounding grid nodes with their trilinear weights.
    #[inline]
    fn corners(&self, grid: &Grid, mut visit: impl FnMut(usize, f64)) {
        let [ix, iy, iz] = self.i;
        let [fx, fy, fz] = self.f;
        for (dy, wy) in [(0, 1.0 - fy), (1, fy)] {
            for (dx, wx) in [(0, 1.0 - fx), (1, fx)] {
                let base = grid.index(ix + dx, iy + dy, iz);
                let wxy = wx * wy;
                visit(base, wxy * (1.0 - fz));
                visit(base + 1, wxy * fz);
            }
        }
    }
}

/// Radius-2 Gaussian (sigma = 1 cell), normalized.
fn grid_kernel() -> [f64; 5] {
    let mut k = [0.0; 5];
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - 2.0;
        *v = (-0.5 * d * d).exp();
    }
    let s: f64 = k.iter().sum();
    k.map(|v| v / s)
}

/// Convolves every line of the grid along one axis, zero outside.
fn blur_axis(data: &mut [f64], len: usize, stride: usize, count_outer: usize, inner: usize) {
    let k = grid_kernel();
    let mut line = vec![0.0; len];
    let mut out = vec![0.0; len];
    for o in 0..count_outer {
        for i in 0..inner {
            let base = o * len * stride + i;
            for (j, v) in line.iter_mut().enumerate() {
                *v = data[base + j * stride];
            }
            for (j, ov) in out.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (t, &kt) in k.iter().enumerate() {
                    let s = j as isize + t as isize - 2;
                    if s >= 0 && (s as usize) < len {
                        acc += kt * line[s as usize];
                    }
                }
                *ov = acc;
            }
            for (j, &v) in out.iter().enumerate() {
                data[base + j * stride] = v;
            }
        }
    }
}

fn blur_grid(data: &mut [f64], g: &Grid) {
    // z: contiguous lines
    blur_axis(data, g.nz, 1, g.nx * g.ny, 1);
    // x: stride nz, one block per row
    blur_axis(data, g.nx, g.nz, g.ny, g.nz);
    // y: stride nx*nz
    blur_axis(data, g.ny, g.nx * g.nz, 1, g.nx * g.nz);
}

/// Bilateral-grid approximation of the (joint) bilateral filter.
///
/// The guide must be single-channel; each source channel is filtered with
/// the same range weights.
pub fn blf_grid(
    src: &PlanarImage,
    guide: &PlanarImage,
    p: &RangeSpatialParams,
    gp: &GridParams,
) -> Result<PlanarImage> {
    p.validate()?;
    gp.validate()?;
    check_guide(src, guide)?;
    if guide.channels() != 1 {
        return Err(Error::InvalidInput(
            "the bilateral grid needs a single-channel guide".into(),
        ));
    }
    guide.check_finite()?;
    let (w, h) = (src.width(), src.height());
    let mut out = PlanarImage::filled(w, h, src.channels(), 0.0)?;
    let srcs: Vec<&[f64]> = src.planes().collect();
    grid_filter(&srcs, guide.plane(0), w, h, gp, out.data_mut());
    Ok(out)
}

/// [`blf_grid`] on raw planes: every plane of `srcs` is filtered with the
/// range weights of `g` and written to the matching plane of `out`.
/// Parameters and the guide must already be validated.
pub(crate) fn grid_filter(srcs: &[&[f64]], g: &[f64], w: usize, h: usize, gp: &GridParams, out: &mut [f64]) {
    let (gmin, gmax) = g.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let ss = gp.spatial_sampling;
    let sr = gp.range_sampling;
    let grid = Grid {
        nx: ((w - 1) as f64 / ss).floor() as usize + 2,
        ny: ((h - 1) as f64 / ss).floor() as usize + 2,
        nz: ((gmax - gmin) / sr).floor() as usize + 2,
    };
    // x and y cell coordinates are shared by every row and column.
    let axis = |n: usize| -> Vec<(usize, f64)> {
        (0..n)
            .map(|i| {
                let v = i as f64 / ss;
                (v.floor() as usize, v - v.floor())
            })
            .collect()
    };
    let (xs, ys) = (axis(w), axis(h));
    let inv_sr = 1.0 / sr;
    let cell_at = |x: usize, y: usize| {
        let z = (g[y * w + x] - gmin) * inv_sr;
        let iz = z.floor();
        Cell {
            i: [xs[x].0, ys[y].0, iz as usize],
            f: [xs[x].1, ys[y].1, z - iz],
        }
    };

    let mut weights = vec![0.0; grid.len()];
    let mut values = vec![vec![0.0; grid.len()]; srcs.len()];
    for y in 0..h {
        for x in 0..w {
            let s = y * w + x;
            cell_at(x, y).corners(&grid, |i, wt| {
                weights[i] += wt;
                for (acc, plane) in values.iter_mut().zip(srcs) {
                    acc[i] += wt * plane[s];
                }
            });
        }
    }
    blur_grid(&mut weights, &grid);
    for acc in &mut values {
        blur_grid(acc, &grid);
    }

    for ((acc, plane), out) in values.iter().zip(srcs).zip(out.chunks_mut(w * h)) {
        out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
            for (x, o) in row.iter_mut().enumerate() {
                let (mut num, mut den) = (0.0, 0.0);
                cell_at(x, y).corners(&grid, |i, wt| {
                    num += wt * acc[i];
                    den += wt * weights[i];
                });
                *o = if den > 1e-300 { num / den } else { plane[y * w + x] };
            }
        });
    }
}
