//! Normalized-convolution domain-transform filter.
//!
//! Each scanline is warped onto a 1-D coordinate
//! `ct(x) = sum_{k=1..x} (1 + sigma_s / sigma_r * sum_c |guide_c(k) - guide_c(k-1)|)`
//! (with `ct(0) = 0`), then box-filtered in that coordinate. Horizontal and
//! vertical passes alternate for `iterations` rounds, with the box radius
//! shrinking so that the variances of all passes add up to `sigma_s^2`.

use rayon::prelude::*;

use crate::error::{ensure_positive, Error, Result};
use crate::image::{shape_error, PlanarImage};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DtParams {
    pub sigma_s: f64,
    pub sigma_r: f64,
    pub iterations: usize,
}

impl DtParams {
    pub fn new(sigma_s: f64, sigma_r: f64) -> Result<Self> {
        let p = Self {
            sigma_s,
            sigma_r,
            iterations: 3,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("sigma_s", self.sigma_s)?;
        ensure_positive("sigma_r", self.sigma_r)?;
        if self.iterations == 0 {
            return Err(Error::Parameter("iterations must be at least 1".into()));
        }
        Ok(())
    }

    /// Box radius of pass `i` (0-based): `sqrt(3) * sigma_i` where
    /// `sigma_i = sigma_s * sqrt(3) * 2^(N-1-i) / sqrt(4^N - 1)`.
    pub fn box_radius(&self, i: usize) -> f64 {
        let n = self.iterations as i32;
        let sigma_i = self.sigma_s * 3f64.sqrt() * 2f64.powi(n - 1 - i as i32) / (4f64.powi(n) - 1.0).sqrt();
        3f64.sqrt() * sigma_i
    }
}

/// Transformed-domain coordinates along rows, row-major.
fn row_coords(planes: &[&[f64]], w: usize, h: usize, ratio: f64) -> Vec<f64> {
    let mut ct = vec![0.0; w * h];
    ct.par_chunks_mut(w).enumerate().for_each(|(y, out)| {
        let row = y * w;
        for x in 1..w {
            let d: f64 = planes.iter().map(|p| (p[row + x] - p[row + x - 1]).abs()).sum();
            out[x] = out[x - 1] + 1.0 + ratio * d;
        }
    });
    ct
}

/// Transformed-domain coordinates along columns, also stored row-major.
fn column_coords(planes: &[&[f64]], w: usize, h: usize, ratio: f64) -> Vec<f64> {
    let mut ct = vec![0.0; w * h];
    for y in 1..h {
        let (done, rest) = ct.split_at_mut(y * w);
        let prev = &done[(y - 1) * w..];
        for (x, out) in rest[..w].iter_mut().enumerate() {
            let (a, b) = (y * w + x, (y - 1) * w + x);
            let d: f64 = planes.iter().map(|p| (p[a] - p[b]).abs()).sum();
            *out = prev[x] + 1.0 + ratio * d;
        }
    }
    ct
}

/// In-place box filter of one scanline over the window
/// `|ct(k) - ct(x)| <= radius`, using prefix sums and two monotone pointers.
/// `prefix` must hold at least `line.len() + 1` entries.
fn box_filter_line(line: &mut [f64], ct: &[f64], radius: f64, prefix: &mut [f64], recip: &[f64]) {
    let n = line.len();
    let ct = &ct[..n];
    let prefix = &mut prefix[..n + 1];
    prefix[0] = 0.0;
    for k in 0..n {
        prefix[k + 1] = prefix[k] + line[k];
    }
    let next = |k: usize| if k < n { ct[k] } else { f64::INFINITY };
    let (mut lo, mut hi) = (0usize, 0usize);
    for (x, out) in line.iter_mut().enumerate() {
        let (lpos, upos) = (ct[x] - radius, ct[x] + radius);
        // Pointers usually move by at most two; take those steps without
        // branching and fall back to a loop for long jumps.
        lo += (ct[lo] < lpos) as usize;
        lo += (ct[lo] < lpos) as usize;
        while ct[lo] < lpos {
            lo += 1;
        }
        hi += (next(hi + 1) <= upos) as usize;
        hi += (next(hi + 1) <= upos) as usize;
        while next(hi + 1) <= upos {
            hi += 1;
        }
        *out = (prefix[hi + 1] - prefix[lo]) * recip[hi + 1 - lo];
    }
}

fn horizontal_pass(plane: &mut [f64], w: usize, ct: &[f64], radius: f64, recip: &[f64]) {
    plane.par_chunks_mut(w).zip(ct.par_chunks(w)).for_each_init(
        || vec![0.0; w + 1],
        |prefix, (row, ct_row)| box_filter_line(row, ct_row, radius, prefix, recip),
    );
}

/// `1 / k` for window sizes `k` up to `n`.
fn reciprocals(n: usize) -> Vec<f64> {
    (0..=n).map(|k| if k == 0 { 0.0 } else { 1.0 / k as f64 }).collect()
}

/// Columns handled together by [`vertical_pass`].
const STRIP: usize = 64;

/// Buffers for [`vertical_pass`]: prefix sums of one column strip, the
/// per-column window bounds and window-size reciprocals.
struct ColumnScratch {
    prefix: Vec<f64>,
    lo: Vec<usize>,
    hi: Vec<usize>,
    recip: Vec<f64>,
}

impl ColumnScratch {
    fn new(h: usize) -> Self {
        Self {
            prefix: vec![0.0; (h + 1) * STRIP],
            lo: vec![0; STRIP],
            hi: vec![0; STRIP],
            recip: reciprocals(h),
        }
    }
}

/// Column counterpart of [`box_filter_line`]. The image is processed in
/// strips of `STRIP` columns; rows of a strip are swept in storage order
/// while every column keeps its own pair of window pointers.
fn vertical_pass(plane: &mut [f64], w: usize, h: usize, ct: &[f64], radius: f64, s: &mut ColumnScratch) {
    for x0 in (0..w).step_by(STRIP) {
        let b = STRIP.min(w - x0);
        let prefix = &mut s.prefix[..(h + 1) * b];
        prefix[..b].fill(0.0);
        for y in 0..h {
            let (done, rest) = prefix.split_at_mut((y + 1) * b);
            let prev = &done[y * b..];
            let row = &plane[y * w + x0..y * w + x0 + b];
            for ((p, &a), &v) in rest[..b].iter_mut().zip(prev).zip(row) {
                *p = a + v;
            }
        }
        let (lo_s, hi_s) = (&mut s.lo[..b], &mut s.hi[..b]);
        lo_s.fill(0);
        hi_s.fill(0);
        for y in 0..h {
            let ct_row = &ct[y * w + x0..y * w + x0 + b];
            let out = &mut plane[y * w + x0..y * w + x0 + b];
            for j in 0..b {
                let (lpos, upos) = (ct_row[j] - radius, ct_row[j] + radius);
                let (mut lo, mut hi) = (lo_s[j], hi_s[j]);
                let col = x0 + j;
                while ct[lo * w + col] < lpos {
                    lo += 1;
                }
                while hi + 1 < h && ct[(hi + 1) * w + col] <= upos {
                    hi += 1;
                }
                lo_s[j] = lo;
                hi_s[j] = hi;
                out[j] = (prefix[(hi + 1) * b + j] - prefix[lo * b + j]) * s.recip[hi + 1 - lo];
            }
        }
    }
}

/// NC domain-transform filter of `src`, with edges taken from `guide`
/// (which may have any channel count; absolute differences are summed).
pub fn nc_filter(src: &PlanarImage, guide: &PlanarImage, p: &DtParams) -> Result<PlanarImage> {
    p.validate()?;
    if !src.same_size(guide) {
        return Err(shape_error(src, guide));
    }
    guide.check_finite()?;
    let (w, h) = (src.width(), src.height());
    let mut out = src.clone();
    let planes: Vec<&[f64]> = guide.planes().collect();
    nc_filter_in_place(out.data_mut(), w, h, &planes, p);
    Ok(out)
}

/// [`nc_filter`] on raw data: filters every `w * h` plane of `data` in
/// place with edges from the `guide` planes. Parameters and the guide must
/// already be validated.
pub(crate) fn nc_filter_in_place(data: &mut [f64], w: usize, h: usize, guide: &[&[f64]], p: &DtParams) {
    let ratio = p.sigma_s / p.sigma_r;
    let ct_h = row_coords(guide, w, h, ratio);
    let ct_v = column_coords(guide, w, h, ratio);
    let mut scratch = ColumnScratch::new(h);
    let recip = reciprocals(w);
    for plane in data.chunks_mut(w * h) {
        for i in 0..p.iterations {
            let r = p.box_radius(i);
            horizontal_pass(plane, w, &ct_h, r, &recip);
            vertical_pass(plane, w, h, &ct_v, r, &mut scratch);
        }
    }
}

/// A single horizontal pass of pass index `pass`; exposed for tests that
/// check the per-row recipe in isolation.
pub fn nc_horizontal_pass(src: &PlanarImage, guide: &PlanarImage, p: &DtParams, pass: usize) -> Result<PlanarImage> {
    p.validate()?;
    if !src.same_size(guide) {
        return Err(shape_error(src, guide));
    }
    let (w, h) = (src.width(), src.height());
    let planes: Vec<&[f64]> = guide.planes().collect();
    let ct_h = row_coords(&planes, w, h, p.sigma_s / p.sigma_r);
    let mut out = src.clone();
    for c in 0..out.channels() {
        horizontal_pass(out.plane_mut(c), w, &ct_h, p.box_radius(pass), &reciprocals(w));
    }
    Ok(out)
}
