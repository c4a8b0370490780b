//! Planar floating-point rasters and the small set of operators every
//! smoother builds on: range normalization, circular forward differences,
//! reflect padding, Gaussian blur and luminance transforms.

use rayon::prelude::*;

use crate::error::{ensure_positive, Error, Result};

/// An H×W×C real raster stored channel-planar: all of channel 0 row-major,
/// then channel 1, and so on.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl PlanarImage {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidInput(format!(
                "channel count must be 1 or 3, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::InvalidInput(format!(
                "data length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Builds an image from a closure over `(x, y, channel)`.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    /// Stacks equally sized single-channel planes.
    pub fn from_planes(width: usize, height: usize, planes: Vec<Vec<f64>>) -> Result<Self> {
        let channels = planes.len();
        let mut data = Vec::with_capacity(width * height * channels);
        for p in planes {
            if p.len() != width * height {
                return Err(Error::InvalidInput(format!(
                    "plane length {} does not match {width}x{height}",
                    p.len()
                )));
            }
            data.extend(p);
        }
        Self::new(width, height, channels, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn plane_len(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.plane_len();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn planes(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.plane_len())
    }

    /// Copies channel `c` out as a single-channel image.
    pub fn channel_image(&self, c: usize) -> PlanarImage {
        PlanarImage {
            width: self.width,
            height: self.height,
            channels: 1,
            data: self.plane(c).to_vec(),
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[c * self.plane_len() + y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        let n = self.plane_len();
        self.data[c * n + y * self.width + x] = v;
    }

    pub fn same_size(&self, other: &PlanarImage) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn same_shape(&self, other: &PlanarImage) -> bool {
        self.same_size(other) && self.channels == other.channels
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> PlanarImage {
        PlanarImage {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn map_in_place(&mut self, f: impl Fn(f64) -> f64) {
        for v in &mut self.data {
            *v = f(*v);
        }
    }

    /// Elementwise combination of two images of identical shape.
    pub fn zip_map(&self, other: &PlanarImage, f: impl Fn(f64, f64) -> f64) -> Result<PlanarImage> {
        if !self.same_shape(other) {
            return Err(shape_error(self, other));
        }
        Ok(PlanarImage {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(i) => Err(Error::InvalidInput(format!(
                "non-finite sample {} at index {i}",
                self.data[i]
            ))),
        }
    }

    /// Largest absolute elementwise difference; panics on shape mismatch.
    pub fn max_abs_diff(&self, other: &PlanarImage) -> f64 {
        assert!(self.same_shape(other), "{}", shape_error(self, other));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn shape_error(a: &PlanarImage, b: &PlanarImage) -> Error {
    Error::InvalidInput(format!(
        "shape mismatch: {}x{}x{} vs {}x{}x{}",
        a.width, a.height, a.channels, b.width, b.height, b.channels
    ))
}

/// Per-channel x/y forward differences of an image.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub gx: PlanarImage,
    pub gy: PlanarImage,
}

impl GradientField {
    pub fn zeros_like(img: &PlanarImage) -> Self {
        let z = img.map(|_| 0.0);
        Self { gx: z.clone(), gy: z }
    }
}

/// Original value range of an image mapped onto [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationRecord {
    pub lo: f64,
    pub hi: f64,
}

/// Affinely maps all samples (jointly over channels) onto [0, 1].
///
/// A constant image maps to zeros with record `(lo, lo + 1)` so that
/// [`denormalize`] stays exact.
pub fn normalize_to_unit(img: &PlanarImage) -> Result<(PlanarImage, NormalizationRecord)> {
    img.check_finite()?;
    let (lo, hi) = img.min_max();
    if hi > lo {
        let scale = 1.0 / (hi - lo);
        let out = img.map(|v| ((v - lo) * scale).clamp(0.0, 1.0));
        Ok((out, NormalizationRecord { lo, hi }))
    } else {
        Ok((img.map(|_| 0.0), NormalizationRecord { lo, hi: lo + 1.0 }))
    }
}

pub fn denormalize(img: &PlanarImage, rec: NormalizationRecord) -> Result<PlanarImage> {
    let mut out = img.clone();
    denormalize_in_place(&mut out, rec)?;
    Ok(out)
}

pub fn denormalize_in_place(img: &mut PlanarImage, rec: NormalizationRecord) -> Result<()> {
    if !(rec.lo.is_finite() && rec.hi.is_finite() && rec.hi > rec.lo) {
        return Err(Error::Parameter(format!(
            "normalization record needs hi > lo, got ({}, {})",
            rec.lo, rec.hi
        )));
    }
    let span = rec.hi - rec.lo;
    img.map_in_place(|v| rec.lo + v * span);
    Ok(())
}

/// Circular forward differences: `gx[y,x] = img[y,(x+1) mod W] - img[y,x]`
/// and likewise for `gy` along columns.
pub fn forward_gradients(img: &PlanarImage) -> GradientField {
    let (w, h) = (img.width, img.height);
    let mut gx = img.map(|_| 0.0);
    let mut gy = gx.clone();
    for c in 0..img.channels {
        let src = img.plane(c);
        let dx = gx.plane_mut(c);
        for y in 0..h {
            let row = &src[y * w..(y + 1) * w];
            let out = &mut dx[y * w..(y + 1) * w];
            for x in 0..w - 1 {
                out[x] = row[x + 1] - row[x];
            }
            out[w - 1] = row[0] - row[w - 1];
        }
        let dy = gy.plane_mut(c);
        for y in 0..h {
            let next = if y + 1 == h { 0 } else { (y + 1) * w };
            let (a, b) = (&src[next..next + w], &src[y * w..(y + 1) * w]);
            for ((d, &p), &q) in dy[y * w..(y + 1) * w].iter_mut().zip(a).zip(b) {
                *d = p - q;
            }
        }
    }
    GradientField { gx, gy }
}

/// Folds an out-of-range index back into `0..n` by symmetric reflection
/// (`... 1 0 | 0 1 ... n-1 | n-1 n-2 ...`), repeating as often as needed.
#[inline]
pub(crate) fn reflect_index(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

/// Symmetric reflect padding by `pad` pixels on every side.
pub fn reflect_pad(img: &PlanarImage, pad: usize) -> PlanarImage {
    if pad == 0 {
        return img.clone();
    }
    let (w, h) = (img.width, img.height);
    let (pw, ph) = (w + 2 * pad, h + 2 * pad);
    let cols: Vec<usize> = (0..pw).map(|x| reflect_index(x as isize - pad as isize, w)).collect();
    let mut data = Vec::with_capacity(pw * ph * img.channels);
    for plane in img.planes() {
        for y in 0..ph {
            let sy = reflect_index(y as isize - pad as isize, h);
            let row = &plane[sy * w..(sy + 1) * w];
            data.extend(cols.iter().map(|&sx| row[sx]));
        }
    }
    PlanarImage {
        width: pw,
        height: ph,
        channels: img.channels,
        data,
    }
}

/// Removes `pad` pixels from every side.
pub fn crop(img: &PlanarImage, pad: usize) -> Result<PlanarImage> {
    if pad == 0 {
        return Ok(img.clone());
    }
    if img.width <= 2 * pad || img.height <= 2 * pad {
        return Err(Error::InvalidInput(format!(
            "cannot crop {pad} px from a {}x{} image",
            img.width, img.height
        )));
    }
    let (w, h) = (img.width - 2 * pad, img.height - 2 * pad);
    let mut data = Vec::with_capacity(w * h * img.channels);
    for plane in img.planes() {
        for y in pad..pad + h {
            let start = y * img.width + pad;
            data.extend_from_slice(&plane[start..start + w]);
        }
    }
    PlanarImage::new(w, h, img.channels, data)
}

/// Normalized Gaussian taps for offsets `-r..=r`, `r = ceil(3 sigma)`.
pub(crate) fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as usize;
    let inv = 1.0 / (2.0 * sigma * sigma);
    let mut k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-d * d * inv).exp()
        })
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

fn blur_plane(src: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let mut tmp = vec![0.0; w * h];
    tmp.par_chunks_mut(w).enumerate().for_each(|(y, out)| {
        let row = &src[y * w..(y + 1) * w];
        for (x, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, &wt) in kernel.iter().enumerate() {
                let sx = (x as isize + k as isize - r).clamp(0, w as isize - 1) as usize;
                acc += wt * row[sx];
            }
            *o = acc;
        }
    });
    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (k, &wt) in kernel.iter().enumerate() {
            let sy = (y as isize + k as isize - r).clamp(0, h as isize - 1) as usize;
            let src_row = &tmp[sy * w..(sy + 1) * w];
            for (o, &v) in row.iter_mut().zip(src_row) {
                *o += wt * v;
            }
        }
    });
    out
}

/// Separable Gaussian blur with replicate borders; the kernel is truncated
/// at `ceil(3 sigma)` and renormalized.
pub fn gaussian_blur(img: &PlanarImage, sigma: f64) -> Result<PlanarImage> {
    ensure_positive("sigma", sigma)?;
    let kernel = gaussian_kernel(sigma);
    let planes = img
        .planes()
        .map(|p| blur_plane(p, img.width, img.height, &kernel))
        .collect();
    PlanarImage::from_planes(img.width, img.height, planes)
}

/// Rec. 709 luminance; a single-channel image is its own luminance.
pub fn luminance(img: &PlanarImage) -> PlanarImage {
    if img.channels == 1 {
        return img.clone();
    }
    let (r, g, b) = (img.plane(0), img.plane(1), img.plane(2));
    let data = r
        .iter()
        .zip(g)
        .zip(b)
        .map(|((&r, &g), &b)| 0.2126 * r + 0.7152 * g + 0.0722 * b)
        .collect();
    PlanarImage {
        width: img.width,
        height: img.height,
        channels: 1,
        data,
    }
}

pub const LOG_FLOOR: f64 = 1e-6;

/// Returns `(log10(L + 1e-6), L)` with `L` the Rec. 709 luminance.
pub fn to_log_luminance(img: &PlanarImage) -> (PlanarImage, PlanarImage) {
    let lum = luminance(img);
    let log = lum.map(|v| (v.max(0.0) + LOG_FLOOR).log10());
    (log, lum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(w: usize, h: usize, c: usize, seed: u64) -> PlanarImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PlanarImage::from_fn(w, h, c, |_, _, _| rng.random::<f64>()).unwrap()
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(PlanarImage::new(2, 2, 1, vec![0.0; 3]).is_err());
        assert!(PlanarImage::new(2, 2, 2, vec![0.0; 8]).is_err());
        assert!(PlanarImage::new(0, 2, 1, vec![]).is_err());
    }

    #[test]
    fn normalize_examples() {
        let img = PlanarImage::new(3, 1, 1, vec![2.0, 4.0, 6.0]).unwrap();
        let (n, rec) = normalize_to_unit(&img).unwrap();
        assert_eq!(n.data(), &[0.0, 0.5, 1.0]);
        assert_eq!(rec, NormalizationRecord { lo: 2.0, hi: 6.0 });
        let back = denormalize(&n, rec).unwrap();
        assert_eq!(back.data(), &[2.0, 4.0, 6.0]);

        let c = PlanarImage::new(2, 1, 1, vec![5.0, 5.0]).unwrap();
        let (n, rec) = normalize_to_unit(&c).unwrap();
        assert_eq!(n.data(), &[0.0, 0.0]);
        assert_eq!(rec, NormalizationRecord { lo: 5.0, hi: 6.0 });
        assert_eq!(denormalize(&n, rec).unwrap().data(), &[5.0, 5.0]);

        let s = PlanarImage::new(2, 1, 1, vec![-1.0, 1.0]).unwrap();
        let (n, rec) = normalize_to_unit(&s).unwrap();
        assert_eq!(n.data(), &[0.0, 1.0]);
        assert_eq!(rec, NormalizationRecord { lo: -1.0, hi: 1.0 });
    }

    #[test]
    fn normalize_rejects_non_finite() {
        let img = PlanarImage::new(2, 1, 1, vec![0.0, f64::NAN]).unwrap();
        assert!(matches!(normalize_to_unit(&img), Err(Error::InvalidInput(_))));
        let bad = NormalizationRecord { lo: 1.0, hi: 1.0 };
        assert!(denormalize(&img, bad).is_err());
    }

    #[test]
    fn normalize_round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data: Vec<f64> = (0..1000).map(|_| rng.random_range(-300.0..900.0)).collect();
        let img = PlanarImage::new(1000, 1, 1, data).unwrap();
        let (n, rec) = normalize_to_unit(&img).unwrap();
        let (lo, hi) = n.min_max();
        assert!(lo >= 0.0 && hi <= 1.0);
        let back = denormalize(&n, rec).unwrap();
        assert!(back.max_abs_diff(&img) < 1e-6 * (rec.hi - rec.lo));
    }

    #[test]
    fn gradients_wrap_circularly() {
        let img = PlanarImage::new(2, 1, 1, vec![0.0, 1.0]).unwrap();
        let g = forward_gradients(&img);
        assert_eq!(g.gx.data(), &[1.0, -1.0]);
        assert_eq!(g.gy.data(), &[0.0, 0.0]);

        let c = PlanarImage::filled(5, 4, 3, 0.7).unwrap();
        let g = forward_gradients(&c);
        assert!(g.gx.data().iter().chain(g.gy.data()).all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_rows_and_columns_telescope() {
        let img = random_image(4, 4, 1, 3);
        let g = forward_gradients(&img);
        for y in 0..4 {
            let s: f64 = (0..4).map(|x| g.gx.get(x, y, 0)).sum();
            assert!(s.abs() < 1e-12);
        }
        let big = random_image(37, 23, 3, 4);
        let g = forward_gradients(&big);
        for c in 0..3 {
            for y in 0..23 {
                let s: f64 = (0..37).map(|x| g.gx.get(x, y, c)).sum();
                assert!(s.abs() < 1e-5);
            }
            for x in 0..37 {
                let s: f64 = (0..23).map(|y| g.gy.get(x, y, c)).sum();
                assert!(s.abs() < 1e-5);
            }
        }
        for &v in g.gx.data().iter().chain(g.gy.data()) {
            assert!((-1.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn reflect_pad_and_crop() {
        let img = random_image(5, 3, 1, 9);
        let p = reflect_pad(&img, 2);
        assert_eq!((p.width(), p.height()), (9, 7));
        // symmetric: padded column 1 mirrors source column 0
        assert_eq!(p.get(1, 2, 0), img.get(0, 0, 0));
        assert_eq!(p.get(0, 2, 0), img.get(1, 0, 0));
        assert_eq!(p.get(8, 2, 0), img.get(3, 0, 0));
        assert_eq!(crop(&p, 2).unwrap(), img);
        // padding wider than the image keeps reflecting
        let wide = reflect_pad(&img, 7);
        assert_eq!(crop(&wide, 7).unwrap(), img);
        assert_eq!(reflect_index(-7, 5), 3);
    }

    #[test]
    fn blur_keeps_constants() {
        let img = PlanarImage::filled(17, 11, 3, 0.42).unwrap();
        for sigma in [0.3, 1.0, 2.5, 9.0] {
            let b = gaussian_blur(&img, sigma).unwrap();
            assert!(b.max_abs_diff(&img) < 1e-6);
        }
        assert!(gaussian_blur(&img, 0.0).is_err());
        assert!(gaussian_blur(&img, -1.0).is_err());
    }

    #[test]
    fn blur_impulse_peak_matches_continuous_density() {
        let mut img = PlanarImage::filled(41, 41, 1, 0.0).unwrap();
        img.set(20, 20, 0, 1.0);
        let b = gaussian_blur(&img, 1.0).unwrap();
        let peak = b.get(20, 20, 0);
        let k = gaussian_kernel(1.0);
        let discrete = k[3] * k[3];
        assert!((peak - discrete).abs() < 1e-12);
        let continuous = 1.0 / (2.0 * std::f64::consts::PI);
        assert!((continuous - discrete).abs() / discrete < 0.02);
    }

    #[test]
    fn blur_preserves_mean_away_from_borders() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let img = PlanarImage::from_fn(48, 40, 1, |x, y, _| {
            if (12..36).contains(&x) && (12..28).contains(&y) {
                rng.random::<f64>()
            } else {
                0.0
            }
        })
        .unwrap();
        let b = gaussian_blur(&img, 2.5).unwrap();
        assert!((b.mean() - img.mean()).abs() < 1e-5);
    }

    #[test]
    fn log_luminance_examples() {
        let gray = PlanarImage::filled(3, 2, 3, 1.0).unwrap();
        let (log, lum) = to_log_luminance(&gray);
        assert!(lum.data().iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert!(log.data().iter().all(|&v| v.abs() < 1e-5));

        let red = PlanarImage::from_fn(1, 1, 3, |_, _, c| if c == 0 { 1.0 } else { 0.0 }).unwrap();
        let (_, lum) = to_log_luminance(&red);
        assert!((lum.data()[0] - 0.2126).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let hdr = PlanarImage::from_fn(8, 8, 3, |_, _, _| 10f64.powf(rng.random_range(-3.0..4.0))).unwrap();
        let (log, lum) = to_log_luminance(&hdr);
        for (l, v) in log.data().iter().zip(lum.data()) {
            let back = 10f64.powf(*l);
            assert!((back - (v + 1e-6)).abs() <= 1e-6 * (v + 1e-6));
        }

        let mono = PlanarImage::new(2, 1, 1, vec![0.5, 2.0]).unwrap();
        assert_eq!(luminance(&mono), mono);
    }
}
