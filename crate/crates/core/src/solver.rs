//! Least-squares reconstruction solvers.
//!
//! The homogeneous problems
//!
//! ```text
//! min_u |u - g|^2 + lambda * sum_{* in x,y} |D_* u - t_*|^2
//! ```
//!
//! are diagonalized by the 2-D DFT when `D_x`, `D_y` are circular forward
//! differences, so the solve is one forward FFT, a pointwise division by
//! `1 + lambda (|F(D_x)|^2 + |F(D_y)|^2)` and one inverse FFT. With
//! `t = 0` this is plain LS smoothing; with `t` a filtered gradient field it
//! is the gradient-targeted reconstruction.
//!
//! The weighted (WLS) problem has a spatially varying Laplacian and is
//! solved by sparse Cholesky instead. A dense normal-equations solver for
//! tiny grids serves as ground truth for the FFT path.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Par, Side};
use nalgebra::DMatrix;
use rustfft::num_complex::Complex64;

use crate::error::{ensure_positive, Error, Result};
use crate::fft::Fft2;
use crate::image::{crop, forward_gradients, luminance, reflect_index, reflect_pad, GradientField, PlanarImage};

pub const DEFAULT_LAMBDA: f64 = 1024.0;
pub const DEFAULT_PAD: usize = 16;

/// Regularization weight and reflect-padding width for the FFT solves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveParams {
    pub lambda: f64,
    pub pad: usize,
}

impl Default for SolveParams {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            pad: DEFAULT_PAD,
        }
    }
}

impl SolveParams {
    pub fn new(lambda: f64, pad: usize) -> Result<Self> {
        let p = Self { lambda, pad };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda.is_finite() && self.lambda >= 0.0 {
            Ok(())
        } else {
            Err(Error::Parameter(format!(
                "lambda must be finite and non-negative, got {}",
                self.lambda
            )))
        }
    }
}

/// Weighted least squares parameters: `w = lambda / (|grad l|^alpha + eps)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WlsParams {
    pub lambda: f64,
    pub alpha: f64,
    pub eps: f64,
}

impl Default for WlsParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            alpha: 1.2,
            eps: 1e-4,
        }
    }
}

impl WlsParams {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("lambda", self.lambda)?;
        ensure_positive("eps", self.eps)?;
        if !self.alpha.is_finite() {
            return Err(Error::Parameter(format!("alpha must be finite, got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Transfer functions of the circular forward differences on an H×W grid,
/// row-major: `x[u,v] = exp(2 pi i v / W) - 1`, `y[u,v] = exp(2 pi i u / H) - 1`.
#[derive(Debug, Clone)]
pub struct DifferenceOtf {
    pub height: usize,
    pub width: usize,
    pub x: Vec<Complex64>,
    pub y: Vec<Complex64>,
}

fn otf(height: usize, width: usize) -> DifferenceOtf {
    let tau = 2.0 * std::f64::consts::PI;
    let col: Vec<Complex64> = (0..width)
        .map(|v| Complex64::from_polar(1.0, tau * v as f64 / width as f64) - 1.0)
        .collect();
    let row: Vec<Complex64> = (0..height)
        .map(|u| Complex64::from_polar(1.0, tau * u as f64 / height as f64) - 1.0)
        .collect();
    let mut x = Vec::with_capacity(width * height);
    let mut y = Vec::with_capacity(width * height);
    for &ru in &row {
        x.extend_from_slice(&col);
        y.extend(std::iter::repeat_n(ru, width));
    }
    DifferenceOtf { height, width, x, y }
}

/// OTFs of the forward-difference kernels. Both sides must be at least 2.
pub fn difference_otf(height: usize, width: usize) -> Result<DifferenceOtf> {
    if height < 2 || width < 2 {
        return Err(Error::Parameter(format!(
            "difference OTF needs a grid of at least 2x2, got {height}x{width}"
        )));
    }
    Ok(otf(height, width))
}

/// `|exp(2 pi i k / n) - 1|^2 = 4 sin^2(pi k / n)` for `k` in `0..n`.
fn axis_symbol(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let s = (std::f64::consts::PI * k as f64 / n as f64).sin();
            4.0 * s * s
        })
        .collect()
}

/// `1 + lambda (|F(D_x)|^2 + |F(D_y)|^2)` on an H×W grid; every entry is
/// at least 1.
#[derive(Debug, Clone)]
pub struct SpectralDenominator {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl SpectralDenominator {
    pub fn new(height: usize, width: usize, lambda: f64) -> Self {
        let (sx, sy) = (axis_symbol(width), axis_symbol(height));
        let values = sy
            .iter()
            .flat_map(|&b| sx.iter().map(move |&a| 1.0 + lambda * (a + b)))
            .collect();
        Self { height, width, values }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Solves `(I + lambda D^T D) u = rhs` for each plane on the periodic grid.
///
/// The inverse operator has a real, even transfer function, so it maps real
/// inputs to real outputs; two planes are therefore solved per complex FFT,
/// one in the real part and one in the imaginary part.
fn periodic_solve(data: &mut [f64], height: usize, width: usize, lambda: f64) {
    if lambda == 0.0 {
        return;
    }
    let n = width * height;
    let fft = Fft2::new(height, width);
    // Inverse denominator with the 1/n of the inverse FFT folded in, laid
    // out like the transposed spectrum.
    let (sx, sy) = (axis_symbol(width), axis_symbol(height));
    let scale = 1.0 / n as f64;
    let gain: Vec<f64> = sx
        .iter()
        .flat_map(|&a| sy.iter().map(move |&b| scale / (1.0 + lambda * (a + b))))
        .collect();
    let mut buf = vec![Complex64::default(); n];
    let mut spectrum = vec![Complex64::default(); n];
    for pair in data.chunks_mut(2 * n) {
        let (a, b) = pair.split_at_mut(n);
        if b.is_empty() {
            for (z, &re) in buf.iter_mut().zip(a.iter()) {
                *z = Complex64::new(re, 0.0);
            }
        } else {
            for ((z, &re), &im) in buf.iter_mut().zip(a.iter()).zip(b.iter()) {
                *z = Complex64::new(re, im);
            }
        }
        fft.forward(&mut buf, &mut spectrum);
        for (z, &g) in spectrum.iter_mut().zip(&gain) {
            *z *= g;
        }
        fft.inverse(&mut spectrum, &mut buf);
        for (v, z) in a.iter_mut().zip(&buf) {
            *v = z.re;
        }
        for (v, z) in b.iter_mut().zip(&buf) {
            *v = z.im;
        }
    }
}

/// Applies the adjoint of the circular forward differences,
/// `D_x^T t [y,x] = t[y,x-1] - t[y,x]`, adding `lambda * (D_x^T tx + D_y^T ty)`
/// into `acc`.
fn add_adjoint_divergence(acc: &mut [f64], tx: &[f64], ty: &[f64], w: usize, h: usize, lambda: f64) {
    for y in 0..h {
        let prev_row = ((y + h - 1) % h) * w;
        for x in 0..w {
            let i = y * w + x;
            let left = if x == 0 { y * w + w - 1 } else { i - 1 };
            let up = prev_row + x;
            acc[i] += lambda * ((tx[left] - tx[i]) + (ty[up] - ty[i]));
        }
    }
}

/// Plain LS smoothing: reflect-pads by `p.pad`, solves each channel on the
/// periodic grid and crops back.
pub fn ls_solve_fft(g: &PlanarImage, p: &SolveParams) -> Result<PlanarImage> {
    p.validate()?;
    g.check_finite()?;
    let mut u = reflect_pad(g, p.pad);
    let (w, h) = (u.width(), u.height());
    periodic_solve(u.data_mut(), h, w, p.lambda);
    crop(&u, p.pad)
}

/// Gradient-targeted LS on the periodic grid of `g` itself (no padding).
pub fn lsgrad_solve_periodic(g: &PlanarImage, target: &GradientField, lambda: f64) -> Result<PlanarImage> {
    SolveParams { lambda, pad: 0 }.validate()?;
    if !g.same_shape(&target.gx) || !g.same_shape(&target.gy) {
        return Err(Error::InvalidInput(
            "gradient target shape does not match the image".into(),
        ));
    }
    g.check_finite()?;
    target.gx.check_finite()?;
    target.gy.check_finite()?;
    let (w, h) = (g.width(), g.height());
    let mut u = g.clone();
    for c in 0..g.channels() {
        add_adjoint_divergence(u.plane_mut(c), target.gx.plane(c), target.gy.plane(c), w, h, lambda);
    }
    periodic_solve(u.data_mut(), h, w, lambda);
    Ok(u)
}

/// Extends a gradient field defined on an image to the reflect-padded grid.
///
/// Along each line, the padded entry between padded samples `i` and `i+1`
/// is the sum of target differences between the original samples they
/// mirror, so the extension of `forward_gradients(g)` is exactly
/// `forward_gradients(reflect_pad(g))` (wrap-around included) and the
/// extension of a zero field is zero. The wrap-around entries of `target`
/// are never read.
pub fn reflect_pad_gradients(target: &GradientField, pad: usize) -> GradientField {
    let (w, h) = (target.gx.width(), target.gx.height());
    let (wp, hp) = (w + 2 * pad, h + 2 * pad);
    let src = |i: usize, n: usize| reflect_index(i as isize - pad as isize, n);
    let extend = |t: &PlanarImage, along_x: bool| -> PlanarImage {
        let (len, count) = if along_x { (w, h) } else { (h, w) };
        let plen = len + 2 * pad;
        let mut out = PlanarImage::filled(wp, hp, t.channels(), 0.0).expect("non-empty");
        let mut prefix = vec![0.0; len];
        for c in 0..t.channels() {
            let plane = t.plane(c);
            let dst = out.plane_mut(c);
            for pline in 0..count + 2 * pad {
                let line = src(pline, count);
                let at = |k: usize| if along_x { line * w + k } else { k * w + line };
                for k in 1..len {
                    prefix[k] = prefix[k - 1] + plane[at(k - 1)];
                }
                for i in 0..plen {
                    let (a, b) = (src(i, len), src((i + 1) % plen, len));
                    let idx = if along_x { pline * wp + i } else { i * wp + pline };
                    dst[idx] = prefix[b] - prefix[a];
                }
            }
        }
        out
    };
    GradientField {
        gx: extend(&target.gx, true),
        gy: extend(&target.gy, false),
    }
}

/// Gradient-targeted LS with reflect padding: `g` is reflect-padded, the
/// target is extended with [`reflect_pad_gradients`], and the periodic
/// solution is cropped.
pub fn lsgrad_solve_fft(g: &PlanarImage, target: &GradientField, p: &SolveParams) -> Result<PlanarImage> {
    p.validate()?;
    if p.pad == 0 {
        return lsgrad_solve_periodic(g, target, p.lambda);
    }
    if !g.same_shape(&target.gx) || !g.same_shape(&target.gy) {
        return Err(Error::InvalidInput(
            "gradient target shape does not match the image".into(),
        ));
    }
    let padded = reflect_pad(g, p.pad);
    let t = reflect_pad_gradients(target, p.pad);
    let u = lsgrad_solve_periodic(&padded, &t, p.lambda)?;
    crop(&u, p.pad)
}

/// Value of `|u - g|^2 + lambda |D u - t|^2` with circular differences.
pub fn lsgrad_energy(u: &PlanarImage, g: &PlanarImage, target: Option<&GradientField>, lambda: f64) -> f64 {
    let du = forward_gradients(u);
    let fidelity: f64 = u.data().iter().zip(g.data()).map(|(a, b)| (a - b).powi(2)).sum();
    let residual = |d: &PlanarImage, t: Option<&PlanarImage>| -> f64 {
        match t {
            Some(t) => d.data().iter().zip(t.data()).map(|(a, b)| (a - b).powi(2)).sum(),
            None => d.data().iter().map(|a| a * a).sum(),
        }
    };
    fidelity + lambda * (residual(&du.gx, target.map(|t| &t.gx)) + residual(&du.gy, target.map(|t| &t.gy)))
}

/// Smoothness weights of the WLS system for horizontal edges
/// `(x,y)-(x+1,y)` and vertical edges `(x,y)-(x,y+1)`, computed from the
/// natural-log luminance of `g`. Each is W×H row-major; the last column
/// (resp. row) is unused and zero.
pub fn wls_weights(g: &PlanarImage, p: &WlsParams) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = (g.width(), g.height());
    let lum = luminance(g);
    let l: Vec<f64> = lum.data().iter().map(|&v| (v.max(0.0) + 1e-6).ln()).collect();
    let weight = |d: f64| p.lambda / (d.abs().powf(p.alpha) + p.eps);
    let mut wx = vec![0.0; w * h];
    let mut wy = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if x + 1 < w {
                wx[i] = weight(l[i + 1] - l[i]);
            }
            if y + 1 < h {
                wy[i] = weight(l[i + w] - l[i]);
            }
        }
    }
    (wx, wy)
}

/// WLS smoothing: solves `(I + L_g) u = g` per channel, with `L_g` the
/// five-point inhomogeneous Laplacian built from [`wls_weights`] (which
/// already include `lambda`) and Neumann borders.
pub fn wls_solve(g: &PlanarImage, p: &WlsParams) -> Result<PlanarImage> {
    p.validate()?;
    g.check_finite()?;
    let (w, h) = (g.width(), g.height());
    let n = w * h;
    let (wx, wy) = wls_weights(g, p);

    let mut diag = vec![1.0; n];
    let mut triplets = Vec::with_capacity(3 * n);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if x + 1 < w {
                diag[i] += wx[i];
                diag[i + 1] += wx[i];
                triplets.push(Triplet::new(i + 1, i, -wx[i]));
            }
            if y + 1 < h {
                diag[i] += wy[i];
                diag[i + w] += wy[i];
                triplets.push(Triplet::new(i + w, i, -wy[i]));
            }
        }
    }
    triplets.extend(diag.iter().enumerate().map(|(i, &d)| Triplet::new(i, i, d)));

    // Sequential factorization keeps the result independent of thread count.
    faer::set_global_parallelism(Par::Seq);
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| Error::Resource(format!("assembling WLS system: {e:?}")))?;
    let llt = a
        .sp_cholesky(Side::Lower)
        .map_err(|e| Error::Resource(format!("factorizing WLS system: {e}")))?;
    let mut rhs = Mat::<f64>::from_fn(n, g.channels(), |i, c| g.plane(c)[i]);
    llt.solve_in_place(rhs.as_mut());
    let planes = (0..g.channels())
        .map(|c| (0..n).map(|i| rhs[(i, c)]).collect())
        .collect();
    PlanarImage::from_planes(w, h, planes)
}

pub const DENSE_ORACLE_MAX_UNKNOWNS: usize = 4096;

/// Ground-truth solve of `(I + lambda (Dx^T Dx + Dy^T Dy)) u = g + lambda
/// (Dx^T tx + Dy^T ty)` with explicitly assembled circular difference
/// matrices. Limited to `DENSE_ORACLE_MAX_UNKNOWNS` pixels per channel.
pub fn ls_solve_dense_oracle(g: &PlanarImage, target: Option<&GradientField>, lambda: f64) -> Result<PlanarImage> {
    SolveParams { lambda, pad: 0 }.validate()?;
    let (w, h) = (g.width(), g.height());
    let n = w * h;
    if n > DENSE_ORACLE_MAX_UNKNOWNS {
        return Err(Error::Resource(format!(
            "dense oracle refuses {n} unknowns (cap {DENSE_ORACLE_MAX_UNKNOWNS})"
        )));
    }
    if let Some(t) = target {
        if !g.same_shape(&t.gx) || !g.same_shape(&t.gy) {
            return Err(Error::InvalidInput(
                "gradient target shape does not match the image".into(),
            ));
        }
    }
    let mut dx = DMatrix::<f64>::zeros(n, n);
    let mut dy = DMatrix::<f64>::zeros(n, n);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            dx[(i, i)] -= 1.0;
            dx[(i, y * w + (x + 1) % w)] += 1.0;
            dy[(i, i)] -= 1.0;
            dy[(i, ((y + 1) % h) * w + x)] += 1.0;
        }
    }
    let a = DMatrix::<f64>::identity(n, n) + (dx.transpose() * &dx + dy.transpose() * &dy) * lambda;
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::Resource("dense normal equations not positive definite".into()))?;
    let planes = (0..g.channels())
        .map(|c| {
            let mut b = nalgebra::DVector::from_column_slice(g.plane(c));
            if let Some(t) = target {
                let tx = nalgebra::DVector::from_column_slice(t.gx.plane(c));
                let ty = nalgebra::DVector::from_column_slice(t.gy.plane(c));
                b += (dx.transpose() * tx + dy.transpose() * ty) * lambda;
            }
            chol.solve(&b).iter().copied().collect()
        })
        .collect();
    PlanarImage::from_planes(w, h, planes)
}
