//! End-to-end smoothers.
//!
//! `smooth` normalizes its input to `[0,1]`, reflect-pads it and then runs
//! one of four methods:
//!
//! * LS: homogeneous least squares, solved by FFT.
//! * WLS: weighted least squares, solved by sparse Cholesky.
//! * BLF-LS / NC-LS: the forward gradients of the padded image are mapped
//!   from `[-1,1]` to `[0,1]`, edge-aware filtered (bilateral or
//!   domain-transform), mapped back, and used as the gradient target of the
//!   FFT reconstruction.
//!
//! The result is cropped and mapped back to the input's range. A guidance
//! image, when supplied, replaces the input's gradients as the edge source
//! of the gradient filter.

use rayon::prelude::*;

use crate::bilateral::{blf_brute, grid_filter, GridParams, RangeSpatialParams};
use crate::domain_transform::{nc_filter_in_place, DtParams};
use crate::error::{ensure_positive, Error, Result};
use crate::image::{
    crop, denormalize_in_place, forward_gradients, gaussian_blur, normalize_to_unit, reflect_pad, shape_error,
    GradientField, PlanarImage,
};
use crate::solver::{ls_solve_fft, lsgrad_solve_periodic, wls_solve, SolveParams, WlsParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlfBackend {
    /// Bilateral grid; `None` picks one cell per sigma.
    Grid(Option<GridParams>),
    /// Exact evaluation. With `joint_color` the range distance of every
    /// channel's filter spans all channels of the guide gradients.
    Brute { joint_color: bool },
}

impl Default for BlfBackend {
    fn default() -> Self {
        BlfBackend::Grid(None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Ls,
    Wls(WlsParams),
    BlfLs {
        params: RangeSpatialParams,
        backend: BlfBackend,
    },
    NcLs(DtParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SmootherKind {
    Ls,
    Wls,
    BlfLs,
    NcLs,
}

impl SmootherKind {
    pub fn name(self) -> &'static str {
        match self {
            SmootherKind::Ls => "ls",
            SmootherKind::Wls => "wls",
            SmootherKind::BlfLs => "blf-ls",
            SmootherKind::NcLs => "nc-ls",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SmootherSpec {
    pub method: Method,
    pub solve: SolveParams,
    pub guidance: Option<PlanarImage>,
}

impl SmootherSpec {
    pub fn ls(lambda: f64) -> Self {
        Self::from_method(Method::Ls).with_lambda(lambda)
    }

    pub fn wls(p: WlsParams) -> Self {
        Self::from_method(Method::Wls(p))
    }

    /// BLF-LS with the bilateral grid backend and the default solve.
    pub fn blf_ls(sigma_s: f64, sigma_r: f64) -> Self {
        Self::from_method(Method::BlfLs {
            params: RangeSpatialParams { sigma_s, sigma_r },
            backend: BlfBackend::default(),
        })
    }

    pub fn nc_ls(p: DtParams) -> Self {
        Self::from_method(Method::NcLs(p))
    }

    pub fn from_method(method: Method) -> Self {
        Self {
            method,
            solve: SolveParams::default(),
            guidance: None,
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.solve.lambda = lambda;
        self
    }

    pub fn with_pad(mut self, pad: usize) -> Self {
        self.solve.pad = pad;
        self
    }

    pub fn with_guidance(mut self, guidance: PlanarImage) -> Self {
        self.guidance = Some(guidance);
        self
    }

    pub fn kind(&self) -> SmootherKind {
        match self.method {
            Method::Ls => SmootherKind::Ls,
            Method::Wls(_) => SmootherKind::Wls,
            Method::BlfLs { .. } => SmootherKind::BlfLs,
            Method::NcLs(_) => SmootherKind::NcLs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.solve.validate()?;
        match &self.method {
            Method::Ls => Ok(()),
            Method::Wls(p) => p.validate(),
            Method::BlfLs { params, backend } => {
                params.validate()?;
                match backend {
                    BlfBackend::Grid(Some(gp)) => gp.validate(),
                    _ => Ok(()),
                }
            }
            Method::NcLs(p) => p.validate(),
        }
    }
}

/// A filter applied to `[0,1]`-mapped gradient images.
///
/// `src` holds every channel of one gradient axis; `guide` holds the
/// matching guide gradients with either one channel or as many as `src`.
/// Implementations must return an image shaped like `src`.
pub trait GradientFilter: Sync {
    fn filter(&self, src: &PlanarImage, guide: &PlanarImage) -> Result<PlanarImage>;
}

fn guide_channel(guide: &PlanarImage, c: usize) -> PlanarImage {
    guide.channel_image(if guide.channels() == 1 { 0 } else { c })
}

fn per_channel<F>(src: &PlanarImage, guide: &PlanarImage, f: F) -> Result<PlanarImage>
where
    F: Fn(&PlanarImage, &PlanarImage) -> Result<PlanarImage> + Sync,
{
    let planes = (0..src.channels())
        .into_par_iter()
        .map(|c| f(&src.channel_image(c), &guide_channel(guide, c)).map(PlanarImage::into_data))
        .collect::<Result<Vec<_>>>()?;
    PlanarImage::from_planes(src.width(), src.height(), planes)
}

/// Like [`per_channel`] for filters that write one plane into a slice,
/// avoiding per-channel copies.
fn per_plane<F>(src: &PlanarImage, guide: &PlanarImage, f: F) -> Result<PlanarImage>
where
    F: Fn(&[f64], &[f64], &mut [f64]) + Sync,
{
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
    src.check_finite()?;
    guide.check_finite()?;
    let mut out = PlanarImage::filled(src.width(), src.height(), src.channels(), 0.0)?;
    let n = src.plane_len();
    out.data_mut().par_chunks_mut(n).enumerate().for_each(|(c, o)| {
        let gc = if guide.channels() == 1 { 0 } else { c };
        f(src.plane(c), guide.plane(gc), o);
    });
    Ok(out)
}

pub struct BilateralGradientFilter {
    pub params: RangeSpatialParams,
    pub backend: BlfBackend,
}

impl GradientFilter for BilateralGradientFilter {
    fn filter(&self, src: &PlanarImage, guide: &PlanarImage) -> Result<PlanarImage> {
        match self.backend {
            BlfBackend::Grid(gp) => {
                self.params.validate()?;
                let gp = gp.unwrap_or_else(|| GridParams::canonical(&self.params));
                gp.validate()?;
                let (w, h) = (src.width(), src.height());
                per_plane(src, guide, |s, g, out| grid_filter(&[s], g, w, h, &gp, out))
            }
            BlfBackend::Brute { joint_color: true } => blf_brute(src, guide, &self.params),
            BlfBackend::Brute { joint_color: false } => per_channel(src, guide, |s, g| blf_brute(s, g, &self.params)),
        }
    }
}

pub struct NcGradientFilter {
    pub params: DtParams,
}

impl GradientFilter for NcGradientFilter {
    fn filter(&self, src: &PlanarImage, guide: &PlanarImage) -> Result<PlanarImage> {
        self.params.validate()?;
        let (w, h) = (src.width(), src.height());
        per_plane(src, guide, |s, g, out| {
            out.copy_from_slice(s);
            nc_filter_in_place(out, w, h, &[g], &self.params);
        })
    }
}

/// Intermediate products of a gradient-targeted smoothing run.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    /// Final result in the input's range and size.
    pub output: PlanarImage,
    /// Solution on the normalized, padded grid.
    pub padded: PlanarImage,
    /// Filtered gradient target on the normalized, padded grid.
    pub target: GradientField,
}

fn to_unit_range(v: f64) -> f64 {
    (v + 1.0) * 0.5
}

fn from_unit_range(v: f64) -> f64 {
    2.0 * v - 1.0
}

fn check_guidance(g: &PlanarImage, guidance: &PlanarImage) -> Result<()> {
    if !g.same_size(guidance) || (guidance.channels() != 1 && guidance.channels() != g.channels()) {
        return Err(Error::InvalidInput(format!(
            "guidance is {}x{}x{}, input is {}x{}x{}",
            guidance.width(),
            guidance.height(),
            guidance.channels(),
            g.width(),
            g.height(),
            g.channels()
        )));
    }
    Ok(())
}

/// Gradient-targeted smoothing with an arbitrary gradient filter.
pub fn smooth_with_filter(
    g: &PlanarImage,
    filter: &dyn GradientFilter,
    solve: &SolveParams,
    guidance: Option<&PlanarImage>,
) -> Result<Reconstruction> {
    solve.validate()?;
    if let Some(h) = guidance {
        check_guidance(g, h)?;
    }
    let (gn, rec) = normalize_to_unit(g)?;
    let padded = reflect_pad(&gn, solve.pad);
    let mut grads = forward_gradients(&padded);
    grads.gx.map_in_place(to_unit_range);
    grads.gy.map_in_place(to_unit_range);
    let guide_grads = match guidance {
        Some(h) => {
            let (hn, _) = normalize_to_unit(h)?;
            let mut t = forward_gradients(&reflect_pad(&hn, solve.pad));
            t.gx.map_in_place(to_unit_range);
            t.gy.map_in_place(to_unit_range);
            Some(t)
        }
        None => None,
    };
    let axes = match &guide_grads {
        Some(t) => [(&grads.gx, &t.gx), (&grads.gy, &t.gy)],
        None => [(&grads.gx, &grads.gx), (&grads.gy, &grads.gy)],
    };
    let mut filtered = axes
        .par_iter()
        .map(|(src, guide)| {
            let mut out = filter.filter(src, guide)?;
            if !out.same_shape(src) {
                return Err(Error::InvalidInput("gradient filter changed the image shape".into()));
            }
            out.map_in_place(from_unit_range);
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    drop(grads);
    let gy = filtered.pop().expect("two axes");
    let gx = filtered.pop().expect("two axes");
    let target = GradientField { gx, gy };
    let u = lsgrad_solve_periodic(&padded, &target, solve.lambda)?;
    let mut output = crop(&u, solve.pad)?;
    denormalize_in_place(&mut output, rec)?;
    Ok(Reconstruction {
        output,
        padded: u,
        target,
    })
}

/// Like [`smooth`] for the gradient-targeted methods, but also returns the
/// padded solution and gradient target. LS and WLS have no target and are
/// rejected.
pub fn smooth_detailed(g: &PlanarImage, spec: &SmootherSpec) -> Result<Reconstruction> {
    spec.validate()?;
    match spec.method {
        Method::BlfLs { params, backend } => smooth_with_filter(
            g,
            &BilateralGradientFilter { params, backend },
            &spec.solve,
            spec.guidance.as_ref(),
        ),
        Method::NcLs(params) => {
            smooth_with_filter(g, &NcGradientFilter { params }, &spec.solve, spec.guidance.as_ref())
        }
        Method::Ls | Method::Wls(_) => Err(Error::Parameter(format!(
            "{} has no gradient target",
            spec.kind().name()
        ))),
    }
}

pub fn smooth(g: &PlanarImage, spec: &SmootherSpec) -> Result<PlanarImage> {
    spec.validate()?;
    g.check_finite()?;
    match spec.method {
        Method::Ls => {
            let (gn, rec) = normalize_to_unit(g)?;
            let mut u = ls_solve_fft(&gn, &spec.solve)?;
            denormalize_in_place(&mut u, rec)?;
            Ok(u)
        }
        Method::Wls(p) => {
            let (gn, rec) = normalize_to_unit(g)?;
            let mut u = wls_solve(&gn, &p)?;
            denormalize_in_place(&mut u, rec)?;
            Ok(u)
        }
        Method::BlfLs { .. } | Method::NcLs(_) => Ok(smooth_detailed(g, spec)?.output),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RollingParams {
    pub n: usize,
    pub init_sigma: f64,
}

impl RollingParams {
    pub fn new(n: usize, init_sigma: f64) -> Result<Self> {
        let p = Self { n, init_sigma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Parameter("rolling iterations must be at least 1".into()));
        }
        ensure_positive("init_sigma", self.init_sigma)
    }
}

/// Rolling-guidance NC-LS: the original input is smoothed `n` times, each
/// round guided by the previous round's output, starting from a Gaussian
/// blur of the input.
pub fn rolling_nc_ls(g: &PlanarImage, dt: &DtParams, sp: &SolveParams, rp: &RollingParams) -> Result<PlanarImage> {
    rp.validate()?;
    dt.validate()?;
    sp.validate()?;
    let mut guide = gaussian_blur(g, rp.init_sigma)?;
    let filter = NcGradientFilter { params: *dt };
    for _ in 0..rp.n {
        guide = smooth_with_filter(g, &filter, sp, Some(&guide))?.output;
    }
    Ok(guide)
}
