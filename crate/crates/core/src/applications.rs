//! Base/detail applications built on the smoothers.

use crate::domain_transform::DtParams;
use crate::error::{ensure_positive, Error, Result};
use crate::image::{shape_error, to_log_luminance, PlanarImage, LOG_FLOOR};
use crate::pipelines::{rolling_nc_ls, smooth, RollingParams, SmootherSpec};
use crate::solver::SolveParams;

/// `base` is the smoothed signal and `detail = signal - base`.
#[derive(Debug, Clone)]
pub struct Layers {
    pub base: PlanarImage,
    pub detail: PlanarImage,
}

impl Layers {
    /// `base + (1 + boost) * detail`, unclamped.
    pub fn recombine(&self, boost: f64) -> PlanarImage {
        self.base
            .zip_map(&self.detail, |b, d| b + (1.0 + boost) * d)
            .expect("layers share a shape")
    }
}

pub fn decompose(g: &PlanarImage, spec: &SmootherSpec) -> Result<Layers> {
    let base = smooth(g, spec)?;
    let detail = g.zip_map(&base, |a, b| a - b)?;
    Ok(Layers { base, detail })
}

#[derive(Debug, Clone)]
pub struct EnhanceParams {
    /// Extra detail magnification; 0 leaves the image unchanged.
    pub boost: f64,
    pub smoother: SmootherSpec,
}

impl EnhanceParams {
    pub fn new(boost: f64, smoother: SmootherSpec) -> Result<Self> {
        let p = Self { boost, smoother };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.boost.is_finite() && self.boost >= 0.0) {
            return Err(Error::Parameter(format!(
                "boost must be finite and non-negative, got {}",
                self.boost
            )));
        }
        self.smoother.validate()
    }
}

/// `clamp(g + boost * (g - smooth(g)), 0, 1)`.
pub fn detail_enhance(g: &PlanarImage, p: &EnhanceParams) -> Result<PlanarImage> {
    p.validate()?;
    let layers = decompose(g, &p.smoother)?;
    Ok(layers.recombine(p.boost).map(|v| v.clamp(0.0, 1.0)))
}

#[derive(Debug, Clone)]
pub struct TonemapParams {
    /// Decades of dynamic range kept in the compressed base layer.
    pub target_contrast: f64,
    /// Exponent applied to the color ratios `hdr_c / L`.
    pub saturation: f64,
    pub smoother: SmootherSpec,
}

impl TonemapParams {
    pub fn new(smoother: SmootherSpec) -> Self {
        Self {
            target_contrast: 1.0,
            saturation: 0.6,
            smoother,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("target_contrast", self.target_contrast)?;
        if !(self.saturation > 0.0 && self.saturation <= 1.5) {
            return Err(Error::Parameter(format!(
                "saturation must lie in (0, 1.5], got {}",
                self.saturation
            )));
        }
        self.smoother.validate()
    }
}

/// Log-luminance of the tone-mapped result before exponentiation:
/// `s * (base - max(base)) + detail`, where `s` compresses the base range to
/// `target_contrast` decades (or 1 for a flat base).
pub fn compress_log_layers(layers: &Layers, target_contrast: f64) -> PlanarImage {
    let (lo, hi) = layers.base.min_max();
    let s = if hi - lo > 1e-12 {
        target_contrast / (hi - lo)
    } else {
        1.0
    };
    layers
        .base
        .zip_map(&layers.detail, |b, d| s * (b - hi) + d)
        .expect("layers share a shape")
}

/// Tone-maps a positive HDR radiance map into `[0,1]` by compressing the
/// base layer of its log10 luminance.
pub fn tonemap_hdr(hdr: &PlanarImage, p: &TonemapParams) -> Result<PlanarImage> {
    p.validate()?;
    hdr.check_finite()?;
    if hdr.data().iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidInput("HDR radiance must be non-negative".into()));
    }
    let (log_l, lum) = to_log_luminance(hdr);
    let layers = decompose(&log_l, &p.smoother)?;
    let mapped = compress_log_layers(&layers, p.target_contrast);
    if mapped.check_finite().is_err() {
        return Err(Error::Parameter("tone-mapped base layer is not finite".into()));
    }
    PlanarImage::from_fn(hdr.width(), hdr.height(), hdr.channels(), |x, y, c| {
        let l = lum.get(x, y, 0).max(LOG_FLOOR);
        let ratio = if hdr.channels() == 1 { 1.0 } else { hdr.get(x, y, c) / l };
        let out = 10f64.powf(mapped.get(x, y, 0)) * ratio.powf(p.saturation);
        out.clamp(0.0, 1.0)
    })
}

/// Smooths `noflash` with edges taken from the gradients of `flash`.
pub fn flash_no_flash(noflash: &PlanarImage, flash: &PlanarImage, spec: &SmootherSpec) -> Result<PlanarImage> {
    if !noflash.same_size(flash) {
        return Err(shape_error(noflash, flash));
    }
    smooth(noflash, &spec.clone().with_guidance(flash.clone()))
}

pub fn texture_removal_defaults() -> (DtParams, RollingParams) {
    (
        DtParams {
            sigma_s: 8.0,
            sigma_r: 0.02,
            iterations: 3,
        },
        RollingParams { n: 3, init_sigma: 2.5 },
    )
}

pub fn clipart_defaults() -> (DtParams, RollingParams) {
    (
        DtParams {
            sigma_s: 6.0,
            sigma_r: 0.02,
            iterations: 3,
        },
        RollingParams { n: 2, init_sigma: 0.75 },
    )
}

pub fn texture_removal(g: &PlanarImage, dt: &DtParams, rp: &RollingParams) -> Result<PlanarImage> {
    rolling_nc_ls(g, dt, &SolveParams::default(), rp)
}

pub fn clipart_cleanup(g: &PlanarImage, dt: &DtParams, rp: &RollingParams) -> Result<PlanarImage> {
    rolling_nc_ls(g, dt, &SolveParams::default(), rp)
}
