//! Artifact and fidelity measures.

use crate::error::{ensure_positive, Result};
use crate::image::{shape_error, PlanarImage};

pub const DEFAULT_REVERSAL_TAU: f64 = 0.03;

/// Number of pixels (summed over channels) where the input has a forward
/// difference steeper than `tau` along some axis and the enhanced image's
/// difference along that axis has the opposite sign. Differences are taken
/// inside the image only, without wrap-around.
pub fn gradient_reversal_count(input: &PlanarImage, enhanced: &PlanarImage, tau: f64) -> Result<usize> {
    if !input.same_shape(enhanced) {
        return Err(shape_error(input, enhanced));
    }
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(crate::Error::Parameter(format!("tau must be non-negative, got {tau}")));
    }
    let (w, h) = (input.width(), input.height());
    let mut count = 0;
    for c in 0..input.channels() {
        let a = input.plane(c);
        let b = enhanced.plane(c);
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let reversed = |j: usize| {
                    let da = a[j] - a[i];
                    da.abs() > tau && da * (b[j] - b[i]) < 0.0
                };
                if (x + 1 < w && reversed(i + 1)) || (y + 1 < h && reversed(i + w)) {
                    count += 1;
                }
            }
        }
    }
    Ok(count)
}

/// Largest non-wrapping forward-difference magnitude over all channels and
/// both axes.
pub fn max_gradient(img: &PlanarImage) -> f64 {
    let (w, h) = (img.width(), img.height());
    let mut m: f64 = 0.0;
    for p in img.planes() {
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if x + 1 < w {
                    m = m.max((p[i + 1] - p[i]).abs());
                }
                if y + 1 < h {
                    m = m.max((p[i + w] - p[i]).abs());
                }
            }
        }
    }
    m
}

/// `max_gradient(output) / max_gradient(input)`; values above 1 indicate
/// edge sharpening. A flat input yields 0 for a flat output and infinity
/// otherwise.
pub fn max_grad_ratio(input: &PlanarImage, output: &PlanarImage) -> Result<f64> {
    if !input.same_shape(output) {
        return Err(shape_error(input, output));
    }
    let (gi, go) = (max_gradient(input), max_gradient(output));
    Ok(if gi > 0.0 {
        go / gi
    } else if go > 0.0 {
        f64::INFINITY
    } else {
        0.0
    })
}

pub fn mse(a: &PlanarImage, b: &PlanarImage) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(shape_error(a, b));
    }
    let s: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).powi(2)).sum();
    Ok(s / a.data().len() as f64)
}

/// Peak signal-to-noise ratio in dB for the given peak value.
pub fn psnr(reference: &PlanarImage, test: &PlanarImage, peak: f64) -> Result<f64> {
    ensure_positive("peak", peak)?;
    let m = mse(reference, test)?;
    Ok(10.0 * (peak * peak / m).log10())
}
