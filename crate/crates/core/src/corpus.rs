//! Deterministic synthetic test images.
//!
//! Everything here is generated from a seed so tests, benchmarks and the
//! CLI's `bench` command see identical pixels on every machine.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::image::PlanarImage;

/// Default seed for [`natural`].
pub const NATURAL_SEED: u64 = 0x5eed_1234;

/// Multi-octave value noise on a lattice, roughly in `[-1, 1]`.
struct ValueNoise {
    octaves: Vec<(f64, f64, usize, Vec<f64>)>,
}

impl ValueNoise {
    fn new(rng: &mut ChaCha8Rng, w: usize, h: usize, spacings: &[(f64, f64)]) -> Self {
        let octaves = spacings
            .iter()
            .map(|&(spacing, amp)| {
                let nx = (w as f64 / spacing).ceil() as usize + 2;
                let ny = (h as f64 / spacing).ceil() as usize + 2;
                let lattice = (0..nx * ny).map(|_| rng.random_range(-1.0..1.0)).collect();
                (spacing, amp, nx, lattice)
            })
            .collect();
        Self { octaves }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
        self.octaves
            .iter()
            .map(|(spacing, amp, nx, lat)| {
                let (fx, fy) = (x / spacing, y / spacing);
                let (ix, iy) = (fx.floor() as usize, fy.floor() as usize);
                let (tx, ty) = (smooth(fx - ix as f64), smooth(fy - iy as f64));
                let v = |i: usize, j: usize| lat[j * nx + i];
                let top = v(ix, iy) * (1.0 - tx) + v(ix + 1, iy) * tx;
                let bottom = v(ix, iy + 1) * (1.0 - tx) + v(ix + 1, iy + 1) * tx;
                amp * (top * (1.0 - ty) + bottom * ty)
            })
            .sum()
    }
}

enum Shape {
    Disc { cx: f64, cy: f64, r: f64 },
    Rect { x0: f64, y0: f64, x1: f64, y1: f64 },
}

impl Shape {
    /// Signed distance, negative inside.
    fn distance(&self, x: f64, y: f64) -> f64 {
        match *self {
            Shape::Disc { cx, cy, r } => ((x - cx).powi(2) + (y - cy).powi(2)).sqrt() - r,
            Shape::Rect { x0, y0, x1, y1 } => {
                let dx = (x0 - x).max(x - x1);
                let dy = (y0 - y).max(y - y1);
                if dx <= 0.0 && dy <= 0.0 {
                    dx.max(dy)
                } else {
                    (dx.max(0.0).powi(2) + dy.max(0.0).powi(2)).sqrt()
                }
            }
        }
    }
}

/// A 3-channel "natural" scene: smooth colored background, a dozen
/// overlapping shapes with slightly soft edges, multi-scale texture and
/// faint noise. Values stay inside `[0,1]`.
pub fn natural(width: usize, height: usize, seed: u64) -> PlanarImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = width.min(height) as f64;
    let texture = ValueNoise::new(
        &mut rng,
        width,
        height,
        &[(24.0, 0.5), (8.0, 0.3), (3.0, 0.2), (1.5, 0.15)],
    );
    let background = ValueNoise::new(&mut rng, width, height, &[(scale * 0.6, 1.0)]);
    let base: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.35..0.6));
    let tilt: [f64; 3] = std::array::from_fn(|_| rng.random_range(-0.1..0.1));

    let mut shapes = Vec::new();
    for k in 0..12 {
        let shape = if k % 2 == 0 {
            Shape::Disc {
                cx: rng.random_range(0.0..width as f64),
                cy: rng.random_range(0.0..height as f64),
                r: rng.random_range(0.05..0.2) * scale,
            }
        } else {
            let (cx, cy) = (
                rng.random_range(0.0..width as f64),
                rng.random_range(0.0..height as f64),
            );
            let (hw, hh) = (
                rng.random_range(0.05..0.25) * scale,
                rng.random_range(0.05..0.25) * scale,
            );
            Shape::Rect {
                x0: cx - hw,
                y0: cy - hh,
                x1: cx + hw,
                y1: cy + hh,
            }
        };
        let contrast = rng.random_range(0.2..0.5) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let hue: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.6..1.0));
        let softness = rng.random_range(0.5..1.5);
        let texture_gain = rng.random_range(0.02..0.08);
        shapes.push((shape, contrast, hue, softness, texture_gain));
    }

    let mut img = PlanarImage::from_fn(width, height, 3, |x, y, c| {
        let (fx, fy) = (x as f64, y as f64);
        base[c] + tilt[c] * (fx / width as f64 - 0.5) + 0.08 * background.at(fx, fy)
    })
    .expect("valid size");
    let mut gain = vec![0.03; width * height];
    for (shape, contrast, hue, softness, texture_gain) in &shapes {
        for y in 0..height {
            for x in 0..width {
                let d = shape.distance(x as f64 + 0.5, y as f64 + 0.5);
                let cover = 1.0 / (1.0 + (d / softness * 2.0).exp());
                if cover < 1e-6 {
                    continue;
                }
                for (c, h) in hue.iter().enumerate() {
                    let v = img.get(x, y, c) + cover * contrast * h;
                    img.set(x, y, c, v);
                }
                let i = y * width + x;
                gain[i] = gain[i] * (1.0 - cover) + texture_gain * cover;
            }
        }
    }
    let mut noise = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    for y in 0..height {
        for x in 0..width {
            let t = gain[y * width + x] * texture.at(x as f64, y as f64);
            for c in 0..3 {
                let n = noise.random_range(-0.005..0.005);
                let v = img.get(x, y, c) + t + n;
                img.set(x, y, c, v);
            }
        }
    }
    // Keep the range inside [0,1] without clipping shapes flat.
    let (lo, hi) = img.min_max();
    let (lo, hi) = (lo.min(0.05), hi.max(0.95));
    img.map(|v| 0.05 + 0.9 * (v - lo) / (hi - lo))
}

/// Parameters of [`texture_on_step`].
pub const STEP_LOW: f64 = 0.3;
pub const STEP_HIGH: f64 = 0.7;
pub const TEXTURE_AMPLITUDE: f64 = 0.1;
pub const TEXTURE_PERIOD: f64 = 6.0;

/// Single-channel vertical step at `x = width / 2` from `STEP_LOW` to
/// `STEP_HIGH`, plus `TEXTURE_AMPLITUDE * sin(2 pi x / TEXTURE_PERIOD)`.
pub fn texture_on_step(width: usize, height: usize) -> PlanarImage {
    let edge = width / 2;
    PlanarImage::from_fn(width, height, 1, |x, _, _| {
        let step = if x < edge { STEP_LOW } else { STEP_HIGH };
        step + TEXTURE_AMPLITUDE * (2.0 * std::f64::consts::PI * x as f64 / TEXTURE_PERIOD).sin()
    })
    .expect("valid size")
}

pub const CLIPART_DARK: f64 = 0.2;
pub const CLIPART_BRIGHT: f64 = 0.8;
pub const RINGING_AMPLITUDE: f64 = 0.05;
pub const RINGING_WIDTH: usize = 3;

/// Two-tone single-channel clip-art with a vertical edge between columns
/// `width / 2 - 1` and `width / 2`, and alternating `±RINGING_AMPLITUDE`
/// ringing in the `RINGING_WIDTH` columns on either side of the edge
/// (overshoot on the bright side, undershoot on the dark side next to the
/// edge). Returns the ringing image and the clean two-tone image.
pub fn clipart_with_ringing(width: usize, height: usize) -> (PlanarImage, PlanarImage) {
    let edge = width / 2;
    let clean = PlanarImage::from_fn(
        width,
        height,
        1,
        |x, _, _| {
            if x < edge {
                CLIPART_DARK
            } else {
                CLIPART_BRIGHT
            }
        },
    )
    .expect("valid size");
    let ringing = PlanarImage::from_fn(width, height, 1, |x, y, c| {
        let (k, side) = if x < edge {
            (edge - 1 - x, -1.0)
        } else {
            (x - edge, 1.0)
        };
        let ring = if k < RINGING_WIDTH {
            let alternating = if k % 2 == 0 { 1.0 } else { -1.0 };
            side * alternating * RINGING_AMPLITUDE
        } else {
            0.0
        };
        clean.get(x, y, c) + ring
    })
    .expect("valid size");
    (ringing, clean)
}

/// A positive HDR scene spanning about four decades: the natural image's
/// luminance structure mapped exponentially, with a bright window.
pub fn hdr_scene(width: usize, height: usize, seed: u64) -> PlanarImage {
    let ldr = natural(width, height, seed);
    let (wx0, wx1) = (width * 5 / 8, width * 7 / 8);
    let (wy0, wy1) = (height / 8, height * 3 / 8);
    PlanarImage::from_fn(width, height, 3, |x, y, c| {
        let boost = if (wx0..wx1).contains(&x) && (wy0..wy1).contains(&y) {
            2.0
        } else {
            0.0
        };
        10f64.powf(3.0 * ldr.get(x, y, c) - 2.0 + boost)
    })
    .expect("valid size")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn natural_is_deterministic_and_in_range() {
        let a = natural(64, 48, 7);
        let b = natural(64, 48, 7);
        assert_eq!(a.data(), b.data());
        let (lo, hi) = a.min_max();
        assert!(lo >= 0.0 && hi <= 1.0 && hi - lo > 0.5);
        assert_ne!(natural(64, 48, 8).data(), a.data());
    }

    #[test]
    fn synthetic_layouts() {
        let t = texture_on_step(24, 4);
        assert!((t.get(0, 0, 0) - STEP_LOW).abs() < 1e-12);
        assert!((t.get(12, 3, 0) - STEP_HIGH).abs() < 1e-12);
        let (ring, clean) = clipart_with_ringing(20, 3);
        assert_eq!(ring.get(10, 0, 0), CLIPART_BRIGHT + RINGING_AMPLITUDE);
        assert_eq!(ring.get(9, 0, 0), CLIPART_DARK - RINGING_AMPLITUDE);
        assert_eq!(ring.get(13, 0, 0), clean.get(13, 0, 0));
        let hdr = hdr_scene(32, 32, 1);
        let (lo, hi) = hdr.min_max();
        assert!(lo > 0.0 && hi / lo > 1e3);
    }
}
