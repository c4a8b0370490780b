//! Image files: 8-bit PNG / binary PNM for display-referred data, PFM and
//! Radiance HDR for radiance maps.
//!
//! 8-bit samples are mapped to `[0,1]` by `/255` on load and rounded to the
//! nearest code on save. Float formats round-trip through `f32`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma, Rgb};

use crate::error::{Error, Result};
use crate::image::PlanarImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileKind {
    Png,
    Pnm,
    Pfm,
    Hdr,
}

impl FileKind {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        match ext.as_str() {
            "png" => Ok(Self::Png),
            "ppm" | "pgm" | "pnm" => Ok(Self::Pnm),
            "pfm" => Ok(Self::Pfm),
            "hdr" => Ok(Self::Hdr),
            _ => Err(format_error(path, format!("unsupported file extension {ext:?}"))),
        }
    }

    pub fn is_float(self) -> bool {
        matches!(self, Self::Pfm | Self::Hdr)
    }
}

fn format_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.to_path_buf();
    move |source| Error::Io { path, source }
}

fn image_error(path: &Path, e: image::ImageError) -> Error {
    match e {
        image::ImageError::IoError(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => format_error(path, other.to_string()),
    }
}

/// Loads any supported file; the format is chosen by extension.
pub fn load(path: &Path) -> Result<PlanarImage> {
    match FileKind::from_path(path)? {
        FileKind::Pfm => read_pfm(path),
        FileKind::Png => decode(path, ImageFormat::Png),
        FileKind::Pnm => decode(path, ImageFormat::Pnm),
        FileKind::Hdr => decode(path, ImageFormat::Hdr),
    }
}

/// Saves to the format implied by the extension. LDR formats clamp to
/// `[0,1]`; HDR output needs 3 channels.
pub fn save(img: &PlanarImage, path: &Path) -> Result<()> {
    img.check_finite()?;
    match FileKind::from_path(path)? {
        FileKind::Pfm => write_pfm(img, path),
        FileKind::Png => encode_8bit(img, path, ImageFormat::Png),
        FileKind::Pnm => encode_8bit(img, path, ImageFormat::Pnm),
        FileKind::Hdr => encode_hdr(img, path),
    }
}

fn decode(path: &Path, format: ImageFormat) -> Result<PlanarImage> {
    let file = File::open(path).map_err(io_error(path))?;
    let dynamic = image::load(BufReader::new(file), format).map_err(|e| image_error(path, e))?;
    let (w, h) = (dynamic.width() as usize, dynamic.height() as usize);
    let gray = !dynamic.color().has_color();
    let img = match dynamic {
        DynamicImage::ImageRgb32F(buf) => interleaved_to_planar(w, h, 3, buf.as_raw(), |v| v as f64),
        DynamicImage::ImageRgba32F(buf) => {
            let rgb = DynamicImage::ImageRgba32F(buf).into_rgb32f();
            interleaved_to_planar(w, h, 3, rgb.as_raw(), |v| v as f64)
        }
        other if gray => {
            let luma = other.into_luma8();
            interleaved_to_planar(w, h, 1, luma.as_raw(), |v| v as f64 / 255.0)
        }
        other => {
            let rgb = other.into_rgb8();
            interleaved_to_planar(w, h, 3, rgb.as_raw(), |v| v as f64 / 255.0)
        }
    };
    img.map_err(|e| format_error(path, e.to_string()))
}

fn interleaved_to_planar<T: Copy>(
    w: usize,
    h: usize,
    channels: usize,
    raw: &[T],
    f: impl Fn(T) -> f64,
) -> Result<PlanarImage> {
    PlanarImage::from_fn(w, h, channels, |x, y, c| f(raw[(y * w + x) * channels + c]))
}

fn planar_to_interleaved<T>(img: &PlanarImage, f: impl Fn(f64) -> T) -> Vec<T> {
    let (w, h, n) = (img.width(), img.height(), img.channels());
    let mut out = Vec::with_capacity(w * h * n);
    for y in 0..h {
        for x in 0..w {
            for c in 0..n {
                out.push(f(img.get(x, y, c)));
            }
        }
    }
    out
}

/// `round(255 * clamp(v, 0, 1))`.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn encode_8bit(img: &PlanarImage, path: &Path, format: ImageFormat) -> Result<()> {
    let (w, h) = (img.width() as u32, img.height() as u32);
    let raw = planar_to_interleaved(img, quantize);
    let dynamic = match img.channels() {
        1 => DynamicImage::ImageLuma8(ImageBuffer::<Luma<u8>, _>::from_raw(w, h, raw).expect("buffer size")),
        3 => DynamicImage::ImageRgb8(ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, raw).expect("buffer size")),
        n => return Err(format_error(path, format!("cannot write {n} channels as 8-bit"))),
    };
    let file = File::create(path).map_err(io_error(path))?;
    let mut out = BufWriter::new(file);
    dynamic.write_to(&mut out, format).map_err(|e| image_error(path, e))?;
    out.flush().map_err(io_error(path))
}

fn encode_hdr(img: &PlanarImage, path: &Path) -> Result<()> {
    if img.channels() != 3 {
        return Err(format_error(path, "Radiance HDR output needs 3 channels"));
    }
    if img.data().iter().any(|&v| v < 0.0) {
        return Err(format_error(path, "Radiance HDR cannot store negative values"));
    }
    let raw = planar_to_interleaved(img, |v| v as f32);
    let buf = ImageBuffer::<Rgb<f32>, _>::from_raw(img.width() as u32, img.height() as u32, raw).expect("buffer size");
    let file = File::create(path).map_err(io_error(path))?;
    let mut out = BufWriter::new(file);
    DynamicImage::ImageRgb32F(buf)
        .write_to(&mut out, ImageFormat::Hdr)
        .map_err(|e| image_error(path, e))?;
    out.flush().map_err(io_error(path))
}

fn read_token(reader: &mut impl BufRead, path: &Path) -> Result<String> {
    let mut token = Vec::new();
    let mut byte = [0u8];
    loop {
        if reader.read(&mut byte).map_err(io_error(path))? == 0 {
            break;
        }
        if byte[0].is_ascii_whitespace() {
            if token.is_empty() {
                continue;
            }
            break;
        }
        token.push(byte[0]);
    }
    if token.is_empty() {
        return Err(format_error(path, "truncated PFM header"));
    }
    String::from_utf8(token).map_err(|_| format_error(path, "non-ASCII PFM header"))
}

/// Reads a PFM file (`PF` colour or `Pf` grey). Rows are stored bottom-up;
/// a negative scale marks little-endian samples.
pub fn read_pfm(path: &Path) -> Result<PlanarImage> {
    let file = File::open(path).map_err(io_error(path))?;
    let mut reader = BufReader::new(file);
    let channels = match read_token(&mut reader, path)?.as_str() {
        "PF" => 3,
        "Pf" => 1,
        other => return Err(format_error(path, format!("bad PFM magic {other:?}"))),
    };
    let parse = |s: String| -> Result<usize> {
        s.parse()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| format_error(path, format!("bad PFM dimension {s:?}")))
    };
    let w = parse(read_token(&mut reader, path)?)?;
    let h = parse(read_token(&mut reader, path)?)?;
    let scale_token = read_token(&mut reader, path)?;
    let scale: f32 = scale_token
        .parse()
        .ok()
        .filter(|s: &f32| s.is_finite() && *s != 0.0)
        .ok_or_else(|| format_error(path, format!("bad PFM scale {scale_token:?}")))?;
    let little = scale < 0.0;
    let mut bytes = vec![0u8; w * h * channels * 4];
    reader
        .read_exact(&mut bytes)
        .map_err(|_| format_error(path, "truncated PFM pixel data"))?;
    let samples: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|b| {
            let b = [b[0], b[1], b[2], b[3]];
            if little {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            }
        })
        .collect();
    PlanarImage::from_fn(w, h, channels, |x, y, c| {
        samples[((h - 1 - y) * w + x) * channels + c] as f64
    })
}

/// Writes a little-endian PFM file; images with other than 1 or 3
/// channels are rejected.
pub fn write_pfm(img: &PlanarImage, path: &Path) -> Result<()> {
    let (w, h, n) = (img.width(), img.height(), img.channels());
    let magic = match n {
        1 => "Pf",
        3 => "PF",
        _ => return Err(format_error(path, format!("cannot write {n} channels as PFM"))),
    };
    let file = File::create(path).map_err(io_error(path))?;
    let mut out = BufWriter::new(file);
    let mut bytes = format!("{magic}\n{w} {h}\n-1.0\n").into_bytes();
    for y in (0..h).rev() {
        for x in 0..w {
            for c in 0..n {
                bytes.extend_from_slice(&(img.get(x, y, c) as f32).to_le_bytes());
            }
        }
    }
    out.write_all(&bytes).map_err(io_error(path))?;
    out.flush().map_err(io_error(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_by_extension() {
        assert_eq!(FileKind::from_path(Path::new("a.PNG")).unwrap(), FileKind::Png);
        assert_eq!(FileKind::from_path(Path::new("a.pgm")).unwrap(), FileKind::Pnm);
        assert!(FileKind::from_path(Path::new("a.pfm")).unwrap().is_float());
        assert!(FileKind::from_path(Path::new("a.jpg")).is_err());
        assert!(FileKind::from_path(Path::new("noext")).is_err());
    }

    #[test]
    fn quantize_rounds_and_clamps() {
        assert_eq!(quantize(-0.2), 0);
        assert_eq!(quantize(1.7), 255);
        assert_eq!(quantize(0.5), 128);
        assert_eq!(quantize(100.0 / 255.0), 100);
    }
}
