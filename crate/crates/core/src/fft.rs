//! Row-column 2-D FFT over a row-major complex buffer.
//!
//! The spectrum is left in transposed (column-major) order: the forward
//! transform ends with the column FFTs and skips the final transpose, and
//! the inverse starts from that layout. Pointwise spectral operations must
//! index it as `spectrum[v * height + u]`.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub(crate) struct Fft2 {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(height: usize, width: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            width,
            height,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    /// Transforms `image` (clobbering it) into `spectrum`, transposed.
    pub fn forward(&self, image: &mut [Complex64], spectrum: &mut [Complex64]) {
        let (w, h) = (self.width, self.height);
        lines(image, w, &self.row_fwd);
        transpose::transpose(image, spectrum, w, h);
        lines(spectrum, h, &self.col_fwd);
    }

    /// Unnormalized inverse of [`Fft2::forward`]; divide by
    /// `width * height` afterwards. Clobbers `spectrum`.
    pub fn inverse(&self, spectrum: &mut [Complex64], image: &mut [Complex64]) {
        let (w, h) = (self.width, self.height);
        lines(spectrum, h, &self.col_inv);
        transpose::transpose(spectrum, image, h, w);
        lines(image, w, &self.row_inv);
    }
}

fn lines(data: &mut [Complex64], len: usize, fft: &Arc<dyn Fft<f64>>) {
    // A few rows per task keeps scheduling overhead negligible.
    let per_task = (16384 / len.max(1)).max(1) * len;
    data.par_chunks_mut(per_task).for_each_init(
        || vec![Complex64::default(); fft.get_inplace_scratch_len()],
        |scratch, chunk| fft.process_with_scratch(chunk, scratch),
    );
}
