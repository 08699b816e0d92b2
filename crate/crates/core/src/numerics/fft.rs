//! Thin 2D FFT layer over `rustfft` for row-major complex buffers.

use rustfft::num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use super::grid::Grid;

/// In-place 2D transform of a row-major `height x width` buffer.
///
/// The forward transform is unnormalized; the inverse divides by
/// `height * width` so that `inverse(forward(x)) == x`.
pub fn fft2_in_place(buf: &mut [Complex64], height: usize, width: usize, direction: FftDirection) {
    assert_eq!(buf.len(), height * width);
    let mut planner = FftPlanner::<f64>::new();

    let row_fft = planner.plan_fft(width, direction);
    row_fft.process(buf);

    let mut transposed = vec![Complex64::default(); buf.len()];
    transpose(buf, &mut transposed, height, width);
    let col_fft = planner.plan_fft(height, direction);
    col_fft.process(&mut transposed);
    transpose(&transposed, buf, width, height);

    if direction == FftDirection::Inverse {
        let scale = 1.0 / (height * width) as f64;
        buf.iter_mut().for_each(|v| *v *= scale);
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    for r in 0..rows {
        for c in 0..cols {
            dst[c * rows + r] = src[r * cols + c];
        }
    }
}

/// Copies `grid` into the top-left corner of a zeroed `height x width` complex buffer.
pub fn embed_top_left(grid: &Grid, height: usize, width: usize) -> Vec<Complex64> {
    assert!(grid.height() <= height && grid.width() <= width);
    let mut buf = vec![Complex64::default(); height * width];
    for r in 0..grid.height() {
        for c in 0..grid.width() {
            buf[r * width + c] = Complex64::new(grid.get(r, c), 0.0);
        }
    }
    buf
}

/// Embeds a kernel into a `height x width` periodic buffer with its center
/// pixel `(kh / 2, kw / 2)` moved to the origin.
pub fn embed_centered_wrapped(kernel: &Grid, height: usize, width: usize) -> Vec<Complex64> {
    assert!(kernel.height() <= height && kernel.width() <= width);
    let (ch, cw) = (kernel.height() / 2, kernel.width() / 2);
    let mut buf = vec![Complex64::default(); height * width];
    for i in 0..kernel.height() {
        for j in 0..kernel.width() {
            let r = (i + height - ch) % height;
            let c = (j + width - cw) % width;
            buf[r * width + c] += Complex64::new(kernel.get(i, j), 0.0);
        }
    }
    buf
}
