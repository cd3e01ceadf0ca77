//! Thin 2-D FFT wrapper over `rustfft` (row passes plus a transpose).

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

pub(crate) type C64 = Complex<f64>;

fn transform_rows(rows: usize, cols: usize, data: &mut [C64], inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse { planner.plan_fft_inverse(cols) } else { planner.plan_fft_forward(cols) };
    for r in 0..rows {
        fft.process(&mut data[r * cols..(r + 1) * cols]);
    }
}

fn transpose(rows: usize, cols: usize, data: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); data.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = data[r * cols + c];
        }
    }
    out
}

/// In-place unnormalized forward 2-D DFT of a row-major buffer.
pub(crate) fn fft2_forward(rows: usize, cols: usize, data: &mut Vec<C64>) {
    transform_rows(rows, cols, data, false);
    let mut t = transpose(rows, cols, data);
    transform_rows(cols, rows, &mut t, false);
    *data = transpose(cols, rows, &t);
}

/// In-place inverse 2-D DFT including the `1/(rows*cols)` normalization.
pub(crate) fn fft2_inverse(rows: usize, cols: usize, data: &mut Vec<C64>) {
    transform_rows(rows, cols, data, true);
    let mut t = transpose(rows, cols, data);
    transform_rows(cols, rows, &mut t, true);
    *data = transpose(cols, rows, &t);
    let scale = 1.0 / (rows * cols) as f64;
    for v in data.iter_mut() {
        *v *= scale;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_then_inverse_is_identity() {
        let (rows, cols) = (5, 7);
        let original: Vec<C64> = (0..rows * cols)
            .map(|i| C64::new((i as f64 * 13.0).sin() * 40.0, 0.0))
            .collect();
        let mut data = original.clone();
        fft2_forward(rows, cols, &mut data);
        fft2_inverse(rows, cols, &mut data);
        for (a, b) in data.iter().zip(&original) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn parseval_holds_for_the_unnormalized_transform() {
        let (rows, cols) = (8, 8);
        let original: Vec<C64> = (0..rows * cols)
            .map(|i| C64::new(((i * i) % 17) as f64 - 8.0, 0.0))
            .collect();
        let spatial: f64 = original.iter().map(|v| v.norm_sqr()).sum();
        let mut data = original;
        fft2_forward(rows, cols, &mut data);
        let spectral: f64 = data.iter().map(|v| v.norm_sqr()).sum();
        assert!((spectral - spatial * (rows * cols) as f64).abs() < 1e-6 * spectral);
    }
}
