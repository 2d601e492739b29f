//! 2-D FFT over square row-major grids.

use rustfft::num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

/// In-place 2-D transform of an `n×n` grid (unnormalized in both directions).
pub(crate) fn fft2(data: &mut [Complex64], n: usize, direction: FftDirection) {
    assert_eq!(data.len(), n * n);
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft(n, direction);
    for row in data.chunks_mut(n) {
        fft.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        for i in 0..n {
            col[i] = data[i * n + j];
        }
        fft.process(&mut col);
        for i in 0..n {
            data[i * n + j] = col[i];
        }
    }
}

/// Signed frequency of DFT index `i` on an axis of length `n`, in `[-n/2, n/2)`.
pub(crate) fn signed_freq(i: usize, n: usize) -> i64 {
    if i < n.div_ceil(2) {
        i as i64
    } else {
        i as i64 - n as i64
    }
}
