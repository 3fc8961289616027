//! Thin wrapper over `rustfft` with a per-thread plan cache.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Unnormalized forward DFT, `X[k] = Σ x[n] e^{-j2πkn/N}`.
pub fn forward(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()).process(buf));
}

/// Inverse DFT including the `1/N` factor.
pub fn inverse(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()).process(buf));
    let s = 1.0 / buf.len() as f64;
    buf.iter_mut().for_each(|z| *z *= s);
}

/// Rotates a spectrum so that the zero-frequency bin lands at index `N/2`.
pub fn fftshift<T: Copy>(x: &[T]) -> Vec<T> {
    let h = x.len() / 2;
    x[h..].iter().chain(&x[..h]).copied().collect()
}

/// Signed frequency of unshifted bin `k` in cycles/sample.
pub fn bin_frequency(k: usize, n: usize) -> f64 {
    if k < n.div_ceil(2) {
        k as f64 / n as f64
    } else {
        k as f64 / n as f64 - 1.0
    }
}

/// Frequency of index `k` of a shifted length-`n` spectrum.
pub fn shifted_frequency(k: usize, n: usize) -> f64 {
    (k as f64 - (n / 2) as f64) / n as f64
}
