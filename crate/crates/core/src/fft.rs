use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn forward(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len))
}

pub(crate) fn inverse(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(len))
}

/// Unnormalized in-place forward DFT.
pub(crate) fn fft_in_place(buf: &mut [Complex64]) {
    forward(buf.len()).process(buf);
}

/// Inverse DFT including the `1/len` factor.
pub(crate) fn ifft_in_place(buf: &mut [Complex64]) {
    let n = buf.len();
    inverse(n).process(buf);
    let scale = 1.0 / n as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// Signed frequency index of DFT bin `k` for a length-`len` transform.
pub(crate) fn signed_bin(k: usize, len: usize) -> i64 {
    if 2 * k < len {
        k as i64
    } else {
        k as i64 - len as i64
    }
}
