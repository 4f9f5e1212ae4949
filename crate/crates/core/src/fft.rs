//! Thin wrapper over `rustfft` for square periodic grids in one or two dimensions.
//!
//! All transforms here are unnormalized:
//! forward `out[m] = sum_k in[k] e^{-2 pi i m k / L}`, inverse with `+`.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(len, direction))
}

fn transpose_square(data: &mut [Complex64], side: usize) {
    for r in 0..side {
        for c in (r + 1)..side {
            data.swap(r * side + c, c * side + r);
        }
    }
}

fn transform(data: &mut [Complex64], side: usize, dim: usize, direction: FftDirection) {
    debug_assert_eq!(data.len(), side.pow(dim as u32));
    let fft = plan(side, direction);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    match dim {
        1 => fft.process_with_scratch(data, &mut scratch),
        2 => {
            fft.process_with_scratch(data, &mut scratch);
            transpose_square(data, side);
            fft.process_with_scratch(data, &mut scratch);
            transpose_square(data, side);
        }
        _ => unreachable!("only d = 1, 2 are supported"),
    }
}

pub fn forward(data: &mut [Complex64], side: usize, dim: usize) {
    transform(data, side, dim, FftDirection::Forward);
}

pub fn inverse(data: &mut [Complex64], side: usize, dim: usize) {
    transform(data, side, dim, FftDirection::Inverse);
}
