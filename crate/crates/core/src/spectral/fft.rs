//! Multi-dimensional complex FFTs on row-major cubes, axis by axis.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place unnormalized transform of an `n^dim` cube.
///
/// `Forward` computes `Σ_x f(x) e^{-ik·x}`, `Inverse` computes `Σ_k f̂(k) e^{ik·x}`.
pub(crate) fn transform(data: &mut [Complex64], n: usize, dim: usize, direction: FftDirection) {
    debug_assert_eq!(data.len(), n.pow(dim as u32));
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft(n, direction));
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];

    // last axis is contiguous: rustfft handles all lines in one call
    fft.process_with_scratch(data, &mut scratch);

    if dim == 1 {
        return;
    }
    let mut line = vec![Complex64::default(); n];
    for axis in 0..dim - 1 {
        let stride = n.pow((dim - 1 - axis) as u32);
        let block = stride * n;
        for start in (0..data.len()).step_by(block) {
            for offset in 0..stride {
                let base = start + offset;
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + j * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (j, value) in line.iter().enumerate() {
                    data[base + j * stride] = *value;
                }
            }
        }
    }
}
