//! Minimal n-dimensional complex FFT on row-major arrays, built on rustfft.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// In-place FFT along every axis of a row-major array with extents `dims`.
pub fn fft_nd(data: &mut [Complex64], dims: &[usize], inverse: bool) {
    let total: usize = dims.iter().product();
    assert_eq!(data.len(), total);
    let mut planner = FftPlanner::new();
    for (axis, &n) in dims.iter().enumerate() {
        if n == 1 {
            continue;
        }
        let fft = if inverse {
            planner.plan_fft_inverse(n)
        } else {
            planner.plan_fft_forward(n)
        };
        let stride: usize = dims[axis + 1..].iter().product();
        let outer: usize = dims[..axis].iter().product();
        let mut line = vec![Complex64::default(); n];
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        for o in 0..outer {
            for s in 0..stride {
                let base = o * n * stride + s;
                for k in 0..n {
                    line[k] = data[base + k * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for k in 0..n {
                    data[base + k * stride] = line[k];
                }
            }
        }
    }
    if inverse {
        let scale = 1.0 / total as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}
