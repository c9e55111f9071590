//! Centered, orthonormal 2D FFT.
//!
//! `fft2c` places DC at `(h/2, w/2)` and scales by `1/sqrt(h*w)`, so the
//! transform is unitary: `ifft2c` is both its inverse and its adjoint.
//! Plans are cached per thread.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

thread_local! {
    static PLANS: RefCell<HashMap<(usize, bool), Arc<dyn Fft<f64>>>> =
        RefCell::new(HashMap::new());
}

fn plan(len: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    PLANS.with(|cell| {
        cell.borrow_mut()
            .entry((len, forward))
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                if forward {
                    planner.plan_fft(len, FftDirection::Forward)
                } else {
                    planner.plan_fft(len, FftDirection::Inverse)
                }
            })
            .clone()
    })
}

/// Unnormalized in-place 2D FFT over rows then columns.
fn fft2_inplace(data: &mut Array2<Complex64>, forward: bool) {
    let (h, w) = data.dim();
    let row_fft = plan(w, forward);
    let mut scratch = vec![Complex64::new(0.0, 0.0); row_fft.get_inplace_scratch_len()];
    for mut row in data.rows_mut() {
        let slice = row.as_slice_mut().expect("row-major layout");
        row_fft.process_with_scratch(slice, &mut scratch);
    }
    let col_fft = plan(h, forward);
    let mut scratch = vec![Complex64::new(0.0, 0.0); col_fft.get_inplace_scratch_len()];
    let mut col = vec![Complex64::new(0.0, 0.0); h];
    for j in 0..w {
        for i in 0..h {
            col[i] = data[[i, j]];
        }
        col_fft.process_with_scratch(&mut col, &mut scratch);
        for i in 0..h {
            data[[i, j]] = col[i];
        }
    }
}

/// Circularly shift so index `h/2, w/2` moves to the origin (and back).
/// For even sizes fftshift and ifftshift coincide.
fn fftshift2(src: &Array2<Complex64>) -> Array2<Complex64> {
    let (h, w) = src.dim();
    let mut out = Array2::zeros((h, w));
    let (sh, sw) = (h / 2, w / 2);
    for i in 0..h {
        for j in 0..w {
            out[[(i + sh) % h, (j + sw) % w]] = src[[i, j]];
        }
    }
    out
}

pub fn fft2c(img: &Array2<Complex64>) -> Array2<Complex64> {
    let (h, w) = img.dim();
    let scale = 1.0 / ((h * w) as f64).sqrt();
    let mut work = fftshift2(img);
    fft2_inplace(&mut work, true);
    let mut out = fftshift2(&work);
    out.mapv_inplace(|z| z * scale);
    out
}

pub fn ifft2c(ksp: &Array2<Complex64>) -> Array2<Complex64> {
    let (h, w) = ksp.dim();
    let scale = 1.0 / ((h * w) as f64).sqrt();
    let mut work = fftshift2(ksp);
    fft2_inplace(&mut work, false);
    let mut out = fftshift2(&work);
    out.mapv_inplace(|z| z * scale);
    out
}
