//! Orthonormal multilevel 2D Daubechies-4 wavelet transform with periodic
//! boundaries. Critically sampled: coefficient count equals pixel count, and
//! the packed quadrant layout keeps everything in one array. The transform
//! matrix is orthogonal, so the inverse is the exact transpose and Parseval
//! holds to machine precision.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Daubechies 4-tap analysis low-pass filter.
fn filters() -> ([f64; 4], [f64; 4]) {
    let s3 = 3.0f64.sqrt();
    let norm = 4.0 * 2.0f64.sqrt();
    let h = [
        (1.0 + s3) / norm,
        (3.0 + s3) / norm,
        (3.0 - s3) / norm,
        (1.0 - s3) / norm,
    ];
    // Quadrature mirror: g[n] = (-1)^n h[3 - n].
    let g = [h[3], -h[2], h[1], -h[0]];
    (h, g)
}

/// One periodic analysis step on `x[0..n]`: first half approximation,
/// second half detail.
fn analyze_1d(x: &mut [Complex64], n: usize) {
    let (h, g) = filters();
    let half = n / 2;
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..half {
        let mut a = Complex64::new(0.0, 0.0);
        let mut d = Complex64::new(0.0, 0.0);
        for t in 0..4 {
            let v = x[(2 * k + t) % n];
            a += v * h[t];
            d += v * g[t];
        }
        out[k] = a;
        out[half + k] = d;
    }
    x[..n].copy_from_slice(&out);
}

/// Transpose of [`analyze_1d`]; exact inverse by orthogonality.
fn synthesize_1d(x: &mut [Complex64], n: usize) {
    let (h, g) = filters();
    let half = n / 2;
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..half {
        let a = x[k];
        let d = x[half + k];
        for t in 0..4 {
            out[(2 * k + t) % n] += a * h[t] + d * g[t];
        }
    }
    x[..n].copy_from_slice(&out);
}

fn check_dims(x: &Array2<Complex64>, levels: usize) -> Result<usize> {
    let (h, w) = x.dim();
    if h != w {
        return Err(Error::validation("wavelet transform requires a square image"));
    }
    if levels == 0 {
        return Err(Error::validation("levels must be at least 1"));
    }
    let div = 1usize << levels;
    if h % div != 0 || h / div == 0 {
        return Err(Error::validation(format!(
            "side {h} not divisible by 2^{levels}"
        )));
    }
    Ok(h)
}

/// Multilevel forward transform in the packed quadrant layout.
pub fn wavelet_forward(x: &Array2<Complex64>, levels: usize) -> Result<Array2<Complex64>> {
    let n = check_dims(x, levels)?;
    let mut out = x.clone();
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for level in 0..levels {
        let cur = n >> level;
        for i in 0..cur {
            let mut row: Vec<Complex64> = (0..cur).map(|j| out[[i, j]]).collect();
            analyze_1d(&mut row, cur);
            for j in 0..cur {
                out[[i, j]] = row[j];
            }
        }
        for j in 0..cur {
            for i in 0..cur {
                buf[i] = out[[i, j]];
            }
            analyze_1d(&mut buf, cur);
            for i in 0..cur {
                out[[i, j]] = buf[i];
            }
        }
    }
    Ok(out)
}

/// Inverse of [`wavelet_forward`].
pub fn wavelet_inverse(c: &Array2<Complex64>, levels: usize) -> Result<Array2<Complex64>> {
    let n = check_dims(c, levels)?;
    let mut out = c.clone();
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for level in (0..levels).rev() {
        let cur = n >> level;
        for j in 0..cur {
            for i in 0..cur {
                buf[i] = out[[i, j]];
            }
            synthesize_1d(&mut buf, cur);
            for i in 0..cur {
                out[[i, j]] = buf[i];
            }
        }
        for i in 0..cur {
            let mut row: Vec<Complex64> = (0..cur).map(|j| out[[i, j]]).collect();
            synthesize_1d(&mut row, cur);
            for j in 0..cur {
                out[[i, j]] = row[j];
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{l2_norm, random_complex_image};

    #[test]
    fn roundtrip_128_six_levels() {
        let x = random_complex_image(128, 128, 3);
        let c = wavelet_forward(&x, 6).unwrap();
        let back = wavelet_inverse(&c, 6).unwrap();
        let max_err = x
            .iter()
            .zip(back.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        assert!(max_err < 1e-10, "max abs error {max_err}");
    }

    #[test]
    fn constant_image_has_zero_details() {
        let x = Array2::from_elem((64, 64), Complex64::new(0.7, -0.2));
        let c = wavelet_forward(&x, 6).unwrap();
        let ll = 64 >> 6; // final approximation block is 1x1
        for ((i, j), z) in c.indexed_iter() {
            if i >= ll || j >= ll {
                assert!(z.norm() < 1e-12, "detail at ({i},{j}) = {z}");
            }
        }
    }

    #[test]
    fn parseval() {
        let x = random_complex_image(64, 64, 8);
        let c = wavelet_forward(&x, 4).unwrap();
        let a = l2_norm(&x);
        let b = l2_norm(&c);
        assert!((a - b).abs() / a < 1e-12);
    }

    #[test]
    fn adjoint_equals_inverse() {
        // <Wx, y> == <x, W^-1 y> since W is orthogonal.
        let x = random_complex_image(32, 32, 1);
        let y = random_complex_image(32, 32, 2);
        let wx = wavelet_forward(&x, 3).unwrap();
        let wy = wavelet_inverse(&y, 3).unwrap();
        let lhs: Complex64 = wx.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum();
        let rhs: Complex64 = x.iter().zip(wy.iter()).map(|(a, b)| a.conj() * b).sum();
        assert!((lhs - rhs).norm() / lhs.norm() < 1e-12);
    }

    #[test]
    fn bad_sizes_rejected() {
        let x = random_complex_image(48, 48, 1); // 48 not divisible by 64
        assert!(wavelet_forward(&x, 6).is_err());
        let x = random_complex_image(32, 16, 1);
        assert!(wavelet_forward(&x, 2).is_err());
    }
}
