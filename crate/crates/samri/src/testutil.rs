//! Shared helpers for unit, integration, and acceptance tests.
//!
//! Reference computations here (slow DFTs, dense operator materialization)
//! are deliberately naive and independent of the fast implementation paths
//! they are used to check.

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn random_complex_image(h: usize, w: usize, seed: u64) -> Array2<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((h, w), |_| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    })
}

pub fn l2_norm(a: &Array2<Complex64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn rel_l2_error(got: &Array2<Complex64>, want: &Array2<Complex64>) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (g, w) in got.iter().zip(want.iter()) {
        num += (g - w).norm_sqr();
        den += w.norm_sqr();
    }
    (num / den.max(1e-300)).sqrt()
}

pub fn inner_product(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Direct evaluation of the centered orthonormal DFT at arbitrary k-space
/// coordinates (cycles/pixel). O(M * h * w); test use only.
pub fn slow_dft(img: &Array2<Complex64>, coords: &[(f64, f64)]) -> Vec<Complex64> {
    let (h, w) = img.dim();
    let scale = 1.0 / ((h * w) as f64).sqrt();
    let (ch, cw) = ((h / 2) as f64, (w / 2) as f64);
    coords
        .iter()
        .map(|&(ky, kx)| {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..h {
                for j in 0..w {
                    let phase =
                        -2.0 * std::f64::consts::PI * (ky * (i as f64 - ch) + kx * (j as f64 - cw));
                    acc += img[[i, j]] * Complex64::from_polar(1.0, phase);
                }
            }
            acc * scale
        })
        .collect()
}
