//! Image quality metrics on magnitude images: normalized RMSE, structural
//! similarity with a Gaussian window, and relative Tenengrad (gradient
//! energy) reduction.

use ndarray::Array2;

use crate::error::{Error, Result};

/// ||recon - ref||_2 / ||ref||_2 over magnitudes.
pub fn nrmse(recon: &Array2<f64>, reference: &Array2<f64>) -> Result<f64> {
    if recon.dim() != reference.dim() {
        return Err(Error::validation("nrmse: shape mismatch"));
    }
    let den: f64 = reference.iter().map(|v| v * v).sum::<f64>().sqrt();
    if den == 0.0 {
        return Err(Error::validation("nrmse: zero-norm reference"));
    }
    let num: f64 = recon
        .iter()
        .zip(reference.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(num / den)
}

/// Separable Gaussian blur with reflected boundaries, window truncated at
/// three standard deviations.
fn gaussian_blur(img: &Array2<f64>, sigma: f64) -> Array2<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|t| (-(t as f64).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let ksum: f64 = kernel.iter().sum();
    let kernel: Vec<f64> = kernel.iter().map(|v| v / ksum).collect();

    let (h, w) = img.dim();
    let reflect = |idx: i64, n: usize| -> usize {
        let n = n as i64;
        let mut i = idx;
        if i < 0 {
            i = -i - 1;
        }
        if i >= n {
            i = 2 * n - 1 - i;
        }
        i.clamp(0, n - 1) as usize
    };

    let mut tmp = Array2::<f64>::zeros((h, w));
    for i in 0..h {
        for j in 0..w {
            let mut acc = 0.0;
            for (t, kv) in kernel.iter().enumerate() {
                let jj = reflect(j as i64 + t as i64 - radius, w);
                acc += img[[i, jj]] * kv;
            }
            tmp[[i, j]] = acc;
        }
    }
    let mut out = Array2::<f64>::zeros((h, w));
    for i in 0..h {
        for j in 0..w {
            let mut acc = 0.0;
            for (t, kv) in kernel.iter().enumerate() {
                let ii = reflect(i as i64 + t as i64 - radius, h);
                acc += tmp[[ii, j]] * kv;
            }
            out[[i, j]] = acc;
        }
    }
    out
}

/// Mean local SSIM with a Gaussian window. `dynamic_range` defaults to the
/// reference maximum so cross-method comparisons share the same constants;
/// pass an explicit joint range to make the metric symmetric in its
/// arguments. A pair of all-zero images is defined as identical (1.0).
pub fn ssim(
    recon: &Array2<f64>,
    reference: &Array2<f64>,
    kernel_sigma: f64,
    dynamic_range: Option<f64>,
) -> Result<f64> {
    if recon.dim() != reference.dim() {
        return Err(Error::validation("ssim: shape mismatch"));
    }
    let l = match dynamic_range {
        Some(v) => v,
        None => reference.iter().fold(0.0f64, |m, v| m.max(*v)),
    };
    if l == 0.0 {
        let both_zero = recon.iter().all(|v| *v == 0.0) && reference.iter().all(|v| *v == 0.0);
        if both_zero {
            return Ok(1.0);
        }
        return Err(Error::validation("ssim: zero dynamic range"));
    }
    let c1 = (0.01 * l).powi(2);
    let c2 = (0.03 * l).powi(2);

    let mu_x = gaussian_blur(recon, kernel_sigma);
    let mu_y = gaussian_blur(reference, kernel_sigma);
    let xx = gaussian_blur(&(recon * recon), kernel_sigma);
    let yy = gaussian_blur(&(reference * reference), kernel_sigma);
    let xy = gaussian_blur(&(recon * reference), kernel_sigma);

    let (h, w) = recon.dim();
    let mut sum = 0.0;
    for i in 0..h {
        for j in 0..w {
            let mx = mu_x[[i, j]];
            let my = mu_y[[i, j]];
            let sx = xx[[i, j]] - mx * mx;
            let sy = yy[[i, j]] - my * my;
            let sxy = xy[[i, j]] - mx * my;
            let val = ((2.0 * mx * my + c1) * (2.0 * sxy + c2))
                / ((mx * mx + my * my + c1) * (sx + sy + c2));
            sum += val;
        }
    }
    Ok(sum / (h * w) as f64)
}

/// Sum of squared Sobel responses over interior pixels.
fn tenengrad(img: &Array2<f64>) -> f64 {
    let (h, w) = img.dim();
    let mut t = 0.0;
    for i in 1..h - 1 {
        for j in 1..w - 1 {
            let gx = (img[[i - 1, j + 1]] + 2.0 * img[[i, j + 1]] + img[[i + 1, j + 1]])
                - (img[[i - 1, j - 1]] + 2.0 * img[[i, j - 1]] + img[[i + 1, j - 1]]);
            let gy = (img[[i + 1, j - 1]] + 2.0 * img[[i + 1, j]] + img[[i + 1, j + 1]])
                - (img[[i - 1, j - 1]] + 2.0 * img[[i - 1, j]] + img[[i - 1, j + 1]]);
            t += gx * gx + gy * gy;
        }
    }
    t
}

/// (T(ref) - T(recon)) / T(ref); positive when the reconstruction is
/// blurrier than the reference, negative when it overshoots in sharpness.
pub fn tenengrad_reduction(recon: &Array2<f64>, reference: &Array2<f64>) -> Result<f64> {
    if recon.dim() != reference.dim() {
        return Err(Error::validation("tenengrad: shape mismatch"));
    }
    let t_ref = tenengrad(reference);
    if t_ref == 0.0 {
        return Err(Error::validation("tenengrad: constant reference"));
    }
    Ok((t_ref - tenengrad(recon)) / t_ref)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_image(seed: u64, n: usize) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = Array2::from_shape_fn((n, n), |(i, j)| {
            ((i as f64 / 7.0).sin() + (j as f64 / 5.0).cos()).abs()
        });
        base.mapv(|v| v + 0.05 * rng.random::<f64>())
    }

    #[test]
    fn nrmse_identity_and_zero() {
        let x = sample_image(1, 32);
        assert_eq!(nrmse(&x, &x).unwrap(), 0.0);
        let zero = Array2::zeros((32, 32));
        assert!((nrmse(&zero, &x).unwrap() - 1.0).abs() < 1e-15);
        assert!(nrmse(&x, &zero).is_err());
    }

    #[test]
    fn nrmse_hand_case() {
        // ref = [3, 4] plus padding zeros in both images cancels; use a
        // minimal 8x8 canvas with the two active pixels.
        let mut reference = Array2::zeros((8, 8));
        reference[[0, 0]] = 3.0;
        reference[[0, 1]] = 4.0;
        let mut recon = Array2::zeros((8, 8));
        recon[[0, 0]] = 3.0;
        let got = nrmse(&recon, &reference).unwrap();
        assert!((got - 0.8).abs() < 1e-15, "got {got}");
    }

    #[test]
    fn ssim_identity_exact() {
        let x = sample_image(2, 32);
        assert_eq!(ssim(&x, &x, 2.0, None).unwrap(), 1.0);
    }

    #[test]
    fn ssim_checkerboard_inversion_is_low() {
        let x = Array2::from_shape_fn((32, 32), |(i, j)| ((i + j) % 2) as f64);
        let y = x.mapv(|v| 1.0 - v);
        let s = ssim(&y, &x, 2.0, None).unwrap();
        assert!(s < 0.1, "ssim {s}");
    }

    #[test]
    fn ssim_symmetric_with_joint_range() {
        let x = sample_image(3, 24);
        let y = sample_image(4, 24);
        let l = x
            .iter()
            .chain(y.iter())
            .fold(0.0f64, |m, v| m.max(*v));
        let a = ssim(&x, &y, 2.0, Some(l)).unwrap();
        let b = ssim(&y, &x, 2.0, Some(l)).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn ssim_zero_pair_defined_as_one() {
        let zero = Array2::zeros((16, 16));
        assert_eq!(ssim(&zero, &zero, 2.0, None).unwrap(), 1.0);
    }

    #[test]
    fn tenengrad_identity_blur_noise() {
        let x = sample_image(5, 32);
        assert_eq!(tenengrad_reduction(&x, &x).unwrap(), 0.0);

        let blurred = gaussian_blur(&x, 1.5);
        assert!(tenengrad_reduction(&blurred, &x).unwrap() > 0.0);

        // Sharp noise increases gradient energy -> negative reduction.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let noisy = x.mapv(|v| v + 0.2 * (rng.random::<f64>() - 0.5));
        assert!(tenengrad_reduction(&noisy, &x).unwrap() < 0.0);

        let flat = Array2::from_elem((32, 32), 1.0);
        assert!(tenengrad_reduction(&x, &flat).is_err());
    }
}
