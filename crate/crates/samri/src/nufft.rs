//! Non-uniform FFT by Kaiser-Bessel gridding.
//!
//! Forward: deapodize, zero-pad to a 1.5x oversampled grid, centered FFT,
//! then separable 4-tap kernel interpolation at the sample coordinates.
//! The adjoint is the exact transpose of that chain, so dot-product tests
//! hold to machine precision. Sample values match the centered orthonormal
//! DFT convention of [`crate::fft::fft2c`].
//!
//! Density compensation for the adjoint-as-reconstruction ("gridding
//! reconstruction") uses ramp weights `|k|` with the DC bin set to half a
//! radial sample spacing, folded with the polar quadrature cell area so the
//! result is correctly scaled.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{fft2c, ifft2c};
use crate::sampling::RadialPattern;

/// Kernel taps per axis. Width 6 keeps the slow-DFT mismatch below 1e-4 at
/// 1.5x oversampling; width 4 bottoms out near 3e-3, which is not enough
/// for the accuracy gate.
pub const KERNEL_WIDTH: usize = 6;
pub const OVERSAMPLING: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dcomp {
    None,
    Ramp,
}

/// Modified Bessel function of the first kind, order zero (power series;
/// adequate for the argument range used by the kernel).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / ((k * k) as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Kaiser-Bessel kernel shape parameter for the given width/oversampling.
fn kb_beta(width: usize, os: f64) -> f64 {
    let w = width as f64;
    std::f64::consts::PI * ((w / os).powi(2) * (os - 0.5).powi(2) - 0.8).sqrt()
}

fn kb_kernel(u: f64, width: usize, beta: f64) -> f64 {
    let half = width as f64 / 2.0;
    if u.abs() >= half {
        return 0.0;
    }
    bessel_i0(beta * (1.0 - (u / half).powi(2)).sqrt())
}

/// Continuous Fourier transform of the kernel at frequency `f` (cycles per
/// oversampled-grid sample).
fn kb_kernel_ft(f: f64, width: usize, beta: f64) -> f64 {
    let w = width as f64;
    let arg = beta * beta - (std::f64::consts::PI * w * f).powi(2);
    if arg > 0.0 {
        let s = arg.sqrt();
        w * s.sinh() / s
    } else if arg < 0.0 {
        let s = (-arg).sqrt();
        w * s.sin() / s
    } else {
        w
    }
}

#[derive(Debug, Clone)]
pub struct NufftPlan {
    grid: usize,
    os_grid: usize,
    /// Per-sample, per-axis taps: `width` grid indices and weights.
    taps_y: Vec<(u32, f64)>,
    taps_x: Vec<(u32, f64)>,
    n_samples: usize,
    /// 1 / kernel-FT per image row/col offset, on the unpadded grid.
    deapod: Array1<f64>,
    /// Forward amplitude correction (oversampled grid vs image grid).
    scale: f64,
    ramp: Array1<f64>,
}

impl NufftPlan {
    pub fn new(grid: usize, pattern: &RadialPattern) -> Result<Self> {
        let dk = 1.0 / pattern.samples_per_spoke as f64;
        let dtheta = std::f64::consts::PI / pattern.n_spokes() as f64;
        Self::from_coords(grid, &pattern.coords(), dk, dtheta)
    }

    /// Core constructor over raw (ky, kx) coordinates in cycles/pixel.
    /// `dk`/`dtheta` are the radial/angular spacings used for the ramp
    /// density-compensation weights.
    pub fn from_coords(grid: usize, coords: &[(f64, f64)], dk: f64, dtheta: f64) -> Result<Self> {
        if grid < 8 || grid % 2 != 0 {
            return Err(Error::validation("NUFFT grid must be even and >= 8"));
        }
        let os_grid = (grid as f64 * OVERSAMPLING).round() as usize;
        if os_grid % 2 != 0 {
            return Err(Error::validation("oversampled grid is not even"));
        }
        let beta = kb_beta(KERNEL_WIDTH, OVERSAMPLING);
        for &(ky, kx) in coords {
            if ky.abs() > 0.5 + 1e-12 || kx.abs() > 0.5 + 1e-12 {
                return Err(Error::validation(format!(
                    "k-space coordinate ({ky}, {kx}) outside the Nyquist box"
                )));
            }
        }

        let n_samples = coords.len();
        let mut taps_y = Vec::with_capacity(n_samples * KERNEL_WIDTH);
        let mut taps_x = Vec::with_capacity(n_samples * KERNEL_WIDTH);
        let g = os_grid as f64;
        let c = (os_grid / 2) as f64;
        let axis_taps = |k: f64, out: &mut Vec<(u32, f64)>| {
            let pos = k * g + c;
            // First grid point with |pos - u| < width/2.
            let base = (pos - KERNEL_WIDTH as f64 / 2.0).ceil() as i64;
            for t in 0..KERNEL_WIDTH as i64 {
                let u = base + t;
                let w = kb_kernel(pos - u as f64, KERNEL_WIDTH, beta);
                let idx = u.rem_euclid(os_grid as i64) as u32;
                out.push((idx, w));
            }
        };
        for &(ky, kx) in coords {
            axis_taps(ky, &mut taps_y);
            axis_taps(kx, &mut taps_x);
        }

        // Deapodization per axis offset m = r - grid/2, frequency m / os_grid.
        let deapod = Array1::from_shape_fn(grid, |r| {
            let m = r as f64 - (grid / 2) as f64;
            1.0 / kb_kernel_ft(m / g, KERNEL_WIDTH, beta)
        });

        // Ramp density compensation with polar cell areas; DC gets half a
        // radial spacing. The grid^2 factor turns the weighted adjoint into
        // an approximate inverse under the orthonormal DFT convention.
        let cell = dk * dtheta * (grid * grid) as f64;
        let ramp = Array1::from_shape_fn(n_samples, |j| {
            let (ky, kx) = coords[j];
            let r = (ky * ky + kx * kx).sqrt();
            if r > 0.0 {
                r * cell
            } else {
                0.5 * dk * cell
            }
        });

        Ok(NufftPlan {
            grid,
            os_grid,
            taps_y,
            taps_x,
            n_samples,
            deapod,
            scale: g / grid as f64,
            ramp,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn ramp_weights(&self) -> &Array1<f64> {
        &self.ramp
    }

    pub fn forward(&self, img: &Array2<Complex64>) -> Result<Array1<Complex64>> {
        let n = self.grid;
        if img.dim() != (n, n) {
            return Err(Error::validation(format!(
                "image shape {:?} does not match NUFFT grid {n}",
                img.dim()
            )));
        }
        let g = self.os_grid;
        let off = (g - n) / 2;
        let mut padded = Array2::<Complex64>::zeros((g, g));
        for i in 0..n {
            for j in 0..n {
                padded[[i + off, j + off]] = img[[i, j]] * (self.deapod[i] * self.deapod[j]);
            }
        }
        let k = fft2c(&padded);

        let mut out = Array1::zeros(self.n_samples);
        let w = KERNEL_WIDTH;
        for s in 0..self.n_samples {
            let ty = &self.taps_y[s * w..(s + 1) * w];
            let tx = &self.taps_x[s * w..(s + 1) * w];
            let mut acc = Complex64::new(0.0, 0.0);
            for &(iy, wy) in ty {
                let row = k.row(iy as usize);
                let mut racc = Complex64::new(0.0, 0.0);
                for &(ix, wx) in tx {
                    racc += row[ix as usize] * wx;
                }
                acc += racc * wy;
            }
            out[s] = acc * self.scale;
        }
        Ok(out)
    }

    pub fn adjoint(&self, samples: &Array1<Complex64>, dcomp: Dcomp) -> Result<Array2<Complex64>> {
        if samples.len() != self.n_samples {
            return Err(Error::validation(format!(
                "sample count {} does not match plan ({})",
                samples.len(),
                self.n_samples
            )));
        }
        let n = self.grid;
        let g = self.os_grid;
        let off = (g - n) / 2;
        let w = KERNEL_WIDTH;

        let mut k = Array2::<Complex64>::zeros((g, g));
        for s in 0..self.n_samples {
            let v = match dcomp {
                Dcomp::None => samples[s] * self.scale,
                Dcomp::Ramp => samples[s] * (self.ramp[s] * self.scale),
            };
            let ty = &self.taps_y[s * w..(s + 1) * w];
            let tx = &self.taps_x[s * w..(s + 1) * w];
            for &(iy, wy) in ty {
                let mut row = k.row_mut(iy as usize);
                let vy = v * wy;
                for &(ix, wx) in tx {
                    row[ix as usize] += vy * wx;
                }
            }
        }

        let img_os = ifft2c(&k);
        let mut out = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                out[[i, j]] = img_os[[i + off, j + off]] * (self.deapod[i] * self.deapod[j]);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::RadialPattern;
    use crate::testutil::{inner_product, random_complex_image, slow_dft};
    use ndarray::Array1;

    #[test]
    fn forward_matches_slow_dft() {
        let pattern = RadialPattern::consecutive(0, 21, 64);
        let plan = NufftPlan::new(32, &pattern).unwrap();
        let img = random_complex_image(32, 32, 31);
        let fast = plan.forward(&img).unwrap();
        let slow = slow_dft(&img, &pattern.coords());
        let peak = slow.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
        let max_err = fast
            .iter()
            .zip(slow.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        assert!(max_err / peak < 1e-3, "relative error {}", max_err / peak);
    }

    #[test]
    fn matches_fft2c_on_cartesian_subset() {
        // Put "spokes" aside: directly test the gridding machinery at exact
        // Cartesian grid frequencies along one row through DC.
        let n = 32usize;
        let pattern = RadialPattern {
            spoke_angles: vec![0.0],
            samples_per_spoke: n,
            start_index: 0,
        };
        let plan = NufftPlan::new(n, &pattern).unwrap();
        let img = random_complex_image(n, n, 77);
        let fast = plan.forward(&img).unwrap();
        let k = crate::fft::fft2c(&img);
        // Spoke at angle 0 samples ky = 0, kx = (j - n/2)/n -> row n/2 of k.
        let peak = k.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
        for j in 0..n {
            let err = (fast[j] - k[[n / 2, j]]).norm();
            assert!(err / peak < 1e-3, "col {j}: {err}");
        }
    }

    #[test]
    fn adjoint_dot_product() {
        let pattern = RadialPattern::consecutive(3, 13, 48);
        let plan = NufftPlan::new(24, &pattern).unwrap();
        let x = random_complex_image(24, 24, 5);
        let y_vec: Vec<_> = (0..plan.n_samples())
            .map(|i| {
                let t = i as f64;
                Complex64::new((0.3 * t).sin(), (0.7 * t).cos())
            })
            .collect();
        let y = Array1::from_vec(y_vec);
        let ax = plan.forward(&x).unwrap();
        let aty = plan.adjoint(&y, Dcomp::None).unwrap();
        let lhs = inner_product(ax.as_slice().unwrap(), y.as_slice().unwrap());
        let rhs = inner_product(
            x.as_slice().unwrap(),
            aty.as_slice().unwrap(),
        );
        assert!(
            (lhs - rhs).norm() / lhs.norm() < 1e-12,
            "adjoint mismatch: {lhs} vs {rhs}"
        );
    }

    #[test]
    fn out_of_range_coordinates_rejected() {
        let err = NufftPlan::from_coords(16, &[(0.0, 0.62)], 0.1, 0.1);
        assert!(err.is_err());
        let ok = NufftPlan::from_coords(16, &[(0.0, 0.5), (-0.5, 0.25)], 0.1, 0.1);
        assert!(ok.is_ok());
    }
}
