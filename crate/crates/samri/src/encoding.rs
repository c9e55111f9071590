//! The multi-coil encoding operator and its adjoint.
//!
//! `encode` maps an image through coil sensitivities, a centered orthonormal
//! Fourier transform, and pattern sampling. `adjoint_encode` is the exact
//! adjoint for Cartesian patterns and for radial patterns without density
//! compensation; with ramp compensation it is the standard gridding
//! reconstruction. `undersample_image` composes the two to produce the
//! coil-combined aliased image used both as network input and as the target
//! domain of the cyclic data-fidelity loss.

use ndarray::{Array2, Array3};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{fft2c, ifft2c};
use crate::image::{CoilStack, ComplexImage};
use crate::nufft::{Dcomp, NufftPlan};
use crate::sampling::{CartesianMask, RadialPattern, SamplingPattern};

/// Measured k-space data, one row per coil.
#[derive(Debug, Clone, PartialEq)]
pub struct KspaceSamples {
    pub values: Array2<Complex64>,
}

impl KspaceSamples {
    pub fn n_coils(&self) -> usize {
        self.values.dim().0
    }

    pub fn n_samples(&self) -> usize {
        self.values.dim().1
    }
}

#[derive(Debug, Clone)]
pub struct EncodingContext {
    pub sens: Array3<Complex64>,
    pub pattern: SamplingPattern,
    pub grid: (usize, usize),
    nufft: Option<NufftPlan>,
    dcomp: Dcomp,
}

impl EncodingContext {
    /// Validates geometry and, for radial patterns, builds the gridding plan.
    /// Radial contexts default to ramp density compensation in the adjoint;
    /// see [`EncodingContext::with_dcomp`].
    pub fn new(sens: &CoilStack, pattern: SamplingPattern) -> Result<Self> {
        let grid = sens.shape();
        let (nufft, dcomp) = match &pattern {
            SamplingPattern::Cartesian(mask) => {
                if mask.n_lines_total != grid.0 {
                    return Err(Error::validation(format!(
                        "mask has {} phase-encode lines but the grid height is {}",
                        mask.n_lines_total, grid.0
                    )));
                }
                if mask.sampled_lines.is_empty() {
                    return Err(Error::validation("mask samples no lines"));
                }
                (None, Dcomp::None)
            }
            SamplingPattern::Radial(radial) => {
                if grid.0 != grid.1 {
                    return Err(Error::validation("radial encoding requires a square grid"));
                }
                (Some(NufftPlan::new(grid.0, radial)?), Dcomp::Ramp)
            }
        };
        Ok(EncodingContext {
            sens: sens.to_array3(),
            pattern,
            grid,
            nufft,
            dcomp,
        })
    }

    pub fn with_dcomp(mut self, dcomp: Dcomp) -> Self {
        self.dcomp = dcomp;
        self
    }

    pub fn n_coils(&self) -> usize {
        self.sens.dim().0
    }

    pub fn n_samples(&self) -> usize {
        match &self.pattern {
            SamplingPattern::Cartesian(m) => m.n_sampled() * self.grid.1,
            SamplingPattern::Radial(r) => r.n_samples(),
        }
    }

    fn check_image(&self, x: &ComplexImage) -> Result<()> {
        if x.shape() != self.grid {
            return Err(Error::validation(format!(
                "image shape {:?} does not match grid {:?}",
                x.shape(),
                self.grid
            )));
        }
        Ok(())
    }

    pub fn encode(&self, x: &ComplexImage) -> Result<KspaceSamples> {
        self.check_image(x)?;
        let (h, w) = self.grid;
        let n_coils = self.n_coils();
        let mut values = Array2::zeros((n_coils, self.n_samples()));
        for c in 0..n_coils {
            let weighted = Array2::from_shape_fn((h, w), |(i, j)| {
                self.sens[[c, i, j]] * x.data[[i, j]]
            });
            match &self.pattern {
                SamplingPattern::Cartesian(mask) => {
                    let k = fft2c(&weighted);
                    let mut col = 0;
                    for &line in &mask.sampled_lines {
                        for j in 0..w {
                            values[[c, col]] = k[[line, j]];
                            col += 1;
                        }
                    }
                }
                SamplingPattern::Radial(_) => {
                    let plan = self.nufft.as_ref().unwrap();
                    let s = plan.forward(&weighted)?;
                    values.row_mut(c).assign(&s);
                }
            }
        }
        Ok(KspaceSamples { values })
    }

    pub fn adjoint_encode(&self, d: &KspaceSamples) -> Result<ComplexImage> {
        if d.n_coils() != self.n_coils() || d.n_samples() != self.n_samples() {
            return Err(Error::validation(format!(
                "k-space data {}x{} does not match context {}x{}",
                d.n_coils(),
                d.n_samples(),
                self.n_coils(),
                self.n_samples()
            )));
        }
        if d.n_samples() == 0 {
            return Err(Error::validation("empty sample set"));
        }
        let (h, w) = self.grid;
        let mut out = Array2::<Complex64>::zeros((h, w));
        for c in 0..self.n_coils() {
            let coil_img = match &self.pattern {
                SamplingPattern::Cartesian(mask) => {
                    let mut k = Array2::<Complex64>::zeros((h, w));
                    let mut col = 0;
                    for &line in &mask.sampled_lines {
                        for j in 0..w {
                            k[[line, j]] = d.values[[c, col]];
                            col += 1;
                        }
                    }
                    ifft2c(&k)
                }
                SamplingPattern::Radial(_) => {
                    let plan = self.nufft.as_ref().unwrap();
                    plan.adjoint(&d.values.row(c).to_owned(), self.dcomp)?
                }
            };
            for i in 0..h {
                for j in 0..w {
                    out[[i, j]] += self.sens[[c, i, j]].conj() * coil_img[[i, j]];
                }
            }
        }
        ComplexImage::new(out, Some("adjoint".into()))
    }

    /// The coil-combined aliased image: adjoint of encode applied to the
    /// encoded data. Self-adjoint as a complex-linear operator (the density
    /// compensation weights are real).
    pub fn undersample_image(&self, x: &ComplexImage) -> Result<ComplexImage> {
        let d = self.encode(x)?;
        self.adjoint_encode(&d)
    }
}

/// SVD coil compression across the coil dimension. Returns the compressed
/// samples and the retained energy fraction.
pub fn coil_compress(k: &KspaceSamples, n_virtual: usize) -> Result<(KspaceSamples, f64)> {
    let n_coils = k.n_coils();
    if n_virtual == 0 {
        return Err(Error::validation("n_virtual must be positive"));
    }
    if n_virtual > n_coils {
        return Err(Error::validation(format!(
            "n_virtual {n_virtual} exceeds coil count {n_coils}"
        )));
    }
    let m = k.n_samples();
    // Gram matrix over coils: G = D D^H, eigenvalues are squared singular
    // values of the coil-by-sample matrix.
    let mut gram = Array2::<Complex64>::zeros((n_coils, n_coils));
    for c1 in 0..n_coils {
        for c2 in 0..n_coils {
            let mut acc = Complex64::new(0.0, 0.0);
            for s in 0..m {
                acc += k.values[[c1, s]] * k.values[[c2, s]].conj();
            }
            gram[[c1, c2]] = acc;
        }
    }
    let (vals, vecs) = crate::linalg::hermitian_eig(&gram)?;
    let total: f64 = vals.iter().map(|v| v.max(0.0)).sum();
    let kept: f64 = vals.iter().take(n_virtual).map(|v| v.max(0.0)).sum();
    let retained = if total > 0.0 { kept / total } else { 1.0 };

    let mut compressed = Array2::<Complex64>::zeros((n_virtual, m));
    for v in 0..n_virtual {
        for s in 0..m {
            let mut acc = Complex64::new(0.0, 0.0);
            for c in 0..n_coils {
                acc += vecs[[c, v]].conj() * k.values[[c, s]];
            }
            compressed[[v, s]] = acc;
        }
    }
    Ok((KspaceSamples { values: compressed }, retained))
}

/// Full-sampling Cartesian mask (all phase-encode lines).
pub fn full_mask(n_lines: usize) -> CartesianMask {
    CartesianMask {
        n_lines_total: n_lines,
        sampled_lines: (0..n_lines).collect(),
        center_block: (n_lines / 2, n_lines / 2 + 1),
    }
}

/// Dense radial coverage at or above the Nyquist spoke count, used for
/// gridding-reconstruction checks.
pub fn dense_radial(n_spokes: usize, samples_per_spoke: usize) -> RadialPattern {
    RadialPattern::consecutive(0, n_spokes, samples_per_spoke)
}
