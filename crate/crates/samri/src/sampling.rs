//! Undersampling pattern libraries.
//!
//! Cartesian masks select full phase-encode lines (rows of k-space): a fully
//! sampled center block plus variable-density random lines, denser near DC.
//! Radial patterns are consecutive golden-angle spokes; a library is a
//! sliding window over the global spoke sequence.

use std::collections::HashSet;
use std::path::Path;

use ndarray::{Array2, ArrayD, IxDyn};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::container::{load_tensor, save_tensor, Tensor, TensorData};
use crate::error::{Error, Result};

/// Golden-angle increment in radians: pi * (sqrt(5) - 1) / 2, about 111.246
/// degrees. Spokes are full diameters, so angles live on [0, pi).
pub const GOLDEN_ANGLE: f64 = std::f64::consts::PI * 0.618_033_988_749_894_9;

/// Maximum library size; matches the library construction protocol.
pub const MAX_LIBRARY_ENTRIES: usize = 3000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CartesianMask {
    pub n_lines_total: usize,
    /// Sorted, deduplicated phase-encode line indices.
    pub sampled_lines: Vec<usize>,
    /// Fully sampled center block `[lo, hi)` around DC.
    pub center_block: (usize, usize),
}

impl CartesianMask {
    pub fn n_sampled(&self) -> usize {
        self.sampled_lines.len()
    }

    pub fn contains_line(&self, line: usize) -> bool {
        self.sampled_lines.binary_search(&line).is_ok()
    }

    pub fn to_indicator(&self) -> Vec<f32> {
        let mut v = vec![0.0f32; self.n_lines_total];
        for &l in &self.sampled_lines {
            v[l] = 1.0;
        }
        v
    }

    fn validate(&self) -> Result<()> {
        for l in self.center_block.0..self.center_block.1 {
            if !self.contains_line(l) {
                return Err(Error::validation("center block not fully sampled"));
            }
        }
        if self.sampled_lines.iter().any(|&l| l >= self.n_lines_total) {
            return Err(Error::validation("line index out of range"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialPattern {
    pub spoke_angles: Vec<f64>,
    pub samples_per_spoke: usize,
    /// Position of the first spoke in the global golden-angle sequence.
    pub start_index: usize,
}

impl RadialPattern {
    /// Consecutive golden-angle spokes `[start, start + count)`.
    pub fn consecutive(start: usize, count: usize, samples_per_spoke: usize) -> Self {
        let spoke_angles = (0..count)
            .map(|k| spoke_angle(start + k))
            .collect();
        RadialPattern {
            spoke_angles,
            samples_per_spoke,
            start_index: start,
        }
    }

    pub fn n_spokes(&self) -> usize {
        self.spoke_angles.len()
    }

    pub fn n_samples(&self) -> usize {
        self.spoke_angles.len() * self.samples_per_spoke
    }

    /// Sample coordinates (ky, kx) in cycles/pixel, |k| <= 0.5. Each spoke
    /// spans the full k-space diameter through DC.
    pub fn coords(&self) -> Vec<(f64, f64)> {
        let s = self.samples_per_spoke;
        let half = (s / 2) as f64;
        let mut out = Vec::with_capacity(self.n_samples());
        for &theta in &self.spoke_angles {
            let (sin_t, cos_t) = theta.sin_cos();
            for j in 0..s {
                let r = (j as f64 - half) / s as f64;
                out.push((r * sin_t, r * cos_t));
            }
        }
        out
    }

    /// Radius (cycles/pixel) of each sample along one spoke.
    pub fn radii(&self) -> Vec<f64> {
        let s = self.samples_per_spoke;
        let half = (s / 2) as f64;
        (0..s).map(|j| (j as f64 - half) / s as f64).collect()
    }
}

pub fn spoke_angle(global_index: usize) -> f64 {
    (global_index as f64 * GOLDEN_ANGLE).rem_euclid(std::f64::consts::PI)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SamplingPattern {
    Cartesian(CartesianMask),
    Radial(RadialPattern),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LibraryKind {
    Cartesian,
    Radial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMode {
    Fixed,
    Augmented,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LibraryManifest {
    pub kind: LibraryKind,
    pub seed: u64,
    pub n_entries: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cartesian: Option<CartesianParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radial: Option<RadialParams>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CartesianParams {
    pub n_lines: usize,
    pub acceleration: f64,
    pub center_frac: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadialParams {
    pub n_total_rotations: usize,
    pub window: usize,
    pub samples_per_spoke: usize,
    pub start_indices: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct PatternLibrary {
    pub entries: Vec<SamplingPattern>,
    pub seed: u64,
    pub manifest: LibraryManifest,
}

impl PatternLibrary {
    pub fn kind(&self) -> LibraryKind {
        self.manifest.kind
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// True if `pattern` matches any library entry exactly (Cartesian: same
    /// line set; radial: same spoke angles to 1e-12).
    pub fn contains(&self, pattern: &SamplingPattern) -> bool {
        self.entries.iter().any(|e| match (e, pattern) {
            (SamplingPattern::Cartesian(a), SamplingPattern::Cartesian(b)) => {
                a.sampled_lines == b.sampled_lines
            }
            (SamplingPattern::Radial(a), SamplingPattern::Radial(b)) => {
                a.spoke_angles.len() == b.spoke_angles.len()
                    && a.spoke_angles
                        .iter()
                        .zip(b.spoke_angles.iter())
                        .all(|(x, y)| (x - y).abs() < 1e-12)
            }
            _ => false,
        })
    }
}

/// Number of sampled lines for acceleration `r`.
pub fn line_budget(n_lines: usize, r: f64) -> usize {
    (n_lines as f64 / r).round() as usize
}

/// Number of always-sampled center lines.
pub fn center_lines(n_lines: usize, center_frac: f64) -> usize {
    (center_frac * n_lines as f64).round() as usize
}

fn draw_cartesian_mask(
    n_lines: usize,
    budget: usize,
    center: (usize, usize),
    sigma: f64,
    rng: &mut ChaCha8Rng,
) -> CartesianMask {
    let dc = n_lines / 2;
    let mut pool: Vec<(usize, f64)> = (0..n_lines)
        .filter(|&l| l < center.0 || l >= center.1)
        .map(|l| {
            let d = l as f64 - dc as f64;
            (l, (-d * d / (2.0 * sigma * sigma)).exp())
        })
        .collect();

    let mut lines: Vec<usize> = (center.0..center.1).collect();
    while lines.len() < budget {
        let total: f64 = pool.iter().map(|(_, w)| w).sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = pool.len() - 1;
        for (idx, (_, w)) in pool.iter().enumerate() {
            if u < *w {
                pick = idx;
                break;
            }
            u -= w;
        }
        lines.push(pool.remove(pick).0);
    }
    lines.sort_unstable();
    CartesianMask {
        n_lines_total: n_lines,
        sampled_lines: lines,
        center_block: center,
    }
}

/// Builds `n_masks` distinct variable-density Cartesian masks. The weight of
/// each non-center line follows a Gaussian centered at DC with
/// `sigma = n_lines / 6`, renormalized over the remaining pool at each draw.
pub fn make_cartesian_library(
    n_masks: usize,
    n_lines: usize,
    r: f64,
    center_frac: f64,
    seed: u64,
) -> Result<PatternLibrary> {
    if !(r > 1.0) || r > n_lines as f64 {
        return Err(Error::validation(format!(
            "acceleration must satisfy 1 < R <= n_lines, got {r}"
        )));
    }
    if !(center_frac > 0.0 && center_frac < 1.0 / r) {
        return Err(Error::validation(format!(
            "center_frac must be in (0, 1/R), got {center_frac}"
        )));
    }
    if n_masks == 0 || n_masks > MAX_LIBRARY_ENTRIES {
        return Err(Error::validation(format!(
            "n_masks must be in [1, {MAX_LIBRARY_ENTRIES}]"
        )));
    }

    let budget = line_budget(n_lines, r);
    let n_center = center_lines(n_lines, center_frac);
    if n_center >= budget {
        return Err(Error::validation(format!(
            "infeasible budget: {n_center} center lines >= budget {budget}"
        )));
    }
    let lo = n_lines / 2 - n_center / 2;
    let center = (lo, lo + n_center);
    let sigma = n_lines as f64 / 6.0;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut entries = Vec::with_capacity(n_masks);
    let mut attempts = 0usize;
    while entries.len() < n_masks {
        attempts += 1;
        if attempts > 200 * n_masks {
            return Err(Error::validation(
                "could not generate enough distinct masks; budget too tight",
            ));
        }
        let mask = draw_cartesian_mask(n_lines, budget, center, sigma, &mut rng);
        if seen.insert(mask.sampled_lines.clone()) {
            mask.validate()?;
            entries.push(SamplingPattern::Cartesian(mask));
        }
    }

    Ok(PatternLibrary {
        manifest: LibraryManifest {
            kind: LibraryKind::Cartesian,
            seed,
            n_entries: entries.len(),
            cartesian: Some(CartesianParams {
                n_lines,
                acceleration: r,
                center_frac,
            }),
            radial: None,
        },
        entries,
        seed,
    })
}

/// Builds the sliding-window radial library: entry `i` holds spokes
/// `[i, i + window)` of the global golden-angle sequence. The entry count is
/// `n_total_rotations - window + 1`, capped at [`MAX_LIBRARY_ENTRIES`].
pub fn make_radial_library(
    n_total_rotations: usize,
    window: usize,
    samples_per_spoke: usize,
) -> Result<PatternLibrary> {
    if window == 0 {
        return Err(Error::validation("window must be positive"));
    }
    if window > n_total_rotations {
        return Err(Error::validation(
            "window larger than total golden-angle rotations",
        ));
    }
    if samples_per_spoke < 2 {
        return Err(Error::validation("need at least 2 samples per spoke"));
    }
    let n_entries = (n_total_rotations - window + 1).min(MAX_LIBRARY_ENTRIES);
    let entries: Vec<SamplingPattern> = (0..n_entries)
        .map(|i| SamplingPattern::Radial(RadialPattern::consecutive(i, window, samples_per_spoke)))
        .collect();
    let start_indices = (0..n_entries).collect();
    Ok(PatternLibrary {
        manifest: LibraryManifest {
            kind: LibraryKind::Radial,
            seed: 0,
            n_entries,
            cartesian: None,
            radial: Some(RadialParams {
                n_total_rotations,
                window,
                samples_per_spoke,
                start_indices,
            }),
        },
        entries,
        seed: 0,
    })
}

/// Picks a pattern: fixed mode always returns entry 0, augmented mode draws
/// uniformly, advancing `rng`. Returns the entry index alongside the pattern.
pub fn select_pattern<'l>(
    lib: &'l PatternLibrary,
    mode: SelectionMode,
    rng: &mut ChaCha8Rng,
) -> Result<(usize, &'l SamplingPattern)> {
    if lib.is_empty() {
        return Err(Error::validation("empty pattern library"));
    }
    let idx = match mode {
        SelectionMode::Fixed => 0,
        SelectionMode::Augmented => rng.random_range(0..lib.len()),
    };
    Ok((idx, &lib.entries[idx]))
}

/// Saves a library as `<stem>.tns` (Cartesian: 0/1 indicator rows; radial:
/// per-entry angle rows) plus `<stem>.json` with seed and parameters.
pub fn save_library(lib: &PatternLibrary, stem: impl AsRef<Path>) -> Result<()> {
    let stem = stem.as_ref();
    let tns = stem.with_extension("tns");
    let json = stem.with_extension("json");

    let tensor = match lib.kind() {
        LibraryKind::Cartesian => {
            let n_lines = lib.manifest.cartesian.as_ref().unwrap().n_lines;
            let mut flat = Vec::with_capacity(lib.len() * n_lines);
            for e in &lib.entries {
                let SamplingPattern::Cartesian(m) = e else {
                    return Err(Error::validation("mixed library kinds"));
                };
                flat.extend_from_slice(&m.to_indicator());
            }
            Tensor::new(
                TensorData::F32(ArrayD::from_shape_vec(IxDyn(&[lib.len(), n_lines]), flat).unwrap()),
                "cartesian-mask-library",
            )
        }
        LibraryKind::Radial => {
            let window = lib.manifest.radial.as_ref().unwrap().window;
            let mut flat = Vec::with_capacity(lib.len() * window);
            for e in &lib.entries {
                let SamplingPattern::Radial(p) = e else {
                    return Err(Error::validation("mixed library kinds"));
                };
                flat.extend_from_slice(&p.spoke_angles);
            }
            Tensor::new(
                TensorData::F64(ArrayD::from_shape_vec(IxDyn(&[lib.len(), window]), flat).unwrap()),
                "radial-trajectory-library",
            )
        }
    };
    save_tensor(&tensor, &tns)?;
    let manifest = serde_json::to_string_pretty(&lib.manifest)
        .map_err(|e| Error::validation(format!("manifest serialization: {e}")))?;
    std::fs::write(&json, manifest).map_err(|e| Error::io(&json, e))
}

pub fn load_library(stem: impl AsRef<Path>) -> Result<PatternLibrary> {
    let stem = stem.as_ref();
    let json = stem.with_extension("json");
    let tns = stem.with_extension("tns");
    let manifest: LibraryManifest = serde_json::from_str(
        &std::fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?,
    )
    .map_err(|e| Error::format(&json, e.to_string()))?;
    let tensor = load_tensor(&tns)?;

    let entries = match manifest.kind {
        LibraryKind::Cartesian => {
            let params = manifest
                .cartesian
                .as_ref()
                .ok_or_else(|| Error::format(&json, "missing cartesian params"))?;
            let TensorData::F32(arr) = &tensor.data else {
                return Err(Error::format(&tns, "expected f32 indicator matrix"));
            };
            let arr: Array2<f32> = arr
                .clone()
                .into_dimensionality::<ndarray::Ix2>()
                .map_err(|_| Error::format(&tns, "expected 2D indicator matrix"))?;
            let n_center = center_lines(params.n_lines, params.center_frac);
            let lo = params.n_lines / 2 - n_center / 2;
            arr.rows()
                .into_iter()
                .map(|row| {
                    let lines: Vec<usize> = row
                        .iter()
                        .enumerate()
                        .filter(|(_, v)| **v > 0.5)
                        .map(|(i, _)| i)
                        .collect();
                    let m = CartesianMask {
                        n_lines_total: params.n_lines,
                        sampled_lines: lines,
                        center_block: (lo, lo + n_center),
                    };
                    m.validate().map(|_| SamplingPattern::Cartesian(m))
                })
                .collect::<Result<Vec<_>>>()?
        }
        LibraryKind::Radial => {
            let params = manifest
                .radial
                .as_ref()
                .ok_or_else(|| Error::format(&json, "missing radial params"))?;
            let TensorData::F64(arr) = &tensor.data else {
                return Err(Error::format(&tns, "expected f64 angle matrix"));
            };
            let arr: Array2<f64> = arr
                .clone()
                .into_dimensionality::<ndarray::Ix2>()
                .map_err(|_| Error::format(&tns, "expected 2D angle matrix"))?;
            arr.rows()
                .into_iter()
                .zip(params.start_indices.iter())
                .map(|(row, &start)| {
                    SamplingPattern::Radial(RadialPattern {
                        spoke_angles: row.to_vec(),
                        samples_per_spoke: params.samples_per_spoke,
                        start_index: start,
                    })
                })
                .collect()
        }
    };

    Ok(PatternLibrary {
        seed: manifest.seed,
        entries,
        manifest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cartesian_line_counts() {
        let lib = make_cartesian_library(20, 128, 3.0, 0.05, 7).unwrap();
        assert_eq!(center_lines(128, 0.05), 6);
        for e in &lib.entries {
            let SamplingPattern::Cartesian(m) = e else { panic!() };
            assert_eq!(m.n_sampled(), 43);
            assert_eq!(m.center_block.1 - m.center_block.0, 6);
            for l in m.center_block.0..m.center_block.1 {
                assert!(m.contains_line(l));
            }
        }
    }

    #[test]
    fn r_of_one_rejected() {
        assert!(make_cartesian_library(10, 128, 1.0, 0.05, 7).is_err());
    }

    #[test]
    fn infeasible_center_budget_rejected() {
        // R = 20 -> budget 6; center_frac just below 1/R gives 6 center lines.
        assert!(make_cartesian_library(10, 128, 20.0, 0.049, 7).is_err());
    }

    #[test]
    fn library_distinct_and_regenerable() {
        let a = make_cartesian_library(3000, 128, 3.0, 0.05, 21).unwrap();
        let b = make_cartesian_library(3000, 128, 3.0, 0.05, 21).unwrap();
        assert_eq!(a.len(), 3000);
        let mut seen = HashSet::new();
        for (ea, eb) in a.entries.iter().zip(b.entries.iter()) {
            let (SamplingPattern::Cartesian(ma), SamplingPattern::Cartesian(mb)) = (ea, eb) else {
                panic!()
            };
            assert_eq!(ma, mb);
            assert!(seen.insert(ma.sampled_lines.clone()));
        }
    }

    #[test]
    fn golden_angle_values() {
        let p = RadialPattern::consecutive(0, 89, 64);
        assert_eq!(p.spoke_angles[0], 0.0);
        assert!((p.spoke_angles[1] - 1.94161).abs() < 1e-5);
        // Invariant: angle(k) == ((start + k) * GA) mod pi.
        for (k, &a) in p.spoke_angles.iter().enumerate() {
            let direct = (k as f64 * GOLDEN_ANGLE).rem_euclid(std::f64::consts::PI);
            assert!((a - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn radial_windows_overlap() {
        let lib = make_radial_library(200, 89, 64).unwrap();
        assert_eq!(lib.len(), 200 - 89 + 1);
        let SamplingPattern::Radial(p0) = &lib.entries[0] else { panic!() };
        let SamplingPattern::Radial(p1) = &lib.entries[1] else { panic!() };
        assert_eq!(&p0.spoke_angles[1..], &p1.spoke_angles[..88]);
    }

    #[test]
    fn radial_entry_count_capped() {
        let lib = make_radial_library(3088, 89, 16).unwrap();
        assert_eq!(lib.len(), 3000);
        let lib2 = make_radial_library(5000, 89, 16).unwrap();
        assert_eq!(lib2.len(), 3000);
    }

    #[test]
    fn radial_coords_within_nyquist() {
        let p = RadialPattern::consecutive(5, 13, 32);
        for (ky, kx) in p.coords() {
            assert!((ky * ky + kx * kx).sqrt() <= 0.5 + 1e-12);
        }
    }

    #[test]
    fn select_fixed_always_first() {
        let lib = make_cartesian_library(5, 64, 2.0, 0.06, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let (idx, _) = select_pattern(&lib, SelectionMode::Fixed, &mut rng).unwrap();
            assert_eq!(idx, 0);
        }
    }

    #[test]
    fn select_single_entry_augmented() {
        let lib = make_cartesian_library(1, 64, 2.0, 0.06, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let (idx, _) = select_pattern(&lib, SelectionMode::Augmented, &mut rng).unwrap();
            assert_eq!(idx, 0);
        }
    }

    #[test]
    fn augmented_draws_are_uniform() {
        // Deterministic seed; bounds verified once for this seed below.
        let lib = make_radial_library(3088, 89, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n_draws = 10_000usize;
        let mut counts = vec![0usize; lib.len()];
        for _ in 0..n_draws {
            let (idx, _) = select_pattern(&lib, SelectionMode::Augmented, &mut rng).unwrap();
            counts[idx] += 1;
        }
        let p = 1.0 / lib.len() as f64;
        let mean = n_draws as f64 * p;
        let sd = (n_draws as f64 * p * (1.0 - p)).sqrt();
        let limit = mean + 5.0 * sd;
        assert!(counts.iter().all(|&c| (c as f64) <= limit));
        // Chi-square over cells should sit near its dof (len - 1).
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - mean).powi(2) / mean)
            .sum();
        let dof = (lib.len() - 1) as f64;
        assert!((chi2 - dof).abs() < 6.0 * (2.0 * dof).sqrt(), "chi2 {chi2}");
    }

    #[test]
    fn library_roundtrip_cartesian() {
        let dir = tempfile::tempdir().unwrap();
        let lib = make_cartesian_library(12, 64, 3.0, 0.05, 5).unwrap();
        let stem = dir.path().join("lib");
        save_library(&lib, &stem).unwrap();
        let back = load_library(&stem).unwrap();
        assert_eq!(back.len(), lib.len());
        for (a, b) in lib.entries.iter().zip(back.entries.iter()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn library_roundtrip_radial() {
        let dir = tempfile::tempdir().unwrap();
        let lib = make_radial_library(120, 21, 32).unwrap();
        let stem = dir.path().join("rlib");
        save_library(&lib, &stem).unwrap();
        let back = load_library(&stem).unwrap();
        assert_eq!(back.len(), lib.len());
        for (a, b) in lib.entries.iter().zip(back.entries.iter()) {
            assert_eq!(a, b);
        }
    }
}
