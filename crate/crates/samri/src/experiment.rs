//! The evaluation harness: builds synthetic datasets, trains (or loads)
//! fixed-pattern and sampling-augmented reconstruction networks, runs every
//! requested method against seen and unseen undersampling patterns, and
//! writes per-slice metrics, summary tables, and image artifacts.

use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array2;
use num_complex::Complex64;
use rand_chacha::rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cs::{cs_pi_reconstruct, zero_fill, CsConfig};
use crate::encoding::{EncodingContext, KspaceSamples};
use crate::error::{Error, Result};
use crate::image::ComplexImage;
use crate::metrics::{nrmse, ssim, tenengrad_reduction};
use crate::nn::checkpoint::{load_checkpoint, save_checkpoint};
use crate::nn::train::{train_epochs, TrainSample, TrainState};
use crate::nn::{infer, TrainConfig};
use crate::phantom::{generate_phantom, PhantomSpec};
use crate::sampling::{
    make_cartesian_library, make_radial_library, PatternLibrary, RadialPattern, SamplingPattern,
    SelectionMode,
};
use crate::sens::estimate_sensitivities;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PhantomBase {
    pub grid: usize,
    pub n_ellipses: usize,
    pub texture_amp: f64,
    pub n_coils: usize,
    pub contrast_scale: f64,
}

impl Default for PhantomBase {
    fn default() -> Self {
        PhantomBase {
            grid: 128,
            n_ellipses: 8,
            texture_amp: 0.3,
            n_coils: 4,
            contrast_scale: 1.0,
        }
    }
}

impl PhantomBase {
    pub fn spec(&self, seed: u64) -> PhantomSpec {
        PhantomSpec {
            seed,
            grid: self.grid,
            n_ellipses: self.n_ellipses,
            texture_amp: self.texture_amp,
            n_coils: self.n_coils,
            contrast_scale: self.contrast_scale,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SamplingConfig {
    Cartesian {
        acceleration: f64,
        center_frac: f64,
    },
    Radial {
        window: usize,
        samples_per_spoke: usize,
        /// Total golden-angle rotations in the training library.
        n_total_rotations: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Zf,
    CsPi,
    CnnFix,
    CnnAug,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Zf => "zf",
            Method::CsPi => "cs-pi",
            Method::CnnFix => "cnn-fix",
            Method::CnnAug => "cnn-aug",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensSource {
    /// Ground-truth maps from the phantom generator.
    Truth,
    /// Adaptive-combination estimate from the coil images.
    Estimate { block: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainSettings {
    /// Train missing networks inside the experiment run.
    pub enabled: bool,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub lambda_loss1: f64,
    pub lambda_loss2: f64,
    pub lambda_gan: f64,
    pub seed: u64,
    pub n_levels: usize,
    pub base_channels: usize,
    pub disc_layers: usize,
    pub disc_channels: usize,
    #[serde(default)]
    pub checkpoint_fix: Option<PathBuf>,
    #[serde(default)]
    pub checkpoint_aug: Option<PathBuf>,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            enabled: true,
            epochs: 30,
            batch: 3,
            lr: 2e-4,
            lambda_loss1: 10.0,
            lambda_loss2: 10.0,
            lambda_gan: 0.0,
            seed: 11,
            n_levels: 3,
            base_channels: 16,
            disc_layers: 3,
            disc_channels: 16,
            checkpoint_fix: None,
            checkpoint_aug: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub phantom: PhantomBase,
    pub n_train: usize,
    pub n_test: usize,
    pub dataset_seed: u64,
    pub sampling: SamplingConfig,
    pub library_entries: usize,
    pub library_seed: u64,
    /// Seed of the held-out evaluation patterns (disjoint from
    /// `library_seed`; enforced by a membership check).
    pub eval_seed: u64,
    pub methods: Vec<Method>,
    pub train: TrainSettings,
    pub cs: CsConfig,
    pub noise_sigma: f64,
    pub sens_source: SensSource,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            phantom: PhantomBase::default(),
            n_train: 150,
            n_test: 20,
            dataset_seed: 100,
            sampling: SamplingConfig::Cartesian {
                acceleration: 3.0,
                center_frac: 0.05,
            },
            library_entries: 3000,
            library_seed: 7,
            eval_seed: 7700,
            methods: vec![Method::Zf, Method::CsPi, Method::CnnFix, Method::CnnAug],
            train: TrainSettings::default(),
            cs: CsConfig::default(),
            noise_sigma: 0.0,
            sens_source: SensSource::Truth,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_test == 0 {
            return Err(Error::validation("n_test must be positive"));
        }
        if self.eval_seed == self.library_seed {
            return Err(Error::validation(
                "eval_seed must differ from library_seed (train/eval pattern disjointness)",
            ));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::validation("noise_sigma must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SliceRow {
    pub method: String,
    pub pattern: String,
    pub slice: usize,
    pub nrmse_pct: f64,
    pub ssim_pct: f64,
    pub tenengrad_pct: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub method: String,
    pub pattern: String,
    pub nrmse_pct_mean: f64,
    pub nrmse_pct_std: f64,
    pub ssim_pct_mean: f64,
    pub ssim_pct_std: f64,
    pub tenengrad_pct_mean: f64,
    pub tenengrad_pct_std: f64,
    pub time_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub per_slice: Vec<SliceRow>,
    pub summary: Vec<SummaryRow>,
}

impl ExperimentReport {
    pub fn summary_for(&self, method: &str, pattern: &str) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|r| r.method == method && r.pattern == pattern)
    }
}

pub fn build_dataset(base: &PhantomBase, seed0: u64, count: usize) -> Result<Vec<TrainSample>> {
    (0..count)
        .map(|i| {
            let p = generate_phantom(&base.spec(seed0 + i as u64))?;
            Ok(TrainSample {
                reference: p.reference,
                sens: p.sens,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub base: PhantomBase,
    pub seed0: u64,
    pub count: usize,
}

/// Write a dataset as one reference + sensitivity container pair per slice
/// plus `dataset.json`.
pub fn save_dataset(dir: &Path, base: &PhantomBase, seed0: u64, count: usize) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let samples = build_dataset(base, seed0, count)?;
    for (i, s) in samples.iter().enumerate() {
        crate::container::save_tensor(
            &s.reference.to_tensor("reference"),
            dir.join(format!("phantom_{i:04}.ref.tns")),
        )?;
        crate::container::save_tensor(
            &s.sens.to_tensor("sensitivities"),
            dir.join(format!("phantom_{i:04}.sens.tns")),
        )?;
    }
    let manifest = DatasetManifest {
        base: *base,
        seed0,
        count,
    };
    let path = dir.join("dataset.json");
    std::fs::write(
        &path,
        serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::validation(format!("manifest serialization: {e}")))?,
    )
    .map_err(|e| Error::io(&path, e))
}

pub fn load_dataset(dir: &Path) -> Result<(DatasetManifest, Vec<TrainSample>)> {
    let path = dir.join("dataset.json");
    let manifest: DatasetManifest = serde_json::from_str(
        &std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?,
    )
    .map_err(|e| Error::format(&path, e.to_string()))?;
    let mut samples = Vec::with_capacity(manifest.count);
    for i in 0..manifest.count {
        let r = crate::container::load_tensor(dir.join(format!("phantom_{i:04}.ref.tns")))?;
        let s = crate::container::load_tensor(dir.join(format!("phantom_{i:04}.sens.tns")))?;
        samples.push(TrainSample {
            reference: ComplexImage::from_tensor(&r)?,
            sens: crate::image::CoilStack::from_tensor(&s)?,
        });
    }
    Ok((manifest, samples))
}

/// Training library plus the two evaluation patterns (seen-by-fixed and
/// unseen). Asserts that neither evaluation pattern is a member of the
/// augmented training library.
pub fn build_patterns(
    cfg: &ExperimentConfig,
) -> Result<(PatternLibrary, SamplingPattern, SamplingPattern, String, String)> {
    match cfg.sampling {
        SamplingConfig::Cartesian {
            acceleration,
            center_frac,
        } => {
            let n_lines = cfg.phantom.grid;
            let lib = make_cartesian_library(
                cfg.library_entries,
                n_lines,
                acceleration,
                center_frac,
                cfg.library_seed,
            )?;
            let eval_lib =
                make_cartesian_library(2, n_lines, acceleration, center_frac, cfg.eval_seed)?;
            let m1 = eval_lib.entries[0].clone();
            let m2 = eval_lib.entries[1].clone();
            for (name, m) in [("maskc1", &m1), ("maskc2", &m2)] {
                if lib.contains(m) {
                    return Err(Error::validation(format!(
                        "evaluation pattern {name} collides with the training library; \
                         change eval_seed"
                    )));
                }
            }
            Ok((lib, m1, m2, "maskc1".into(), "maskc2".into()))
        }
        SamplingConfig::Radial {
            window,
            samples_per_spoke,
            n_total_rotations,
        } => {
            let lib = make_radial_library(n_total_rotations, window, samples_per_spoke)?;
            // Evaluation windows start past the library coverage; offsets
            // derive from eval_seed so different seeds give different spokes.
            let start1 = n_total_rotations + 1 + (cfg.eval_seed % 997) as usize;
            let start2 = start1 + window + 31;
            let m1 = SamplingPattern::Radial(RadialPattern::consecutive(
                start1,
                window,
                samples_per_spoke,
            ));
            let m2 = SamplingPattern::Radial(RadialPattern::consecutive(
                start2,
                window,
                samples_per_spoke,
            ));
            for (name, m) in [("maskr1", &m1), ("maskr2", &m2)] {
                if lib.contains(m) {
                    return Err(Error::validation(format!(
                        "evaluation pattern {name} collides with the training library"
                    )));
                }
            }
            Ok((lib, m1, m2, "maskr1".into(), "maskr2".into()))
        }
    }
}

fn train_config(s: &TrainSettings, mode: SelectionMode) -> TrainConfig {
    TrainConfig {
        mode,
        weights: crate::nn::LossWeights {
            loss1: s.lambda_loss1,
            loss2: s.lambda_loss2,
            gan: s.lambda_gan,
        },
        lr: s.lr,
        batch: s.batch,
        epochs: s.epochs,
        adam_betas: (0.5, 0.999),
        seed: s.seed,
        gen: crate::nn::GeneratorCfg {
            n_levels: s.n_levels,
            base_channels: s.base_channels,
            residual: true,
        },
        disc: crate::nn::DiscriminatorCfg {
            n_layers: s.disc_layers,
            base_channels: s.disc_channels,
        },
    }
}

/// A library whose entry 0 is the given pattern: what fixed-mode training
/// consumes, so that the fixed network trains on exactly the "seen"
/// evaluation pattern.
fn singleton_library(pattern: &SamplingPattern, template: &PatternLibrary) -> PatternLibrary {
    PatternLibrary {
        entries: vec![pattern.clone()],
        seed: template.seed,
        manifest: template.manifest.clone(),
    }
}

/// Obtain a trained network for `mode`: load from an explicit checkpoint,
/// reuse one left in the output directory by a previous run, or train from
/// scratch when training is enabled.
pub fn obtain_network(
    cfg: &ExperimentConfig,
    mode: SelectionMode,
    data: &[TrainSample],
    lib: &PatternLibrary,
    seen_pattern: &SamplingPattern,
    out_dir: &Path,
) -> Result<TrainState> {
    let explicit = match mode {
        SelectionMode::Fixed => cfg.train.checkpoint_fix.as_ref(),
        SelectionMode::Augmented => cfg.train.checkpoint_aug.as_ref(),
    };
    if let Some(path) = explicit {
        return load_checkpoint(path);
    }
    let tag = match mode {
        SelectionMode::Fixed => "cnn-fix",
        SelectionMode::Augmented => "cnn-aug",
    };
    let ckpt_dir = out_dir.join(format!("train-{tag}"));
    if ckpt_dir.join("manifest.json").exists() {
        return load_checkpoint(&ckpt_dir);
    }
    if !cfg.train.enabled {
        return Err(Error::validation(format!(
            "no checkpoint for {tag}; run `samri train --mode {}` or enable training in the config",
            match mode {
                SelectionMode::Fixed => "fixed",
                SelectionMode::Augmented => "augmented",
            }
        )));
    }
    let tcfg = train_config(&cfg.train, mode);
    let epochs = tcfg.epochs;
    let mut state = TrainState::new(tcfg)?;
    match mode {
        SelectionMode::Fixed => {
            let fix_lib = singleton_library(seen_pattern, lib);
            train_epochs(&mut state, data, &fix_lib, epochs, None)?;
        }
        SelectionMode::Augmented => {
            train_epochs(&mut state, data, lib, epochs, None)?;
        }
    }
    save_checkpoint(&mut state, &ckpt_dir)?;
    write_loss_history(&state, &ckpt_dir.join("loss_history.csv"))?;
    Ok(state)
}

pub fn write_loss_history(state: &TrainState, path: &Path) -> Result<()> {
    let mut out = String::from("iteration,epoch,loss1,loss2,gan_g,gan_d,total\n");
    for r in &state.history {
        out.push_str(&format!(
            "{},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
            r.iteration, r.epoch, r.loss1, r.loss2, r.gan_g, r.gan_d, r.total
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Simulate the acquisition of one slice through `pattern`, with optional
/// complex Gaussian noise.
pub fn acquire(
    sample: &TrainSample,
    pattern: &SamplingPattern,
    sens_source: SensSource,
    noise_sigma: f64,
    noise_seed: u64,
) -> Result<(EncodingContext, KspaceSamples)> {
    let sens = match sens_source {
        SensSource::Truth => sample.sens.clone(),
        SensSource::Estimate { block } => estimate_sensitivities(
            &crate::image::CoilStack::new(
                sample
                    .sens
                    .images
                    .iter()
                    .map(|s| {
                        ComplexImage::new(&s.data * &sample.reference.data, None).unwrap()
                    })
                    .collect(),
            )?,
            block,
        )?,
    };
    let ctx = EncodingContext::new(&sens, pattern.clone())?;
    let mut d = ctx.encode(&sample.reference)?;
    if noise_sigma > 0.0 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(noise_seed);
        d.values.mapv_inplace(|z| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            z + Complex64::new(noise_sigma * re, noise_sigma * im)
        });
    }
    Ok((ctx, d))
}

struct MethodRunner<'a> {
    cs: &'a CsConfig,
    fix: Option<&'a TrainState>,
    aug: Option<&'a TrainState>,
}

impl MethodRunner<'_> {
    fn reconstruct(
        &self,
        method: Method,
        ctx: &EncodingContext,
        d: &KspaceSamples,
    ) -> Result<ComplexImage> {
        match method {
            Method::Zf => zero_fill(ctx, d),
            Method::CsPi => Ok(cs_pi_reconstruct(ctx, d, self.cs)?.image),
            Method::CnnFix => {
                let state = self.fix.ok_or_else(|| {
                    Error::validation("cnn-fix requested but no network available")
                })?;
                let xu = zero_fill(ctx, d)?;
                infer(&state.gen, &xu)
            }
            Method::CnnAug => {
                let state = self.aug.ok_or_else(|| {
                    Error::validation("cnn-aug requested but no network available")
                })?;
                let xu = zero_fill(ctx, d)?;
                infer(&state.gen, &xu)
            }
        }
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn save_png(img: &Array2<f64>, path: &Path) -> Result<()> {
    let (h, w) = img.dim();
    let peak = img.iter().fold(0.0f64, |m, v| m.max(*v)).max(1e-12);
    let mut buf = image::GrayImage::new(w as u32, h as u32);
    for ((i, j), v) in img.indexed_iter() {
        let g = ((v / peak).clamp(0.0, 1.0) * 255.0).round() as u8;
        buf.put_pixel(j as u32, i as u32, image::Luma([g]));
    }
    buf.save(path)
        .map_err(|e| Error::validation(format!("png save {}: {e}", path.display())))
}

/// Run the full comparison. Writes `metrics.csv` (per-slice, deterministic
/// bytes under fixed seeds), `summary.csv` (with timing), `report.json`,
/// and reconstruction/difference images under `out_dir/images`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentReport> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let cfg_path = out_dir.join("config.json");
    std::fs::write(
        &cfg_path,
        serde_json::to_string_pretty(cfg)
            .map_err(|e| Error::validation(format!("config serialization: {e}")))?,
    )
    .map_err(|e| Error::io(&cfg_path, e))?;

    let (lib, m1, m2, label1, label2) = build_patterns(cfg)?;
    let train_data = build_dataset(&cfg.phantom, cfg.dataset_seed, cfg.n_train)?;
    let test_data = build_dataset(
        &cfg.phantom,
        cfg.dataset_seed + cfg.n_train as u64,
        cfg.n_test,
    )?;

    let need_fix = cfg.methods.contains(&Method::CnnFix);
    let need_aug = cfg.methods.contains(&Method::CnnAug);
    let fix_state = if need_fix {
        Some(obtain_network(cfg, SelectionMode::Fixed, &train_data, &lib, &m1, out_dir)?)
    } else {
        None
    };
    let aug_state = if need_aug {
        Some(obtain_network(cfg, SelectionMode::Augmented, &train_data, &lib, &m1, out_dir)?)
    } else {
        None
    };
    let runner = MethodRunner {
        cs: &cfg.cs,
        fix: fix_state.as_ref(),
        aug: aug_state.as_ref(),
    };

    let img_dir = out_dir.join("images");
    std::fs::create_dir_all(&img_dir).map_err(|e| Error::io(&img_dir, e))?;

    let mut per_slice = Vec::new();
    let mut summary = Vec::new();
    for method in &cfg.methods {
        for (pattern, label) in [(&m1, &label1), (&m2, &label2)] {
            let mut rows = Vec::with_capacity(cfg.n_test);
            let mut times = Vec::with_capacity(cfg.n_test);
            for (slice, sample) in test_data.iter().enumerate() {
                let (ctx, d) = acquire(
                    sample,
                    pattern,
                    cfg.sens_source,
                    cfg.noise_sigma,
                    cfg.eval_seed ^ (slice as u64).wrapping_mul(0x9e37_79b9),
                )?;
                let t0 = Instant::now();
                let recon = runner.reconstruct(*method, &ctx, &d)?;
                let elapsed = t0.elapsed().as_secs_f64();

                let rec_mag = recon.magnitude();
                let ref_mag = sample.reference.magnitude();
                let row = SliceRow {
                    method: method.label().into(),
                    pattern: label.clone(),
                    slice,
                    nrmse_pct: 100.0 * nrmse(&rec_mag, &ref_mag)?,
                    ssim_pct: 100.0 * ssim(&rec_mag, &ref_mag, 2.0, None)?,
                    tenengrad_pct: 100.0 * tenengrad_reduction(&rec_mag, &ref_mag)?,
                };
                times.push(elapsed);

                let stem = format!("{}_{}_{:03}", method.label(), label, slice);
                crate::container::save_tensor(
                    &recon.to_tensor("recon"),
                    img_dir.join(format!("{stem}.tns")),
                )?;
                save_png(&rec_mag, &img_dir.join(format!("{stem}.png")))?;
                let diff = ndarray::Zip::from(&rec_mag)
                    .and(&ref_mag)
                    .map_collect(|a, b| (a - b).abs());
                save_png(&diff, &img_dir.join(format!("{stem}_diff.png")))?;

                rows.push(row);
            }
            let (nr_mean, nr_std) = mean_std(&rows.iter().map(|r| r.nrmse_pct).collect::<Vec<_>>());
            let (ss_mean, ss_std) = mean_std(&rows.iter().map(|r| r.ssim_pct).collect::<Vec<_>>());
            let (tg_mean, tg_std) =
                mean_std(&rows.iter().map(|r| r.tenengrad_pct).collect::<Vec<_>>());
            let time_mean = times.iter().sum::<f64>() / times.len() as f64;
            summary.push(SummaryRow {
                method: method.label().into(),
                pattern: label.clone(),
                nrmse_pct_mean: nr_mean,
                nrmse_pct_std: nr_std,
                ssim_pct_mean: ss_mean,
                ssim_pct_std: ss_std,
                tenengrad_pct_mean: tg_mean,
                tenengrad_pct_std: tg_std,
                time_s: time_mean,
            });
            per_slice.extend(rows);
        }
    }

    // Reference images once per slice.
    for (slice, sample) in test_data.iter().enumerate() {
        let stem = format!("reference_{slice:03}");
        crate::container::save_tensor(
            &sample.reference.to_tensor("reference"),
            img_dir.join(format!("{stem}.tns")),
        )?;
        save_png(&sample.reference.magnitude(), &img_dir.join(format!("{stem}.png")))?;
    }

    let report = ExperimentReport { per_slice, summary };
    write_metrics_csv(&report, &out_dir.join("metrics.csv"))?;
    write_summary_csv(&report, &out_dir.join("summary.csv"))?;
    let json_path = out_dir.join("report.json");
    std::fs::write(
        &json_path,
        serde_json::to_string_pretty(&report)
            .map_err(|e| Error::validation(format!("report serialization: {e}")))?,
    )
    .map_err(|e| Error::io(&json_path, e))?;
    Ok(report)
}

pub fn write_metrics_csv(report: &ExperimentReport, path: &Path) -> Result<()> {
    let mut out = String::from("method,pattern,slice,nrmse_pct,ssim_pct,tenengrad_pct\n");
    for r in &report.per_slice {
        out.push_str(&format!(
            "{},{},{},{:.9},{:.9},{:.9}\n",
            r.method, r.pattern, r.slice, r.nrmse_pct, r.ssim_pct, r.tenengrad_pct
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_summary_csv(report: &ExperimentReport, path: &Path) -> Result<()> {
    let mut out = String::from(
        "method,pattern,nrmse_pct,nrmse_pct_std,ssim_pct,ssim_pct_std,tenengrad_pct,tenengrad_pct_std,time_s\n",
    );
    for r in &report.summary {
        out.push_str(&format!(
            "{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.6}\n",
            r.method,
            r.pattern,
            r.nrmse_pct_mean,
            r.nrmse_pct_std,
            r.ssim_pct_mean,
            r.ssim_pct_std,
            r.tenengrad_pct_mean,
            r.tenengrad_pct_std,
            r.time_s
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
