//! Command-line interface: dataset generation, pattern libraries, network
//! training, single-slice reconstruction, the full evaluation experiment,
//! and report rendering.
//!
//! Exit codes: 0 success, 2 validation/I-O error, 3 numerical failure.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use samri::container::{save_tensor, Tensor, TensorData};
use samri::cs::{cs_pi_reconstruct, zero_fill, CsConfig};
use samri::error::{Error, Result};
use samri::experiment::{
    acquire, load_dataset, run_experiment, save_dataset, ExperimentConfig, PhantomBase,
    SensSource,
};
use samri::nn::checkpoint::{load_checkpoint, save_checkpoint};
use samri::nn::{infer, train, TrainConfig};
use samri::report::render_report;
use samri::sampling::{
    load_library, make_cartesian_library, make_radial_library, save_library, SelectionMode,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Precision {
    F32,
    F64,
}

#[derive(Parser)]
#[command(
    name = "samri",
    version,
    about = "Accelerated-MRI reconstruction sandbox: simulation, undersampling libraries, CS and CNN reconstruction, evaluation"
)]
struct Cli {
    /// JSON experiment configuration (used by `eval`; optional elsewhere).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the primary seed of the invoked command.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for per-slice evaluation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Storage precision for real-valued tensor exports; complex data always
    /// uses the canonical interleaved-f32 payload.
    #[arg(long, global = true, value_enum, default_value = "f64")]
    precision: Precision,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MaskKind {
    Cartesian,
    Radial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TrainMode {
    Fixed,
    Augmented,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReconMethod {
    Zf,
    CsPi,
    Cnn,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic multi-coil phantom dataset.
    Phantoms {
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 128)]
        grid: usize,
        #[arg(long, default_value_t = 4)]
        coils: usize,
        #[arg(long, default_value_t = 8)]
        ellipses: usize,
        #[arg(long, default_value_t = 0.3)]
        texture: f64,
        #[arg(long, default_value_t = 1.0)]
        contrast: f64,
    },
    /// Build an undersampling pattern library.
    Masks {
        #[arg(long, value_enum)]
        kind: MaskKind,
        /// Cartesian: number of masks (library entries).
        #[arg(long, default_value_t = 3000)]
        entries: usize,
        #[arg(long, default_value_t = 128)]
        lines: usize,
        #[arg(long, default_value_t = 3.0)]
        accel: f64,
        #[arg(long, default_value_t = 0.05)]
        center_frac: f64,
        /// Radial: total golden-angle rotations (entries = rotations - window + 1, capped at 3000).
        #[arg(long, default_value_t = 3088)]
        rotations: usize,
        #[arg(long, default_value_t = 89)]
        window: usize,
        #[arg(long, default_value_t = 256)]
        samples: usize,
    },
    /// Train the reconstruction network on a dataset + library.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        /// Library stem (expects <stem>.tns and <stem>.json).
        #[arg(long)]
        library: PathBuf,
        #[arg(long, value_enum)]
        mode: TrainMode,
        #[arg(long, default_value_t = 30)]
        epochs: usize,
        #[arg(long, default_value_t = 3)]
        batch: usize,
        #[arg(long, default_value_t = 2e-4)]
        lr: f64,
        #[arg(long, default_value_t = 10.0)]
        lambda1: f64,
        #[arg(long, default_value_t = 10.0)]
        lambda2: f64,
        #[arg(long, default_value_t = 0.1)]
        lambda_gan: f64,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long, default_value_t = 16)]
        base: usize,
        #[arg(long, default_value_t = 3)]
        disc_layers: usize,
        #[arg(long, default_value_t = 16)]
        disc_channels: usize,
    },
    /// Reconstruct a single dataset slice with one method.
    Recon {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long)]
        library: PathBuf,
        /// Library entry to sample with.
        #[arg(long, default_value_t = 0)]
        entry: usize,
        #[arg(long, value_enum)]
        method: ReconMethod,
        /// Checkpoint directory (required for --method cnn).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 2.5e-3)]
        lambda: f64,
        #[arg(long, default_value_t = 120)]
        iters: usize,
        #[arg(long, default_value_t = 0.0)]
        noise_sigma: f64,
    },
    /// Run the full method x pattern comparison from a JSON config.
    Eval,
    /// Render markdown + SVG from an experiment output directory.
    Report {
        /// Directory holding metrics.csv / summary.csv.
        #[arg(long)]
        metrics: PathBuf,
    },
}

fn require_out(cli: &Cli) -> Result<PathBuf> {
    cli.out
        .clone()
        .ok_or_else(|| Error::validation("--out <dir> is required for this command"))
}

fn save_real_tensor(
    precision: Precision,
    arr: &ndarray::Array2<f64>,
    tag: &str,
    path: &std::path::Path,
) -> Result<()> {
    let data = match precision {
        Precision::F32 => TensorData::F32(arr.mapv(|v| v as f32).into_dyn()),
        Precision::F64 => TensorData::F64(arr.clone().into_dyn()),
    };
    save_tensor(&Tensor::new(data, tag), path)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::validation(format!("thread pool: {e}")))?;
    }

    match &cli.cmd {
        Cmd::Phantoms {
            count,
            grid,
            coils,
            ellipses,
            texture,
            contrast,
        } => {
            let out = require_out(&cli)?;
            let base = PhantomBase {
                grid: *grid,
                n_ellipses: *ellipses,
                texture_amp: *texture,
                n_coils: *coils,
                contrast_scale: *contrast,
            };
            let seed0 = cli.seed.unwrap_or(100);
            save_dataset(&out, &base, seed0, *count)?;
            println!(
                "wrote {count} phantoms ({grid}x{grid}, {coils} coils) to {}",
                out.display()
            );
        }
        Cmd::Masks {
            kind,
            entries,
            lines,
            accel,
            center_frac,
            rotations,
            window,
            samples,
        } => {
            let out = require_out(&cli)?;
            if let Some(parent) = out.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
                }
            }
            let lib = match kind {
                MaskKind::Cartesian => make_cartesian_library(
                    *entries,
                    *lines,
                    *accel,
                    *center_frac,
                    cli.seed.unwrap_or(7),
                )?,
                MaskKind::Radial => make_radial_library(*rotations, *window, *samples)?,
            };
            save_library(&lib, &out)?;
            println!("wrote {} patterns to {}.tns/.json", lib.len(), out.display());
        }
        Cmd::Train {
            dataset,
            library,
            mode,
            epochs,
            batch,
            lr,
            lambda1,
            lambda2,
            lambda_gan,
            levels,
            base,
            disc_layers,
            disc_channels,
        } => {
            let out = require_out(&cli)?;
            let (_, data) = load_dataset(dataset)?;
            let lib = load_library(library)?;
            let cfg = TrainConfig {
                mode: match mode {
                    TrainMode::Fixed => SelectionMode::Fixed,
                    TrainMode::Augmented => SelectionMode::Augmented,
                },
                weights: samri::nn::LossWeights {
                    loss1: *lambda1,
                    loss2: *lambda2,
                    gan: *lambda_gan,
                },
                lr: *lr,
                batch: *batch,
                epochs: *epochs,
                adam_betas: (0.5, 0.999),
                seed: cli.seed.unwrap_or(11),
                gen: samri::nn::GeneratorCfg {
                    n_levels: *levels,
                    base_channels: *base,
                    residual: true,
                },
                disc: samri::nn::DiscriminatorCfg {
                    n_layers: *disc_layers,
                    base_channels: *disc_channels,
                },
            };
            let mut state = train(&data, &lib, cfg, Some(&out))?;
            save_checkpoint(&mut state, &out)?;
            samri::experiment::write_loss_history(&state, &out.join("loss_history.csv"))?;
            let last = state.history.last();
            println!(
                "trained {} iterations; final loss1 {:.5}",
                state.iteration,
                last.map(|r| r.loss1).unwrap_or(f64::NAN)
            );
        }
        Cmd::Recon {
            dataset,
            index,
            library,
            entry,
            method,
            checkpoint,
            lambda,
            iters,
            noise_sigma,
        } => {
            let out = require_out(&cli)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let (_, data) = load_dataset(dataset)?;
            let sample = data
                .get(*index)
                .ok_or_else(|| Error::validation(format!("slice {index} out of range")))?;
            let lib = load_library(library)?;
            let pattern = lib
                .entries
                .get(*entry)
                .ok_or_else(|| Error::validation(format!("entry {entry} out of range")))?;
            let (ctx, d) = acquire(
                sample,
                pattern,
                SensSource::Truth,
                *noise_sigma,
                cli.seed.unwrap_or(0),
            )?;
            let recon = match method {
                ReconMethod::Zf => zero_fill(&ctx, &d)?,
                ReconMethod::CsPi => {
                    let cfg = CsConfig {
                        lambda: *lambda,
                        max_iters: *iters,
                        ..Default::default()
                    };
                    let res = cs_pi_reconstruct(&ctx, &d, &cfg)?;
                    // Objective history for convergence inspection.
                    let hist = res
                        .objective
                        .iter()
                        .enumerate()
                        .map(|(i, o)| format!("{i},{o:.12e}"))
                        .collect::<Vec<_>>()
                        .join("\n");
                    let hp = out.join("objective.csv");
                    std::fs::write(&hp, format!("iter,objective\n{hist}\n"))
                        .map_err(|e| Error::io(&hp, e))?;
                    res.image
                }
                ReconMethod::Cnn => {
                    let ckpt = checkpoint
                        .as_ref()
                        .ok_or_else(|| Error::validation("--checkpoint required for cnn"))?;
                    let state = load_checkpoint(ckpt)?;
                    let xu = zero_fill(&ctx, &d)?;
                    infer(&state.gen, &xu)?
                }
            };
            save_tensor(&recon.to_tensor("recon"), out.join("recon.tns"))?;
            save_real_tensor(
                cli.precision,
                &recon.magnitude(),
                "recon-magnitude",
                &out.join("recon_mag.tns"),
            )?;
            let nrmse = samri::metrics::nrmse(&recon.magnitude(), &sample.reference.magnitude())?;
            println!("nrmse {:.4}%", 100.0 * nrmse);
        }
        Cmd::Eval => {
            let out = require_out(&cli)?;
            let cfg_path = cli
                .config
                .as_ref()
                .ok_or_else(|| Error::validation("--config <json> required for eval"))?;
            let mut cfg: ExperimentConfig = serde_json::from_str(
                &std::fs::read_to_string(cfg_path).map_err(|e| Error::io(cfg_path, e))?,
            )
            .map_err(|e| Error::format(cfg_path, e.to_string()))?;
            if let Some(seed) = cli.seed {
                cfg.dataset_seed = seed;
            }
            let report = run_experiment(&cfg, &out)?;
            for row in &report.summary {
                println!(
                    "{:8} {:8}  nRMSE {:6.2}% +- {:4.2}  SSIM {:6.2}%  Tenengrad {:7.2}%  {:.3}s",
                    row.method,
                    row.pattern,
                    row.nrmse_pct_mean,
                    row.nrmse_pct_std,
                    row.ssim_pct_mean,
                    row.tenengrad_pct_mean,
                    row.time_s
                );
            }
        }
        Cmd::Report { metrics } => {
            let out = require_out(&cli)?;
            render_report(metrics, &out)?;
            println!("report written to {}", out.display());
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
