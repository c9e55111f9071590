//! Alternating minimax training of the reconstruction generator and the
//! patch discriminator.
//!
//! Each iteration draws a batch, selects an undersampling pattern per image
//! (fixed mode: always library entry 0; augmented mode: a fresh uniform
//! draw per image per iteration), synthesizes the aliased inputs on the
//! fly, takes one Adam step on the discriminator loss, then one Adam step
//! on the weighted generator objective. Runs are bit-reproducible given the
//! seed: all randomness flows through dedicated ChaCha streams and the
//! computation is single-threaded.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::layers::Tensor4;
use super::loss::{
    apply_phi, bce_with_logits, channels_to_image, images_to_channels, l1_loss, LossValues,
    LossWeights, TrainBatch,
};
use super::param::Net;
use super::patchgan::{DiscriminatorCfg, PatchGan};
use super::unet::{GeneratorCfg, Unet};
use crate::encoding::EncodingContext;
use crate::error::{Error, Result};
use crate::image::{CoilStack, ComplexImage};
use crate::rng::{SeededStream, StreamKind};
use crate::sampling::{select_pattern, PatternLibrary, SelectionMode};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub mode: SelectionMode,
    pub weights: LossWeights,
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub adam_betas: (f64, f64),
    pub seed: u64,
    pub gen: GeneratorCfg,
    pub disc: DiscriminatorCfg,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: SelectionMode::Augmented,
            weights: LossWeights::default(),
            lr: 2e-4,
            batch: 3,
            epochs: 30,
            adam_betas: (0.5, 0.999),
            seed: 0,
            gen: GeneratorCfg::default(),
            disc: DiscriminatorCfg::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 || self.epochs == 0 {
            return Err(Error::validation("batch and epochs must be positive"));
        }
        if self.weights.loss1 < 0.0 || self.weights.loss2 < 0.0 || self.weights.gan < 0.0 {
            return Err(Error::validation("loss weights must be non-negative"));
        }
        if !(self.lr > 0.0) {
            return Err(Error::validation("learning rate must be positive"));
        }
        Ok(())
    }
}

/// One training image: the fully sampled reference and its coil maps.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub reference: ComplexImage,
    pub sens: CoilStack,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LossRecord {
    pub iteration: u64,
    pub epoch: usize,
    pub loss1: f64,
    pub loss2: f64,
    pub gan_g: f64,
    pub gan_d: f64,
    pub total: f64,
}

pub struct TrainState {
    pub cfg: TrainConfig,
    pub gen: Unet,
    pub disc: PatchGan,
    pub opt_g: Adam,
    pub opt_d: Adam,
    pub iteration: u64,
    pub epoch: usize,
    pub mask_stream: SeededStream,
    pub batch_stream: SeededStream,
    pub history: Vec<LossRecord>,
}

impl TrainState {
    pub fn new(cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let mut init_stream = SeededStream::new(cfg.seed, StreamKind::Init);
        let gen = Unet::new(cfg.gen, &mut init_stream);
        let disc = PatchGan::new(cfg.disc, &mut init_stream);
        let opt_g = Adam::new(cfg.lr, cfg.adam_betas);
        let opt_d = Adam::new(cfg.lr, cfg.adam_betas);
        Ok(TrainState {
            mask_stream: SeededStream::new(cfg.seed, StreamKind::Mask),
            batch_stream: SeededStream::new(cfg.seed, StreamKind::BatchOrder),
            gen,
            disc,
            opt_g,
            opt_d,
            iteration: 0,
            epoch: 0,
            history: Vec::new(),
            cfg,
        })
    }
}

/// Assemble a batch: per image, select a pattern per the configured mode and
/// synthesize the aliased input through that pattern's operator.
fn build_batch(
    data: &[TrainSample],
    indices: &[usize],
    lib: &PatternLibrary,
    mode: SelectionMode,
    mask_stream: &mut SeededStream,
) -> Result<TrainBatch> {
    let mut refs = Vec::with_capacity(indices.len());
    let mut xus = Vec::with_capacity(indices.len());
    let mut ctxs = Vec::with_capacity(indices.len());
    for &i in indices {
        let sample = &data[i];
        let (_, pattern) = select_pattern(lib, mode, &mut mask_stream.rng)?;
        let ctx = EncodingContext::new(&sample.sens, pattern.clone())?;
        let xu = ctx.undersample_image(&sample.reference)?;
        refs.push(sample.reference.data.clone());
        xus.push(xu.data);
        ctxs.push(ctx);
    }
    let x = images_to_channels(&refs.iter().collect::<Vec<_>>());
    let xu = images_to_channels(&xus.iter().collect::<Vec<_>>());
    Ok(TrainBatch { x, xu, ctxs })
}

/// One optimization step on one batch; returns the recorded losses.
fn train_step(state: &mut TrainState, batch: &TrainBatch) -> Result<LossValues> {
    let w = state.cfg.weights;

    // Single generator forward serves both players: the discriminator step
    // only updates its own parameters, so the cached activations stay valid
    // for the generator step afterwards.
    let (fake, gen_cache) = state.gen.forward_train(&batch.xu);

    let mut values = LossValues::default();

    if w.gan > 0.0 {
        // Discriminator ascent step: push D(x) -> 1, D(F(xu)) -> 0.
        state.disc.zero_grads();
        let (real_logits, real_cache) = state.disc.forward_train(&batch.x);
        let (l_real, g_real) = bce_with_logits(&real_logits, 1.0);
        let _ = state.disc.backward(&real_cache, &g_real, true);
        let (fake_logits, fake_cache) = state.disc.forward_train(&fake);
        let (l_fake, g_fake) = bce_with_logits(&fake_logits, 0.0);
        let _ = state.disc.backward(&fake_cache, &g_fake, true);
        values.gan_d = l_real + l_fake;
        let mut params = state.disc.params_mut();
        state.opt_d.step(&mut params);
    }

    // Generator step on the full weighted objective.
    state.gen.zero_grads();
    let (loss1, g_loss1) = l1_loss(&fake, &batch.x);
    values.loss1 = loss1;

    let phi_f = apply_phi(&batch.ctxs, &fake)?;
    let (loss2, g_resid) = l1_loss(&phi_f, &batch.xu);
    values.loss2 = loss2;
    let g_loss2 = apply_phi(&batch.ctxs, &g_resid)?;

    let mut g_fake = Tensor4::zeros(fake.raw_dim());
    ndarray::Zip::from(&mut g_fake)
        .and(&g_loss1)
        .and(&g_loss2)
        .for_each(|g, &a, &b| *g = w.loss1 * a + w.loss2 * b);

    if w.gan > 0.0 {
        // Non-saturating generator term through the updated discriminator.
        let (fake_logits, fake_cache) = state.disc.forward_train(&fake);
        let (gan_g, g_logits) = bce_with_logits(&fake_logits, 1.0);
        values.gan_g = gan_g;
        let g_through_d = state.disc.backward(&fake_cache, &g_logits, false);
        ndarray::Zip::from(&mut g_fake)
            .and(&g_through_d)
            .for_each(|g, &d| *g += w.gan * d);
    }

    let _ = state.gen.backward(&gen_cache, &g_fake, true);
    let mut params = state.gen.params_mut();
    state.opt_g.step(&mut params);

    if !values.all_finite() {
        return Err(Error::numerical(format!(
            "non-finite loss at iteration {}",
            state.iteration
        )));
    }
    Ok(values)
}

/// Run `epochs_more` additional epochs on `data`, checkpointing into
/// `out_dir` after every epoch when given.
pub fn train_epochs(
    state: &mut TrainState,
    data: &[TrainSample],
    lib: &PatternLibrary,
    epochs_more: usize,
    out_dir: Option<&Path>,
) -> Result<()> {
    if data.is_empty() {
        return Err(Error::validation("empty training set"));
    }
    if lib.is_empty() {
        return Err(Error::validation("empty pattern library"));
    }
    let batch = state.cfg.batch;
    for _ in 0..epochs_more {
        let mut order: Vec<usize> = (0..data.len()).collect();
        // Fisher-Yates from the dedicated batch-order stream.
        for i in (1..order.len()).rev() {
            use rand::Rng;
            let j = state.batch_stream.rng.random_range(0..=i);
            order.swap(i, j);
        }
        for chunk in order.chunks(batch) {
            let batch_data = build_batch(
                data,
                chunk,
                lib,
                state.cfg.mode,
                &mut state.mask_stream,
            )?;
            let values = match train_step(state, &batch_data) {
                Ok(v) => v,
                Err(e) => {
                    if let Some(dir) = out_dir {
                        let _ = super::checkpoint::save_checkpoint(state, dir);
                    }
                    return Err(e);
                }
            };
            state.iteration += 1;
            let record = LossRecord {
                iteration: state.iteration,
                epoch: state.epoch,
                loss1: values.loss1,
                loss2: values.loss2,
                gan_g: values.gan_g,
                gan_d: values.gan_d,
                total: values.generator_total(&state.cfg.weights),
            };
            state.history.push(record);
        }
        state.epoch += 1;
        if let Some(dir) = out_dir {
            super::checkpoint::save_checkpoint(state, dir)?;
        }
    }
    Ok(())
}

/// Train from scratch.
pub fn train(
    data: &[TrainSample],
    lib: &PatternLibrary,
    cfg: TrainConfig,
    out_dir: Option<&Path>,
) -> Result<TrainState> {
    let epochs = cfg.epochs;
    let mut state = TrainState::new(cfg)?;
    train_epochs(&mut state, data, lib, epochs, out_dir)?;
    Ok(state)
}

/// Reconstruct one aliased image with the frozen generator (running batch
/// statistics; no data-consistency projection).
pub fn infer(gen: &Unet, xu: &ComplexImage) -> Result<ComplexImage> {
    let t = images_to_channels(&[&xu.data]);
    gen.check_input(&t)?;
    let y = gen.forward_eval(&t);
    ComplexImage::new(channels_to_image(&y, 0), Some("cnn".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::{generate_phantom, PhantomSpec};
    use crate::sampling::make_cartesian_library;

    fn tiny_dataset(n: usize, grid: usize) -> Vec<TrainSample> {
        (0..n)
            .map(|i| {
                let p = generate_phantom(&PhantomSpec {
                    seed: 1000 + i as u64,
                    grid,
                    n_coils: 2,
                    ..Default::default()
                })
                .unwrap();
                TrainSample {
                    reference: p.reference,
                    sens: p.sens,
                }
            })
            .collect()
    }

    fn tiny_cfg(mode: SelectionMode, epochs: usize) -> TrainConfig {
        TrainConfig {
            mode,
            weights: LossWeights {
                loss1: 10.0,
                loss2: 10.0,
                gan: 0.0,
            },
            epochs,
            batch: 2,
            seed: 7,
            gen: GeneratorCfg {
                n_levels: 2,
                base_channels: 4,
                residual: true,
            },
            disc: DiscriminatorCfg {
                n_layers: 2,
                base_channels: 4,
            },
            ..Default::default()
        }
    }

    #[test]
    fn zero_head_makes_initial_identity() {
        let cfg = tiny_cfg(SelectionMode::Fixed, 1);
        let mut state = TrainState::new(cfg).unwrap();
        let p = generate_phantom(&PhantomSpec {
            seed: 5,
            grid: 16,
            n_coils: 2,
            ..Default::default()
        })
        .unwrap();
        let t = images_to_channels(&[&p.reference.data]);
        let (y, _) = state.gen.forward_train(&t);
        let max_diff = y
            .iter()
            .zip(t.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert_eq!(max_diff, 0.0, "zero-initialized head must be the identity");
    }

    #[test]
    fn deterministic_loss_history() {
        let data = tiny_dataset(4, 16);
        let lib = make_cartesian_library(5, 16, 2.0, 0.1, 3).unwrap();
        let cfg = tiny_cfg(SelectionMode::Augmented, 2);
        let a = train(&data, &lib, cfg.clone(), None).unwrap();
        let b = train(&data, &lib, cfg, None).unwrap();
        assert_eq!(a.history.len(), b.history.len());
        for (ra, rb) in a.history.iter().zip(b.history.iter()) {
            assert_eq!(ra.loss1.to_bits(), rb.loss1.to_bits());
            assert_eq!(ra.loss2.to_bits(), rb.loss2.to_bits());
            assert_eq!(ra.total.to_bits(), rb.total.to_bits());
        }
    }

    #[test]
    fn fixed_mode_uses_entry_zero_only() {
        let data = tiny_dataset(3, 16);
        let lib = make_cartesian_library(6, 16, 2.0, 0.1, 3).unwrap();
        // Train in fixed mode; the mask stream must never advance.
        let cfg = tiny_cfg(SelectionMode::Fixed, 1);
        let state = TrainState::new(cfg.clone()).unwrap();
        let before = state.mask_stream.state().word_pos;
        let mut state = state;
        train_epochs(&mut state, &data, &lib, 1, None).unwrap();
        assert_eq!(state.mask_stream.state().word_pos, before);
    }

    #[test]
    fn infer_is_deterministic_and_identity_at_init() {
        let cfg = tiny_cfg(SelectionMode::Fixed, 1);
        let state = TrainState::new(cfg).unwrap();
        let p = generate_phantom(&PhantomSpec {
            seed: 8,
            grid: 16,
            n_coils: 2,
            ..Default::default()
        })
        .unwrap();
        let a = infer(&state.gen, &p.reference).unwrap();
        let b = infer(&state.gen, &p.reference).unwrap();
        assert_eq!(a.data, b.data);
        let max_diff = a
            .data
            .iter()
            .zip(p.reference.data.iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0f64, f64::max);
        assert_eq!(max_diff, 0.0);
    }
}
