//! Training losses and their gradients.
//!
//! Pixel losses are mean absolute error over the real/imaginary channel
//! representation. The adversarial pair uses binary cross-entropy on patch
//! logits with the non-saturating generator form. The cyclic data-fidelity
//! term re-applies each sample's own undersampling operator to the
//! generator output and penalizes the mismatch with the network input.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::layers::Tensor4;
use crate::encoding::EncodingContext;
use crate::error::Result;
use crate::image::ComplexImage;

/// Loss weights; `gan == 0` degenerates to pure pixel/cyclic training.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LossWeights {
    pub loss1: f64,
    pub loss2: f64,
    pub gan: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            loss1: 10.0,
            loss2: 10.0,
            gan: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct LossValues {
    pub loss1: f64,
    pub loss2: f64,
    pub gan_g: f64,
    pub gan_d: f64,
}

impl LossValues {
    pub fn generator_total(&self, w: &LossWeights) -> f64 {
        w.loss1 * self.loss1 + w.loss2 * self.loss2 + w.gan * self.gan_g
    }

    pub fn all_finite(&self) -> bool {
        self.loss1.is_finite()
            && self.loss2.is_finite()
            && self.gan_g.is_finite()
            && self.gan_d.is_finite()
    }
}

/// Mean absolute error over all tensor elements; returns the loss and its
/// gradient with respect to `pred`.
pub fn l1_loss(pred: &Tensor4, target: &Tensor4) -> (f64, Tensor4) {
    debug_assert_eq!(pred.dim(), target.dim());
    let n = pred.len() as f64;
    let mut grad = Tensor4::zeros(pred.raw_dim());
    let mut sum = 0.0;
    ndarray::Zip::from(&mut grad)
        .and(pred)
        .and(target)
        .for_each(|g, &p, &t| {
            let r = p - t;
            sum += r.abs();
            // f64::signum maps 0.0 to 1.0; the L1 subgradient at 0 is 0.
            *g = if r > 0.0 {
                1.0
            } else if r < 0.0 {
                -1.0
            } else {
                0.0
            } / n;
        });
    (sum / n, grad)
}

/// Numerically stable binary cross-entropy on logits against a constant
/// target (1 = real, 0 = fake); gradient is `(sigmoid(z) - target) / n`.
pub fn bce_with_logits(logits: &Tensor4, target: f64) -> (f64, Tensor4) {
    let n = logits.len() as f64;
    let mut grad = Tensor4::zeros(logits.raw_dim());
    let mut sum = 0.0;
    ndarray::Zip::from(&mut grad).and(logits).for_each(|g, &z| {
        sum += z.max(0.0) - target * z + (1.0 + (-z.abs()).exp()).ln();
        let s = 1.0 / (1.0 + (-z).exp());
        *g = (s - target) / n;
    });
    (sum / n, grad)
}

/// Pack complex images into the `[B, 2, H, W]` channel representation.
pub fn images_to_channels(imgs: &[&Array2<Complex64>]) -> Tensor4 {
    let (h, w) = imgs[0].dim();
    let mut t = Tensor4::zeros((imgs.len(), 2, h, w));
    for (b, img) in imgs.iter().enumerate() {
        for ((i, j), z) in img.indexed_iter() {
            t[[b, 0, i, j]] = z.re;
            t[[b, 1, i, j]] = z.im;
        }
    }
    t
}

pub fn channels_to_image(t: &Tensor4, b: usize) -> Array2<Complex64> {
    let (_bs, _c, h, w) = t.dim();
    Array2::from_shape_fn((h, w), |(i, j)| {
        Complex64::new(t[[b, 0, i, j]], t[[b, 1, i, j]])
    })
}

/// One training sample's synthesized pair plus the operator that made it.
pub struct TrainBatch {
    /// Fully sampled references, `[B, 2, H, W]`.
    pub x: Tensor4,
    /// Aliased inputs from each sample's own pattern.
    pub xu: Tensor4,
    /// Per-sample encoding operators (pattern + sensitivities).
    pub ctxs: Vec<EncodingContext>,
}

/// Apply each sample's undersampling operator to the matching batch entry.
/// The operator is complex-linear and self-adjoint, so the same routine
/// serves forward evaluation and gradient backpropagation.
pub fn apply_phi(ctxs: &[EncodingContext], t: &Tensor4) -> Result<Tensor4> {
    let mut out = Tensor4::zeros(t.raw_dim());
    for (b, ctx) in ctxs.iter().enumerate() {
        let img = ComplexImage::new(channels_to_image(t, b), None)?;
        let yu = ctx.undersample_image(&img)?;
        for ((i, j), z) in yu.data.indexed_iter() {
            out[[b, 0, i, j]] = z.re;
            out[[b, 1, i, j]] = z.im;
        }
    }
    Ok(out)
}

/// All four loss terms at the current parameters, forward-only.
pub fn compute_losses(
    gen: &mut super::unet::Unet,
    disc: &mut super::patchgan::PatchGan,
    batch: &TrainBatch,
    weights: &LossWeights,
) -> Result<LossValues> {
    let (fake, _cache) = gen.forward_train(&batch.xu);
    let (loss1, _) = l1_loss(&fake, &batch.x);
    let phi_f = apply_phi(&batch.ctxs, &fake)?;
    let (loss2, _) = l1_loss(&phi_f, &batch.xu);
    let (gan_g, gan_d) = if weights.gan > 0.0 {
        let (fake_logits, _) = disc.forward_train(&fake);
        let (g, _) = bce_with_logits(&fake_logits, 1.0);
        let (real_logits, _) = disc.forward_train(&batch.x);
        let (d_real, _) = bce_with_logits(&real_logits, 1.0);
        let (d_fake, _) = bce_with_logits(&fake_logits, 0.0);
        (g, d_real + d_fake)
    } else {
        (0.0, 0.0)
    };
    Ok(LossValues {
        loss1,
        loss2,
        gan_g,
        gan_d,
    })
}
