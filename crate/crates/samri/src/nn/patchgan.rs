//! Patch-level discriminator: a short stack of stride-2 convolutions with
//! leaky rectified activations, ending in a 1-channel logit map. Each output
//! logit judges one receptive-field patch of the input, never the whole
//! image at once.

use serde::{Deserialize, Serialize};

use super::init::he_normal_init;
use super::layers::{
    leaky_relu_backward, leaky_relu_forward, ActCache, BatchNorm2d, BnCache, Conv2d, ConvCache,
    Tensor4,
};
use super::param::{Net, Param};
use crate::rng::SeededStream;

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct DiscriminatorCfg {
    pub n_layers: usize,
    pub base_channels: usize,
}

impl Default for DiscriminatorCfg {
    fn default() -> Self {
        DiscriminatorCfg {
            n_layers: 3,
            base_channels: 32,
        }
    }
}

#[derive(Debug, Clone)]
struct DBlock {
    conv: Conv2d,
    /// First block runs without normalization, matching common patch
    /// discriminator designs.
    bn: Option<BatchNorm2d>,
}

struct DBlockCache {
    conv: ConvCache,
    bn: Option<BnCache>,
    act: ActCache,
}

#[derive(Debug, Clone)]
pub struct PatchGan {
    pub cfg: DiscriminatorCfg,
    blocks: Vec<DBlock>,
    head: Conv2d,
}

pub struct PatchGanCache {
    blocks: Vec<DBlockCache>,
    head: ConvCache,
}

impl PatchGan {
    pub fn new(cfg: DiscriminatorCfg, init_stream: &mut SeededStream) -> Self {
        let mut init = he_normal_init(init_stream);
        let mut blocks = Vec::new();
        let mut in_ch = 2;
        for l in 0..cfg.n_layers {
            let out_ch = cfg.base_channels << l.min(3);
            blocks.push(DBlock {
                conv: Conv2d::new(&format!("disc.b{l}.conv"), in_ch, out_ch, 3, 2, &mut init),
                bn: if l == 0 {
                    None
                } else {
                    Some(BatchNorm2d::new(&format!("disc.b{l}.bn"), out_ch))
                },
            });
            in_ch = out_ch;
        }
        let head = Conv2d::new("disc.head", in_ch, 1, 3, 1, &mut init);
        PatchGan { cfg, blocks, head }
    }

    /// Logit map of shape `[B, 1, H/2^n_layers, W/2^n_layers]`; the sigmoid
    /// is applied inside the loss only.
    pub fn forward_train(&mut self, x: &Tensor4) -> (Tensor4, PatchGanCache) {
        let mut cur = x.clone();
        let mut caches = Vec::new();
        for b in &mut self.blocks {
            let (y, conv) = b.conv.forward(&cur);
            let (y, bn) = match &mut b.bn {
                Some(bn) => {
                    let (y, c) = bn.forward_train(&y);
                    (y, Some(c))
                }
                None => (y, None),
            };
            let (y, act) = leaky_relu_forward(&y);
            caches.push(DBlockCache { conv, bn, act });
            cur = y;
        }
        let (logits, head) = self.head.forward(&cur);
        (
            logits,
            PatchGanCache {
                blocks: caches,
                head,
            },
        )
    }

    pub fn forward_eval(&self, x: &Tensor4) -> Tensor4 {
        let mut cur = x.clone();
        for b in &self.blocks {
            let (y, _) = b.conv.forward(&cur);
            let y = match &b.bn {
                Some(bn) => bn.forward_eval(&y),
                None => y,
            };
            cur = y.mapv(|v| if v > 0.0 { v } else { super::layers::LEAKY_SLOPE * v });
        }
        self.head.forward(&cur).0
    }

    pub fn backward(&mut self, cache: &PatchGanCache, gy: &Tensor4, accumulate: bool) -> Tensor4 {
        let mut g = self.head.backward(&cache.head, gy, accumulate);
        for (b, c) in self.blocks.iter_mut().zip(cache.blocks.iter()).rev() {
            g = leaky_relu_backward(&c.act, &g);
            if let (Some(bn), Some(bnc)) = (&mut b.bn, &c.bn) {
                g = bn.backward(bnc, &g, accumulate);
            }
            g = b.conv.backward(&c.conv, &g, accumulate);
        }
        g
    }

    pub fn buffers_mut(&mut self) -> Vec<(String, &mut ndarray::Array1<f64>)> {
        let mut out: Vec<(String, &mut ndarray::Array1<f64>)> = Vec::new();
        for (l, b) in self.blocks.iter_mut().enumerate() {
            if let Some(bn) = &mut b.bn {
                out.push((format!("disc.b{l}.bn.running_mean"), &mut bn.running_mean));
                out.push((format!("disc.b{l}.bn.running_var"), &mut bn.running_var));
            }
        }
        out
    }
}

impl Net for PatchGan {
    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = Vec::new();
        for b in &mut self.blocks {
            p.extend(b.conv.params_mut());
            if let Some(bn) = &mut b.bn {
                p.extend(bn.params_mut());
            }
        }
        p.extend(self.head.params_mut());
        p
    }
}
