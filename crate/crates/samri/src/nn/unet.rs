//! Residual encoder-decoder generator.
//!
//! Stride-2 convolutions downsample, transposed convolutions upsample, and
//! every level concatenates its encoder features into the decoder (skip
//! connections). Batch normalization and rectified-linear activations
//! follow every convolution except the head, which is zero-initialized so
//! the initial network is the identity map on its input.

use serde::{Deserialize, Serialize};

use super::init::{he_normal_init, zero_init};
use super::layers::{
    relu_backward, relu_forward, ActCache, BatchNorm2d, BnCache, Conv2d, ConvCache,
    ConvTranspose2d, DeconvCache, Tensor4,
};
use super::param::{Net, Param};
use crate::error::{Error, Result};
use crate::rng::SeededStream;

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct GeneratorCfg {
    pub n_levels: usize,
    pub base_channels: usize,
    pub residual: bool,
}

impl Default for GeneratorCfg {
    fn default() -> Self {
        GeneratorCfg {
            n_levels: 3,
            base_channels: 32,
            residual: true,
        }
    }
}

impl GeneratorCfg {
    pub fn channels(&self, level: usize) -> usize {
        self.base_channels << level
    }
}

#[derive(Debug, Clone)]
struct ConvBlock {
    conv: Conv2d,
    bn: BatchNorm2d,
}

struct ConvBlockCache {
    conv: ConvCache,
    bn: BnCache,
    act: ActCache,
}

impl ConvBlock {
    fn new(
        name: &str,
        in_ch: usize,
        out_ch: usize,
        stride: usize,
        init: &mut dyn FnMut(usize, &[usize]) -> ndarray::ArrayD<f64>,
    ) -> Self {
        ConvBlock {
            conv: Conv2d::new(&format!("{name}.conv"), in_ch, out_ch, 3, stride, init),
            bn: BatchNorm2d::new(&format!("{name}.bn"), out_ch),
        }
    }

    fn forward_train(&mut self, x: &Tensor4) -> (Tensor4, ConvBlockCache) {
        let (y, conv) = self.conv.forward(x);
        let (y, bn) = self.bn.forward_train(&y);
        let (y, act) = relu_forward(&y);
        (y, ConvBlockCache { conv, bn, act })
    }

    fn forward_eval(&self, x: &Tensor4) -> Tensor4 {
        let (y, _) = self.conv.forward(x);
        let y = self.bn.forward_eval(&y);
        y.mapv(|v| v.max(0.0))
    }

    fn backward(&mut self, cache: &ConvBlockCache, gy: &Tensor4, accumulate: bool) -> Tensor4 {
        let g = relu_backward(&cache.act, gy);
        let g = self.bn.backward(&cache.bn, &g, accumulate);
        self.conv.backward(&cache.conv, &g, accumulate)
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.conv.params_mut();
        p.extend(self.bn.params_mut());
        p
    }
}

#[derive(Debug, Clone)]
struct UpBlock {
    up: ConvTranspose2d,
    bn: BatchNorm2d,
    fuse: ConvBlock,
}

struct UpBlockCache {
    up: DeconvCache,
    bn: BnCache,
    act: ActCache,
    fuse: ConvBlockCache,
    skip_ch: usize,
}

impl UpBlock {
    fn new(
        name: &str,
        in_ch: usize,
        out_ch: usize,
        init: &mut dyn FnMut(usize, &[usize]) -> ndarray::ArrayD<f64>,
    ) -> Self {
        UpBlock {
            up: ConvTranspose2d::upsampler(&format!("{name}.up"), in_ch, out_ch, init),
            bn: BatchNorm2d::new(&format!("{name}.bn"), out_ch),
            fuse: ConvBlock::new(&format!("{name}.fuse"), 2 * out_ch, out_ch, 1, init),
        }
    }

    fn forward_train(&mut self, x: &Tensor4, skip: &Tensor4) -> (Tensor4, UpBlockCache) {
        let (y, up) = self.up.forward(x);
        let (y, bn) = self.bn.forward_train(&y);
        let (y, act) = relu_forward(&y);
        let cat = concat_channels(&y, skip);
        let (out, fuse) = self.fuse.forward_train(&cat);
        (
            out,
            UpBlockCache {
                up,
                bn,
                act,
                fuse,
                skip_ch: skip.dim().1,
            },
        )
    }

    fn forward_eval(&self, x: &Tensor4, skip: &Tensor4) -> Tensor4 {
        let (y, _) = self.up.forward(x);
        let y = self.bn.forward_eval(&y).mapv(|v| v.max(0.0));
        self.fuse.forward_eval(&concat_channels(&y, skip))
    }

    /// Returns (gradient wrt x, gradient wrt skip).
    fn backward(
        &mut self,
        cache: &UpBlockCache,
        gy: &Tensor4,
        accumulate: bool,
    ) -> (Tensor4, Tensor4) {
        let gcat = self.fuse.backward(&cache.fuse, gy, accumulate);
        let (gmain, gskip) = split_channels(&gcat, cache.skip_ch);
        let g = relu_backward(&cache.act, &gmain);
        let g = self.bn.backward(&cache.bn, &g, accumulate);
        let gx = self.up.backward(&cache.up, &g, accumulate);
        (gx, gskip)
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.up.params_mut();
        p.extend(self.bn.params_mut());
        p.extend(self.fuse.params_mut());
        p
    }
}

fn concat_channels(a: &Tensor4, b: &Tensor4) -> Tensor4 {
    // Built by hand to guarantee standard layout for the GEMM paths.
    let (bs, ca, h, w) = a.dim();
    let cb = b.dim().1;
    let mut out = Tensor4::zeros((bs, ca + cb, h, w));
    out.slice_mut(ndarray::s![.., ..ca, .., ..]).assign(a);
    out.slice_mut(ndarray::s![.., ca.., .., ..]).assign(b);
    out
}

fn split_channels(t: &Tensor4, tail_ch: usize) -> (Tensor4, Tensor4) {
    let c = t.dim().1;
    let head = t
        .slice(ndarray::s![.., ..c - tail_ch, .., ..])
        .to_owned();
    let tail = t
        .slice(ndarray::s![.., c - tail_ch.., .., ..])
        .to_owned();
    (head, tail)
}

/// The reconstruction generator: 2-channel (re/im) in, 2-channel out.
#[derive(Debug, Clone)]
pub struct Unet {
    pub cfg: GeneratorCfg,
    stem: ConvBlock,
    downs: Vec<ConvBlock>,
    mid: ConvBlock,
    ups: Vec<UpBlock>,
    head: Conv2d,
}

pub struct UnetCache {
    stem: ConvBlockCache,
    downs: Vec<ConvBlockCache>,
    mid: ConvBlockCache,
    ups: Vec<UpBlockCache>,
    head: ConvCache,
    n_skip_grads: usize,
}

impl Unet {
    pub fn new(cfg: GeneratorCfg, init_stream: &mut SeededStream) -> Self {
        let mut init = he_normal_init(init_stream);
        let stem = ConvBlock::new("gen.stem", 2, cfg.channels(0), 1, &mut init);
        let mut downs = Vec::new();
        for l in 0..cfg.n_levels {
            downs.push(ConvBlock::new(
                &format!("gen.down{l}"),
                cfg.channels(l),
                cfg.channels(l + 1),
                2,
                &mut init,
            ));
        }
        let mid = ConvBlock::new(
            "gen.mid",
            cfg.channels(cfg.n_levels),
            cfg.channels(cfg.n_levels),
            1,
            &mut init,
        );
        let mut ups = Vec::new();
        for l in (0..cfg.n_levels).rev() {
            ups.push(UpBlock::new(
                &format!("gen.up{l}"),
                cfg.channels(l + 1),
                cfg.channels(l),
                &mut init,
            ));
        }
        let mut zinit = zero_init();
        let head = Conv2d::new("gen.head", cfg.channels(0), 2, 3, 1, &mut zinit);
        Unet {
            cfg,
            stem,
            downs,
            mid,
            ups,
            head,
        }
    }

    pub fn check_input(&self, x: &Tensor4) -> Result<()> {
        let (_b, c, h, w) = x.dim();
        if c != 2 {
            return Err(Error::validation("generator expects 2 input channels"));
        }
        let div = 1usize << self.cfg.n_levels;
        if h % div != 0 || w % div != 0 {
            return Err(Error::validation(format!(
                "input {h}x{w} not divisible by 2^{}",
                self.cfg.n_levels
            )));
        }
        Ok(())
    }

    pub fn forward_train(&mut self, x: &Tensor4) -> (Tensor4, UnetCache) {
        let (mut cur, stem_cache) = self.stem.forward_train(x);
        let mut skips = vec![cur.clone()];
        let mut down_caches = Vec::new();
        for l in 0..self.cfg.n_levels {
            let (next, cache) = self.downs[l].forward_train(&cur);
            down_caches.push(cache);
            cur = next;
            if l + 1 < self.cfg.n_levels {
                skips.push(cur.clone());
            }
        }
        let (mut cur, mid_cache) = self.mid.forward_train(&cur);
        let mut up_caches = Vec::new();
        for (i, up) in self.ups.iter_mut().enumerate() {
            let skip = &skips[self.cfg.n_levels - 1 - i];
            let (next, cache) = up.forward_train(&cur, skip);
            up_caches.push(cache);
            cur = next;
        }
        let (net_out, head_cache) = self.head.forward(&cur);
        let out = if self.cfg.residual { &net_out + x } else { net_out };
        (
            out,
            UnetCache {
                stem: stem_cache,
                downs: down_caches,
                mid: mid_cache,
                ups: up_caches,
                head: head_cache,
                n_skip_grads: skips.len(),
            },
        )
    }

    pub fn forward_eval(&self, x: &Tensor4) -> Tensor4 {
        let mut cur = self.stem.forward_eval(x);
        let mut skips = vec![cur.clone()];
        for l in 0..self.cfg.n_levels {
            cur = self.downs[l].forward_eval(&cur);
            if l + 1 < self.cfg.n_levels {
                skips.push(cur.clone());
            }
        }
        cur = self.mid.forward_eval(&cur);
        for (i, up) in self.ups.iter().enumerate() {
            let skip = &skips[self.cfg.n_levels - 1 - i];
            cur = up.forward_eval(&cur, skip);
        }
        let (net_out, _) = self.head.forward(&cur);
        if self.cfg.residual {
            &net_out + x
        } else {
            net_out
        }
    }

    /// Backpropagate `gy` (gradient wrt the output); returns the gradient
    /// wrt the input.
    pub fn backward(&mut self, cache: &UnetCache, gy: &Tensor4, accumulate: bool) -> Tensor4 {
        let mut g = self.head.backward(&cache.head, gy, accumulate);
        // Skip gradients surface in decoder order; collect and replay them
        // into the matching encoder stages.
        let mut skip_grads: Vec<Option<Tensor4>> = vec![None; cache.n_skip_grads];
        for (i, up) in self.ups.iter_mut().enumerate().rev() {
            let (gx, gskip) = up.backward(&cache.ups[i], &g, accumulate);
            let level = self.cfg.n_levels - 1 - i;
            skip_grads[level] = Some(gskip);
            g = gx;
        }
        g = self.mid.backward(&cache.mid, &g, accumulate);
        for l in (0..self.cfg.n_levels).rev() {
            if l + 1 < self.cfg.n_levels {
                if let Some(sg) = &skip_grads[l + 1] {
                    g = &g + sg;
                }
            }
            g = self.downs[l].backward(&cache.downs[l], &g, accumulate);
        }
        if let Some(sg) = &skip_grads[0] {
            g = &g + sg;
        }
        let gx = self.stem.backward(&cache.stem, &g, accumulate);
        if self.cfg.residual {
            &gx + gy
        } else {
            gx
        }
    }
}

impl Net for Unet {
    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.stem.params_mut();
        for d in &mut self.downs {
            p.extend(d.params_mut());
        }
        p.extend(self.mid.params_mut());
        for u in &mut self.ups {
            p.extend(u.params_mut());
        }
        p.extend(self.head.params_mut());
        p
    }
}

/// Named views of the batch-norm running statistics for checkpointing.
impl Unet {
    pub fn buffers_mut(&mut self) -> Vec<(String, &mut ndarray::Array1<f64>)> {
        let mut out: Vec<(String, &mut ndarray::Array1<f64>)> = Vec::new();
        macro_rules! push_bn {
            ($bn:expr, $name:expr) => {{
                let bn = $bn;
                out.push((format!("{}.running_mean", $name), &mut bn.running_mean));
                out.push((format!("{}.running_var", $name), &mut bn.running_var));
            }};
        }
        push_bn!(&mut self.stem.bn, "gen.stem.bn");
        for (l, d) in self.downs.iter_mut().enumerate() {
            push_bn!(&mut d.bn, format!("gen.down{l}.bn"));
        }
        push_bn!(&mut self.mid.bn, "gen.mid.bn");
        let n = self.ups.len();
        for (i, u) in self.ups.iter_mut().enumerate() {
            let l = n - 1 - i;
            push_bn!(&mut u.bn, format!("gen.up{l}.bn"));
            push_bn!(&mut u.fuse.bn, format!("gen.up{l}.fuse.bn"));
        }
        out
    }
}
