//! CNN building blocks with explicit forward/backward passes.
//!
//! Tensors are `[batch, channel, height, width]` in f64. Convolutions go
//! through im2col and a GEMM; the transposed convolution is the exact
//! adjoint mapping (col2im of the weight-transformed input). Every backward
//! here is verified against central finite differences in the gradient
//! tests.

use ndarray::{Array1, Array2, Array4, ArrayView2, ArrayViewMut2};

use super::param::{Net, Param};

pub type Tensor4 = Array4<f64>;

fn conv_out(size: usize, k: usize, stride: usize, pad: usize) -> usize {
    (size + 2 * pad - k) / stride + 1
}

fn deconv_out(size: usize, k: usize, stride: usize, pad: usize, out_pad: usize) -> usize {
    (size - 1) * stride + k + out_pad - 2 * pad
}

/// Gather sliding windows: `[C*k*k, B*ho*wo]`, zero padding outside.
fn im2col(
    x: &Tensor4,
    k: usize,
    stride: usize,
    pad: usize,
    ho: usize,
    wo: usize,
) -> Array2<f64> {
    let (bs, c, h, w) = x.dim();
    let mut cols = Array2::<f64>::zeros((c * k * k, bs * ho * wo));
    let x_std = x.as_standard_layout();
    let xs = x_std.as_slice().unwrap();
    let col_w = bs * ho * wo;
    let cs = cols.as_slice_mut().unwrap();
    for ci in 0..c {
        for di in 0..k {
            for dj in 0..k {
                let row_base = ((ci * k + di) * k + dj) * col_w;
                for b in 0..bs {
                    for oi in 0..ho {
                        let ii = (oi * stride + di) as isize - pad as isize;
                        if ii < 0 || ii >= h as isize {
                            continue;
                        }
                        let x_base = ((b * c + ci) * h + ii as usize) * w;
                        let c_base = row_base + (b * ho + oi) * wo;
                        for oj in 0..wo {
                            let jj = (oj * stride + dj) as isize - pad as isize;
                            if jj < 0 || jj >= w as isize {
                                continue;
                            }
                            cs[c_base + oj] = xs[x_base + jj as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Scatter-add of [`im2col`] columns back onto an image tensor.
fn col2im(
    cols: &Array2<f64>,
    shape: (usize, usize, usize, usize),
    k: usize,
    stride: usize,
    pad: usize,
    ho: usize,
    wo: usize,
) -> Tensor4 {
    let (bs, c, h, w) = shape;
    let mut x = Tensor4::zeros(shape);
    let xs = x.as_slice_mut().unwrap();
    let col_w = bs * ho * wo;
    let cs = cols.as_slice().unwrap();
    for ci in 0..c {
        for di in 0..k {
            for dj in 0..k {
                let row_base = ((ci * k + di) * k + dj) * col_w;
                for b in 0..bs {
                    for oi in 0..ho {
                        let ii = (oi * stride + di) as isize - pad as isize;
                        if ii < 0 || ii >= h as isize {
                            continue;
                        }
                        let x_base = ((b * c + ci) * h + ii as usize) * w;
                        let c_base = row_base + (b * ho + oi) * wo;
                        for oj in 0..wo {
                            let jj = (oj * stride + dj) as isize - pad as isize;
                            if jj < 0 || jj >= w as isize {
                                continue;
                            }
                            xs[x_base + jj as usize] += cs[c_base + oj];
                        }
                    }
                }
            }
        }
    }
    x
}

fn as_mat<'a>(p: &'a Param, rows: usize, cols: usize) -> ArrayView2<'a, f64> {
    ArrayView2::from_shape((rows, cols), p.value.as_slice().unwrap()).unwrap()
}

fn grad_mat<'a>(p: &'a mut Param, rows: usize, cols: usize) -> ArrayViewMut2<'a, f64> {
    ArrayViewMut2::from_shape((rows, cols), p.grad.as_slice_mut().unwrap()).unwrap()
}

/// Pack `[B, C, ho, wo]` into a `[C, B*ho*wo]` matrix.
fn tensor_to_mat(t: &Tensor4) -> Array2<f64> {
    let (bs, c, h, w) = t.dim();
    let mut m = Array2::<f64>::zeros((c, bs * h * w));
    let t_std = t.as_standard_layout();
    let ts = t_std.as_slice().unwrap();
    let ms = m.as_slice_mut().unwrap();
    for b in 0..bs {
        for ci in 0..c {
            let src = ((b * c + ci) * h) * w;
            let dst = ci * (bs * h * w) + (b * h) * w;
            ms[dst..dst + h * w].copy_from_slice(&ts[src..src + h * w]);
        }
    }
    m
}

fn mat_to_tensor(m: &Array2<f64>, bs: usize, c: usize, h: usize, w: usize) -> Tensor4 {
    let mut t = Tensor4::zeros((bs, c, h, w));
    let ms = m.as_slice().unwrap();
    let ts = t.as_slice_mut().unwrap();
    for b in 0..bs {
        for ci in 0..c {
            let dst = ((b * c + ci) * h) * w;
            let src = ci * (bs * h * w) + (b * h) * w;
            ts[dst..dst + h * w].copy_from_slice(&ms[src..src + h * w]);
        }
    }
    t
}

// ---------------------------------------------------------------------------
// Conv2d

#[derive(Debug, Clone)]
pub struct Conv2d {
    pub w: Param,
    pub b: Param,
    pub in_ch: usize,
    pub out_ch: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
}

pub struct ConvCache {
    x: Tensor4,
    ho: usize,
    wo: usize,
}

impl Conv2d {
    pub fn new(
        name: &str,
        in_ch: usize,
        out_ch: usize,
        k: usize,
        stride: usize,
        init: &mut dyn FnMut(usize, &[usize]) -> ndarray::ArrayD<f64>,
    ) -> Self {
        let fan_in = in_ch * k * k;
        Conv2d {
            w: Param::new(format!("{name}.w"), init(fan_in, &[out_ch, in_ch, k, k])),
            b: Param::new(
                format!("{name}.b"),
                ndarray::ArrayD::zeros(ndarray::IxDyn(&[out_ch])),
            ),
            in_ch,
            out_ch,
            k,
            stride,
            pad: k / 2,
        }
    }

    pub fn forward(&self, x: &Tensor4) -> (Tensor4, ConvCache) {
        let (bs, c, h, w) = x.dim();
        debug_assert_eq!(c, self.in_ch);
        let ho = conv_out(h, self.k, self.stride, self.pad);
        let wo = conv_out(w, self.k, self.stride, self.pad);
        let cols = im2col(x, self.k, self.stride, self.pad, ho, wo);
        let w_mat = as_mat(&self.w, self.out_ch, self.in_ch * self.k * self.k);
        let mut y_mat = w_mat.dot(&cols);
        for (co, mut row) in y_mat.rows_mut().into_iter().enumerate() {
            let bias = self.b.value[[co]];
            row.mapv_inplace(|v| v + bias);
        }
        let y = mat_to_tensor(&y_mat, bs, self.out_ch, ho, wo);
        (
            y,
            ConvCache {
                x: x.clone(),
                ho,
                wo,
            },
        )
    }

    /// Returns the input gradient; accumulates parameter gradients unless
    /// `accumulate` is false (used when a discriminator is only a conduit
    /// for generator gradients).
    pub fn backward(&mut self, cache: &ConvCache, gy: &Tensor4, accumulate: bool) -> Tensor4 {
        let (bs, _c, h, w) = cache.x.dim();
        let gy_mat = tensor_to_mat(gy);
        if accumulate {
            let cols = im2col(&cache.x, self.k, self.stride, self.pad, cache.ho, cache.wo);
            let gw = gy_mat.dot(&cols.t());
            let ckk = self.in_ch * self.k * self.k;
            let mut gwv = grad_mat(&mut self.w, self.out_ch, ckk);
            gwv += &gw;
            for co in 0..self.out_ch {
                self.b.grad[[co]] += gy_mat.row(co).sum();
            }
        }
        let w_mat = as_mat(&self.w, self.out_ch, self.in_ch * self.k * self.k);
        let gcols = w_mat.t().dot(&gy_mat);
        col2im(
            &gcols,
            (bs, self.in_ch, h, w),
            self.k,
            self.stride,
            self.pad,
            cache.ho,
            cache.wo,
        )
    }
}

impl Net for Conv2d {
    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.w, &mut self.b]
    }
}

// ---------------------------------------------------------------------------
// ConvTranspose2d

#[derive(Debug, Clone)]
pub struct ConvTranspose2d {
    /// Weight layout `[in, out, k, k]`.
    pub w: Param,
    pub b: Param,
    pub in_ch: usize,
    pub out_ch: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_pad: usize,
}

pub struct DeconvCache {
    x: Tensor4,
    oh: usize,
    ow: usize,
}

impl ConvTranspose2d {
    /// Exact 2x upsampler: kernel 3, stride 2, padding 1, output padding 1.
    pub fn upsampler(
        name: &str,
        in_ch: usize,
        out_ch: usize,
        init: &mut dyn FnMut(usize, &[usize]) -> ndarray::ArrayD<f64>,
    ) -> Self {
        let k = 3;
        let fan_in = in_ch * k * k;
        ConvTranspose2d {
            w: Param::new(format!("{name}.w"), init(fan_in, &[in_ch, out_ch, k, k])),
            b: Param::new(
                format!("{name}.b"),
                ndarray::ArrayD::zeros(ndarray::IxDyn(&[out_ch])),
            ),
            in_ch,
            out_ch,
            k,
            stride: 2,
            pad: 1,
            out_pad: 1,
        }
    }

    pub fn forward(&self, x: &Tensor4) -> (Tensor4, DeconvCache) {
        let (bs, c, h, w) = x.dim();
        debug_assert_eq!(c, self.in_ch);
        let oh = deconv_out(h, self.k, self.stride, self.pad, self.out_pad);
        let ow = deconv_out(w, self.k, self.stride, self.pad, self.out_pad);
        let x_mat = tensor_to_mat(x);
        let w_mat = as_mat(&self.w, self.in_ch, self.out_ch * self.k * self.k);
        let cols = w_mat.t().dot(&x_mat);
        let mut y = col2im(
            &cols,
            (bs, self.out_ch, oh, ow),
            self.k,
            self.stride,
            self.pad,
            h,
            w,
        );
        for b in 0..bs {
            for co in 0..self.out_ch {
                let bias = self.b.value[[co]];
                y.index_axis_mut(ndarray::Axis(0), b)
                    .index_axis_mut(ndarray::Axis(0), co)
                    .mapv_inplace(|v| v + bias);
            }
        }
        (y, DeconvCache { x: x.clone(), oh, ow })
    }

    pub fn backward(&mut self, cache: &DeconvCache, gy: &Tensor4, accumulate: bool) -> Tensor4 {
        let (bs, _c, h, w) = cache.x.dim();
        debug_assert_eq!(gy.dim().2, cache.oh);
        debug_assert_eq!(gy.dim().3, cache.ow);
        let gcols = im2col(gy, self.k, self.stride, self.pad, h, w);
        if accumulate {
            let x_mat = tensor_to_mat(&cache.x);
            let gw = x_mat.dot(&gcols.t());
            let okk = self.out_ch * self.k * self.k;
            let mut gwv = grad_mat(&mut self.w, self.in_ch, okk);
            gwv += &gw;
            for co in 0..self.out_ch {
                let mut acc = 0.0;
                for b in 0..bs {
                    acc += gy
                        .index_axis(ndarray::Axis(0), b)
                        .index_axis(ndarray::Axis(0), co)
                        .sum();
                }
                self.b.grad[[co]] += acc;
            }
        }
        let w_mat = as_mat(&self.w, self.in_ch, self.out_ch * self.k * self.k);
        let gx_mat = w_mat.dot(&gcols);
        mat_to_tensor(&gx_mat, bs, self.in_ch, h, w)
    }
}

impl Net for ConvTranspose2d {
    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.w, &mut self.b]
    }
}

// ---------------------------------------------------------------------------
// BatchNorm2d

#[derive(Debug, Clone)]
pub struct BatchNorm2d {
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
    pub momentum: f64,
    pub eps: f64,
    pub ch: usize,
}

pub struct BnCache {
    xhat: Tensor4,
    invstd: Array1<f64>,
}

impl BatchNorm2d {
    pub fn new(name: &str, ch: usize) -> Self {
        BatchNorm2d {
            gamma: Param::new(
                format!("{name}.gamma"),
                ndarray::ArrayD::from_elem(ndarray::IxDyn(&[ch]), 1.0),
            ),
            beta: Param::new(
                format!("{name}.beta"),
                ndarray::ArrayD::zeros(ndarray::IxDyn(&[ch])),
            ),
            running_mean: Array1::zeros(ch),
            running_var: Array1::from_elem(ch, 1.0),
            momentum: 0.1,
            eps: 1e-5,
            ch,
        }
    }

    /// Batch-statistics forward; updates running averages.
    pub fn forward_train(&mut self, x: &Tensor4) -> (Tensor4, BnCache) {
        let (bs, c, h, w) = x.dim();
        let n = (bs * h * w) as f64;
        let mut y = Tensor4::zeros(x.raw_dim());
        let mut xhat = Tensor4::zeros(x.raw_dim());
        let mut invstd = Array1::zeros(c);
        for ci in 0..c {
            let mut mean = 0.0;
            for b in 0..bs {
                mean += x.index_axis(ndarray::Axis(0), b).index_axis(ndarray::Axis(0), ci).sum();
            }
            mean /= n;
            let mut var = 0.0;
            for b in 0..bs {
                for i in 0..h {
                    for j in 0..w {
                        let d = x[[b, ci, i, j]] - mean;
                        var += d * d;
                    }
                }
            }
            var /= n;
            let istd = 1.0 / (var + self.eps).sqrt();
            invstd[ci] = istd;
            let g = self.gamma.value[[ci]];
            let be = self.beta.value[[ci]];
            for b in 0..bs {
                for i in 0..h {
                    for j in 0..w {
                        let xh = (x[[b, ci, i, j]] - mean) * istd;
                        xhat[[b, ci, i, j]] = xh;
                        y[[b, ci, i, j]] = g * xh + be;
                    }
                }
            }
            self.running_mean[ci] = (1.0 - self.momentum) * self.running_mean[ci]
                + self.momentum * mean;
            let unbiased = if n > 1.0 { var * n / (n - 1.0) } else { var };
            self.running_var[ci] =
                (1.0 - self.momentum) * self.running_var[ci] + self.momentum * unbiased;
        }
        (y, BnCache { xhat, invstd })
    }

    /// Running-statistics forward for inference.
    pub fn forward_eval(&self, x: &Tensor4) -> Tensor4 {
        let (_bs, c, _h, _w) = x.dim();
        let mut y = x.clone();
        for ci in 0..c {
            let istd = 1.0 / (self.running_var[ci] + self.eps).sqrt();
            let mean = self.running_mean[ci];
            let g = self.gamma.value[[ci]];
            let be = self.beta.value[[ci]];
            y.index_axis_mut(ndarray::Axis(1), ci)
                .mapv_inplace(|v| g * (v - mean) * istd + be);
        }
        y
    }

    pub fn backward(&mut self, cache: &BnCache, gy: &Tensor4, accumulate: bool) -> Tensor4 {
        let (bs, c, h, w) = gy.dim();
        let n = (bs * h * w) as f64;
        let mut gx = Tensor4::zeros(gy.raw_dim());
        for ci in 0..c {
            let mut sum_gy = 0.0;
            let mut sum_gy_xhat = 0.0;
            for b in 0..bs {
                for i in 0..h {
                    for j in 0..w {
                        let g = gy[[b, ci, i, j]];
                        sum_gy += g;
                        sum_gy_xhat += g * cache.xhat[[b, ci, i, j]];
                    }
                }
            }
            if accumulate {
                self.gamma.grad[[ci]] += sum_gy_xhat;
                self.beta.grad[[ci]] += sum_gy;
            }
            let scale = self.gamma.value[[ci]] * cache.invstd[ci];
            for b in 0..bs {
                for i in 0..h {
                    for j in 0..w {
                        let g = gy[[b, ci, i, j]];
                        let xh = cache.xhat[[b, ci, i, j]];
                        gx[[b, ci, i, j]] =
                            scale * (g - sum_gy / n - xh * sum_gy_xhat / n);
                    }
                }
            }
        }
        gx
    }
}

impl Net for BatchNorm2d {
    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.gamma, &mut self.beta]
    }
}

// ---------------------------------------------------------------------------
// Activations

pub struct ActCache {
    x: Tensor4,
}

pub fn relu_forward(x: &Tensor4) -> (Tensor4, ActCache) {
    (x.mapv(|v| v.max(0.0)), ActCache { x: x.clone() })
}

pub fn relu_backward(cache: &ActCache, gy: &Tensor4) -> Tensor4 {
    let mut gx = gy.clone();
    ndarray::Zip::from(&mut gx).and(&cache.x).for_each(|g, &x| {
        if x <= 0.0 {
            *g = 0.0;
        }
    });
    gx
}

pub const LEAKY_SLOPE: f64 = 0.2;

pub fn leaky_relu_forward(x: &Tensor4) -> (Tensor4, ActCache) {
    (
        x.mapv(|v| if v > 0.0 { v } else { LEAKY_SLOPE * v }),
        ActCache { x: x.clone() },
    )
}

pub fn leaky_relu_backward(cache: &ActCache, gy: &Tensor4) -> Tensor4 {
    let mut gx = gy.clone();
    ndarray::Zip::from(&mut gx).and(&cache.x).for_each(|g, &x| {
        if x <= 0.0 {
            *g *= LEAKY_SLOPE;
        }
    });
    gx
}
