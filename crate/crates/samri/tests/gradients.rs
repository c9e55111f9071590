//! Finite-difference verification of every backward pass: individual layers,
//! the full generator objective (pixel + cyclic + adversarial terms), and
//! the discriminator loss. Training tests elsewhere rely on these gates.

use ndarray::Array4;
use samri::encoding::EncodingContext;
use samri::nn::gradcheck::{check_input_gradient, check_param_gradients, min_abs, DEFAULT_STEP};
use samri::nn::init::he_normal_init;
use samri::nn::layers::{BatchNorm2d, Conv2d, ConvTranspose2d, Tensor4};
use samri::nn::loss::{apply_phi, bce_with_logits, images_to_channels, l1_loss};
use samri::nn::param::Net;
use samri::nn::patchgan::{DiscriminatorCfg, PatchGan};
use samri::nn::unet::{GeneratorCfg, Unet};
use samri::phantom::{generate_phantom, PhantomSpec};
use samri::rng::{SeededStream, StreamKind};
use samri::sampling::make_cartesian_library;

const TOL: f64 = 1e-4;

fn random_tensor(shape: (usize, usize, usize, usize), seed: u64) -> Tensor4 {
    use rand::Rng;
    let mut s = SeededStream::new(seed, StreamKind::Init);
    Array4::from_shape_fn(shape, |_| s.rng.random::<f64>() - 0.5)
}

/// Smooth scalar readout so layer checks avoid kink issues entirely.
fn quad_loss(y: &Tensor4) -> f64 {
    0.5 * y.iter().map(|v| v * v).sum::<f64>()
}

/// +-amp checkerboard; subtracting it from an L1 target pushes every
/// residual away from the non-differentiable point while keeping a mixed
/// sign pattern.
fn checkerboard(shape: (usize, usize, usize, usize), amp: f64) -> Tensor4 {
    Array4::from_shape_fn(shape, |(b, c, i, j)| {
        if (b + c + i + j) % 2 == 0 {
            amp
        } else {
            -amp
        }
    })
}

#[test]
fn conv2d_param_and_input_gradients() {
    for stride in [1usize, 2] {
        let mut s = SeededStream::new(100 + stride as u64, StreamKind::Init);
        let mut conv = {
            let mut init = he_normal_init(&mut s);
            Conv2d::new("c", 3, 4, 3, stride, &mut init)
        };
        let x = random_tensor((2, 3, 8, 8), 7);
        let (y, cache) = conv.forward(&x);
        conv.zero_grads();
        let gx = conv.backward(&cache, &y, true);

        let report = check_param_gradients(
            &mut conv,
            |c| {
                let (y, _) = c.forward(&x);
                quad_loss(&y)
            },
            DEFAULT_STEP,
        );
        assert!(report.max_rel_err < TOL, "stride {stride}: {report:?}");

        let mut x_var = x.clone();
        let report = check_input_gradient(
            &mut x_var,
            &gx,
            |xv| {
                let (y, _) = conv.forward(xv);
                quad_loss(&y)
            },
            DEFAULT_STEP,
        );
        assert!(report.max_rel_err < TOL, "input stride {stride}: {report:?}");
    }
}

#[test]
fn conv_transpose_param_and_input_gradients() {
    let mut s = SeededStream::new(200, StreamKind::Init);
    let mut up = {
        let mut init = he_normal_init(&mut s);
        ConvTranspose2d::upsampler("u", 3, 2, &mut init)
    };
    let x = random_tensor((2, 3, 5, 5), 8);
    let (y, cache) = up.forward(&x);
    up.zero_grads();
    let gx = up.backward(&cache, &y, true);

    let report = check_param_gradients(
        &mut up,
        |u| {
            let (y, _) = u.forward(&x);
            quad_loss(&y)
        },
        DEFAULT_STEP,
    );
    assert!(report.max_rel_err < TOL, "{report:?}");

    let mut x_var = x.clone();
    let report = check_input_gradient(
        &mut x_var,
        &gx,
        |xv| {
            let (y, _) = up.forward(xv);
            quad_loss(&y)
        },
        DEFAULT_STEP,
    );
    assert!(report.max_rel_err < TOL, "input: {report:?}");
}

#[test]
fn batchnorm_param_and_input_gradients() {
    let mut bn = BatchNorm2d::new("bn", 3);
    // Non-trivial scale/shift so the gradients exercise both parameters.
    bn.gamma.value[[0]] = 1.3;
    bn.gamma.value[[1]] = 0.7;
    bn.beta.value[[2]] = -0.4;
    let x = random_tensor((3, 3, 6, 6), 9).mapv(|v| 2.0 * v + 0.3);
    let (y, cache) = bn.forward_train(&x);
    bn.zero_grads();
    let gx = bn.backward(&cache, &y, true);

    let report = check_param_gradients(
        &mut bn,
        |b| {
            let (y, _) = b.forward_train(&x);
            quad_loss(&y)
        },
        DEFAULT_STEP,
    );
    assert!(report.max_rel_err < TOL, "{report:?}");

    let mut x_var = x.clone();
    let report = check_input_gradient(
        &mut x_var,
        &gx,
        |xv| {
            let (y, _) = bn.forward_train(xv);
            quad_loss(&y)
        },
        DEFAULT_STEP,
    );
    assert!(report.max_rel_err < TOL, "input: {report:?}");
}

#[test]
fn l1_loss_input_gradient() {
    let pred = random_tensor((1, 2, 8, 8), 11);
    // Keep residuals clear of the |.| kink relative to the probe step.
    let target = &pred - &checkerboard((1, 2, 8, 8), 0.5) - &random_tensor((1, 2, 8, 8), 12).mapv(|v| 0.3 * v);
    let resid = &pred - &target;
    assert!(min_abs(&resid) > 10.0 * DEFAULT_STEP, "bad seed for kink guard");
    let (_, grad) = l1_loss(&pred, &target);
    let mut pred_var = pred.clone();
    let report = check_input_gradient(
        &mut pred_var,
        &grad,
        |p| l1_loss(p, &target).0,
        DEFAULT_STEP,
    );
    assert!(report.max_rel_err < TOL, "{report:?}");
}

#[test]
fn bce_with_logits_input_gradient() {
    let logits = random_tensor((1, 1, 6, 6), 13).mapv(|v| 3.0 * v);
    for target in [0.0, 1.0] {
        let (_, grad) = bce_with_logits(&logits, target);
        let mut z = logits.clone();
        let report = check_input_gradient(
            &mut z,
            &grad,
            |zv| bce_with_logits(zv, target).0,
            DEFAULT_STEP,
        );
        assert!(report.max_rel_err < TOL, "target {target}: {report:?}");
    }
}

#[test]
fn cyclic_loss_gradient_through_undersampling_operator() {
    let p = generate_phantom(&PhantomSpec {
        seed: 31,
        grid: 16,
        n_coils: 2,
        ..Default::default()
    })
    .unwrap();
    let lib = make_cartesian_library(1, 16, 2.0, 0.1, 4).unwrap();
    let ctx = EncodingContext::new(&p.sens, lib.entries[0].clone()).unwrap();
    let ctxs = vec![ctx];

    let xu_img = ctxs[0].undersample_image(&p.reference).unwrap();
    // Shift the target so |Phi(fake) - target| stays clear of the kink.
    let xu = &images_to_channels(&[&xu_img.data]) - &checkerboard((1, 2, 16, 16), 0.6);
    let fake = random_tensor((1, 2, 16, 16), 14);

    let phi_f = apply_phi(&ctxs, &fake).unwrap();
    let resid = &phi_f - &xu;
    assert!(min_abs(&resid) > 10.0 * DEFAULT_STEP, "bad seed for kink guard");

    let (_, g_resid) = l1_loss(&phi_f, &xu);
    let analytic = apply_phi(&ctxs, &g_resid).unwrap();

    let mut fake_var = fake.clone();
    let report = check_input_gradient(
        &mut fake_var,
        &analytic,
        |f| {
            let phi = apply_phi(&ctxs, f).unwrap();
            l1_loss(&phi, &xu).0
        },
        DEFAULT_STEP,
    );
    assert!(report.max_rel_err < TOL, "{report:?}");
}

/// The full gate: every generator parameter against the complete objective
/// (pixel + cyclic + non-saturating adversarial term), and every
/// discriminator parameter against the two-sided classification loss, on
/// 16x16 inputs.
#[test]
fn generator_full_objective_every_parameter() {
    let (l1w, l2w, gw) = (10.0, 10.0, 0.1);
    let p = generate_phantom(&PhantomSpec {
        seed: 32,
        grid: 16,
        n_coils: 2,
        ..Default::default()
    })
    .unwrap();
    let lib = make_cartesian_library(1, 16, 2.0, 0.1, 5).unwrap();
    let ctx = EncodingContext::new(&p.sens, lib.entries[0].clone()).unwrap();
    let ctxs = vec![ctx];
    // Checkerboard shifts keep both L1 residuals away from their kinks
    // without changing the gradient paths being verified.
    let x = &images_to_channels(&[&p.reference.data]) - &checkerboard((1, 2, 16, 16), 0.6);
    let xu_img = ctxs[0].undersample_image(&p.reference).unwrap();
    let xu_in = images_to_channels(&[&xu_img.data]);
    let xu = &xu_in - &checkerboard((1, 2, 16, 16), 0.55);

    let mut init = SeededStream::new(77, StreamKind::Init);
    let mut gen = Unet::new(
        GeneratorCfg {
            n_levels: 2,
            base_channels: 4,
            residual: true,
        },
        &mut init,
    );
    // Zero head means zero pixel residuals at the L1 kink; nudge all
    // parameters so every loss term is active and away from kinks.
    {
        use rand::Rng;
        let mut noise = SeededStream::new(78, StreamKind::Init);
        for p in gen.params_mut() {
            p.value.mapv_inplace(|v| v + 0.05 * (noise.rng.random::<f64>() - 0.5));
        }
    }
    let mut disc = PatchGan::new(
        DiscriminatorCfg {
            n_layers: 2,
            base_channels: 4,
        },
        &mut init,
    );

    // Kink guards for both L1 terms at the evaluation point.
    {
        let (fake, _) = gen.forward_train(&xu_in);
        let r1 = &fake - &x;
        let phi_f = apply_phi(&ctxs, &fake).unwrap();
        let r2 = &phi_f - &xu;
        assert!(min_abs(&r1) > 10.0 * DEFAULT_STEP, "loss1 kink too close");
        assert!(min_abs(&r2) > 10.0 * DEFAULT_STEP, "loss2 kink too close");
    }

    // Analytic gradient, mirroring the training step.
    gen.zero_grads();
    let (fake, cache) = gen.forward_train(&xu_in);
    let (_, g1) = l1_loss(&fake, &x);
    let phi_f = apply_phi(&ctxs, &fake).unwrap();
    let (_, gr) = l1_loss(&phi_f, &xu);
    let g2 = apply_phi(&ctxs, &gr).unwrap();
    let (fake_logits, d_cache) = disc.forward_train(&fake);
    let (_, gz) = bce_with_logits(&fake_logits, 1.0);
    let g3 = disc.backward(&d_cache, &gz, false);
    let mut g_fake = Tensor4::zeros(fake.raw_dim());
    ndarray::Zip::from(&mut g_fake)
        .and(&g1)
        .and(&g2)
        .and(&g3)
        .for_each(|g, &a, &b, &c| *g = l1w * a + l2w * b + gw * c);
    let _ = gen.backward(&cache, &g_fake, true);

    let report = check_param_gradients(
        &mut gen,
        |g| {
            let (fake, _) = g.forward_train(&xu_in);
            let (l1, _) = l1_loss(&fake, &x);
            let phi_f = apply_phi(&ctxs, &fake).unwrap();
            let (l2, _) = l1_loss(&phi_f, &xu);
            let (logits, _) = disc.forward_train(&fake);
            let (lg, _) = bce_with_logits(&logits, 1.0);
            l1w * l1 + l2w * l2 + gw * lg
        },
        DEFAULT_STEP,
    );
    eprintln!(
        "generator gate: {} params, max rel err {:.3e} ({} [{}])",
        report.n_checked, report.max_rel_err, report.worst_param, report.worst_index
    );
    assert!(report.max_rel_err < TOL, "{report:?}");
}

#[test]
fn discriminator_loss_every_parameter() {
    let real = random_tensor((2, 2, 16, 16), 15);
    let fake = random_tensor((2, 2, 16, 16), 16);

    let mut init = SeededStream::new(79, StreamKind::Init);
    let mut disc = PatchGan::new(
        DiscriminatorCfg {
            n_layers: 2,
            base_channels: 4,
        },
        &mut init,
    );

    disc.zero_grads();
    let (rl, rc) = disc.forward_train(&real);
    let (_, gr) = bce_with_logits(&rl, 1.0);
    let _ = disc.backward(&rc, &gr, true);
    let (fl, fc) = disc.forward_train(&fake);
    let (_, gf) = bce_with_logits(&fl, 0.0);
    let _ = disc.backward(&fc, &gf, true);

    let report = check_param_gradients(
        &mut disc,
        |d| {
            let (rl, _) = d.forward_train(&real);
            let (lr, _) = bce_with_logits(&rl, 1.0);
            let (fl, _) = d.forward_train(&fake);
            let (lf, _) = bce_with_logits(&fl, 0.0);
            lr + lf
        },
        DEFAULT_STEP,
    );
    eprintln!(
        "discriminator gate: {} params, max rel err {:.3e} ({})",
        report.n_checked, report.max_rel_err, report.worst_param
    );
    assert!(report.max_rel_err < TOL, "{report:?}");
}

/// With the adversarial weight at zero, the generator gradient must equal
/// the weighted sum of the two pixel-loss gradients exactly.
#[test]
fn zero_gan_weight_gradient_equals_pixel_objective() {
    let p = generate_phantom(&PhantomSpec {
        seed: 33,
        grid: 16,
        n_coils: 2,
        ..Default::default()
    })
    .unwrap();
    let lib = make_cartesian_library(1, 16, 2.0, 0.1, 6).unwrap();
    let ctx = EncodingContext::new(&p.sens, lib.entries[0].clone()).unwrap();
    let ctxs = vec![ctx];
    let x = images_to_channels(&[&p.reference.data]);
    let xu_img = ctxs[0].undersample_image(&p.reference).unwrap();
    let xu = images_to_channels(&[&xu_img.data]);

    let mut init = SeededStream::new(80, StreamKind::Init);
    let mut gen = Unet::new(
        GeneratorCfg {
            n_levels: 2,
            base_channels: 4,
            residual: true,
        },
        &mut init,
    );
    {
        use rand::Rng;
        let mut noise = SeededStream::new(81, StreamKind::Init);
        for p in gen.params_mut() {
            p.value.mapv_inplace(|v| v + 0.03 * (noise.rng.random::<f64>() - 0.5));
        }
    }

    // Route A: combined gradient with gan weight 0.
    gen.zero_grads();
    let (fake, cache) = gen.forward_train(&xu);
    let (_, g1) = l1_loss(&fake, &x);
    let phi_f = apply_phi(&ctxs, &fake).unwrap();
    let (_, gr) = l1_loss(&phi_f, &xu);
    let g2 = apply_phi(&ctxs, &gr).unwrap();
    let mut g_fake = Tensor4::zeros(fake.raw_dim());
    ndarray::Zip::from(&mut g_fake)
        .and(&g1)
        .and(&g2)
        .for_each(|g, &a, &b| *g = 10.0 * a + 10.0 * b + 0.0);
    let _ = gen.backward(&cache, &g_fake, true);
    let combined: Vec<f64> = gen
        .params_mut()
        .iter()
        .flat_map(|p| p.grad.iter().copied().collect::<Vec<_>>())
        .collect();

    // Route B: separate backward passes per term, manually weighted.
    gen.zero_grads();
    let (fake_b, cache_b) = gen.forward_train(&xu);
    let (_, g1b) = l1_loss(&fake_b, &x);
    let _ = gen.backward(&cache_b, &g1b.mapv(|v| 10.0 * v), true);
    let (fake_c, cache_c) = gen.forward_train(&xu);
    let phi_fc = apply_phi(&ctxs, &fake_c).unwrap();
    let (_, grc) = l1_loss(&phi_fc, &xu);
    let g2c = apply_phi(&ctxs, &grc).unwrap();
    let _ = gen.backward(&cache_c, &g2c.mapv(|v| 10.0 * v), true);
    let separate: Vec<f64> = gen
        .params_mut()
        .iter()
        .flat_map(|p| p.grad.iter().copied().collect::<Vec<_>>())
        .collect();

    let mut max_diff = 0.0f64;
    for (a, b) in combined.iter().zip(separate.iter()) {
        max_diff = max_diff.max((a - b).abs());
    }
    assert!(max_diff < 1e-12, "max gradient component diff {max_diff}");
}
