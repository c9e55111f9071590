//! Central finite-difference gradient verification.
//!
//! The numeric side is a plain two-point stencil on a scalar loss closure
//! and shares no code with the analytic backward passes it checks. Relative
//! error uses `max(1, |a|, |b|)` in the denominator so near-zero gradients
//! are compared absolutely.

use super::param::Net;

pub const DEFAULT_STEP: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct GradReport {
    pub max_rel_err: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub n_checked: usize,
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Compare every parameter's analytic gradient (already stored in
/// `param.grad`) against central finite differences of `loss`.
pub fn check_param_gradients<N: Net>(
    net: &mut N,
    mut loss: impl FnMut(&mut N) -> f64,
    h: f64,
) -> GradReport {
    let n_params = net.params_mut().len();
    let mut report = GradReport {
        max_rel_err: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        n_checked: 0,
    };
    for pi in 0..n_params {
        let (name, len) = {
            let ps = net.params_mut();
            (ps[pi].name.clone(), ps[pi].len())
        };
        for ei in 0..len {
            let analytic = {
                let ps = net.params_mut();
                ps[pi].grad.as_slice().unwrap()[ei]
            };
            poke(net, pi, ei, h);
            let up = loss(net);
            poke(net, pi, ei, -2.0 * h);
            let down = loss(net);
            poke(net, pi, ei, h);
            let numeric = (up - down) / (2.0 * h);
            let rel = relative_error(analytic, numeric);
            report.n_checked += 1;
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst_param = name.clone();
                report.worst_index = ei;
            }
        }
    }
    report
}

fn poke<N: Net>(net: &mut N, pi: usize, ei: usize, delta: f64) {
    let mut ps = net.params_mut();
    ps[pi].value.as_slice_mut().unwrap()[ei] += delta;
}

/// Compare an analytic input-gradient tensor against finite differences of
/// a loss over the input.
pub fn check_input_gradient(
    input: &mut ndarray::Array4<f64>,
    analytic: &ndarray::Array4<f64>,
    mut loss: impl FnMut(&ndarray::Array4<f64>) -> f64,
    h: f64,
) -> GradReport {
    let mut report = GradReport {
        max_rel_err: 0.0,
        worst_param: "input".into(),
        worst_index: 0,
        n_checked: 0,
    };
    let len = input.len();
    for ei in 0..len {
        let a = analytic.as_slice().unwrap()[ei];
        input.as_slice_mut().unwrap()[ei] += h;
        let up = loss(input);
        input.as_slice_mut().unwrap()[ei] -= 2.0 * h;
        let down = loss(input);
        input.as_slice_mut().unwrap()[ei] += h;
        let numeric = (up - down) / (2.0 * h);
        let rel = relative_error(a, numeric);
        report.n_checked += 1;
        if rel > report.max_rel_err {
            report.max_rel_err = rel;
            report.worst_index = ei;
        }
    }
    report
}

/// Used by gradient tests to keep kinked losses (L1, ReLU) away from their
/// non-differentiable points: finite differences straddle the kink otherwise.
pub fn min_abs(t: &ndarray::Array4<f64>) -> f64 {
    t.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init::he_normal_init;
    use crate::nn::layers::{Conv2d, Tensor4};
    use crate::rng::{SeededStream, StreamKind};

    #[test]
    fn conv_gradients_match_finite_differences() {
        let mut s = SeededStream::new(11, StreamKind::Init);
        let mut conv = {
            let mut init = he_normal_init(&mut s);
            Conv2d::new("c", 2, 3, 3, 1, &mut init)
        };
        use rand::Rng;
        let x = Tensor4::from_shape_fn((2, 2, 6, 6), |_| s.rng.random::<f64>() - 0.5);
        // Smooth scalar loss: 0.5 * sum(y^2).
        let (y, cache) = conv.forward(&x);
        conv.zero_grads();
        let _ = conv.backward(&cache, &y, true);
        let report = check_param_gradients(
            &mut conv,
            |c| {
                let (y, _) = c.forward(&x);
                0.5 * y.iter().map(|v| v * v).sum::<f64>()
            },
            DEFAULT_STEP,
        );
        assert!(
            report.max_rel_err < 1e-6,
            "worst {} [{}]: {}",
            report.worst_param,
            report.worst_index,
            report.max_rel_err
        );
    }
}
