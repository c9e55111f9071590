//! Adam optimizer operating on [`Param`] buffers.

use serde::{Deserialize, Serialize};

use super::param::Param;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
}

impl Adam {
    pub fn new(lr: f64, betas: (f64, f64)) -> Self {
        Adam {
            lr,
            beta1: betas.0,
            beta2: betas.1,
            eps: 1e-8,
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [&mut Param]) {
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for p in params.iter_mut() {
            let (value, grad, m, v) = (&mut p.value, &p.grad, &mut p.m, &mut p.v);
            ndarray::Zip::from(value)
                .and(grad)
                .and(m)
                .and(v)
                .for_each(|w, &g, m, v| {
                    *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                    *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                    let mhat = *m / b1t;
                    let vhat = *v / b2t;
                    *w -= self.lr * mhat / (vhat.sqrt() + self.eps);
                });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::ArrayD;

    #[test]
    fn minimizes_quadratic() {
        // f(w) = 0.5 * ||w - target||^2, gradient w - target.
        let target = 3.5f64;
        let mut p = Param::new("w", ArrayD::zeros(ndarray::IxDyn(&[1])));
        let mut opt = Adam::new(0.05, (0.9, 0.999));
        for _ in 0..2000 {
            p.grad[[0]] = p.value[[0]] - target;
            opt.step(&mut [&mut p]);
        }
        assert!((p.value[[0]] - target).abs() < 1e-3);
    }
}
