//! Weight initialization: variance-scaled normal draws from a dedicated
//! seeded stream, so identical seeds give identical networks.

use ndarray::ArrayD;
use rand_distr::{Distribution, StandardNormal};

use crate::rng::SeededStream;

/// He/variance-scaling initializer: `N(0, sqrt(2 / fan_in))`.
pub fn he_normal_init(
    stream: &mut SeededStream,
) -> impl FnMut(usize, &[usize]) -> ArrayD<f64> + '_ {
    move |fan_in: usize, shape: &[usize]| {
        let std = (2.0 / fan_in as f64).sqrt();
        let n: usize = shape.iter().product();
        let vals: Vec<f64> = (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut stream.rng);
                z * std
            })
            .collect();
        ArrayD::from_shape_vec(ndarray::IxDyn(shape), vals).unwrap()
    }
}

/// All-zeros initializer (used for the generator head so training starts
/// from the identity map).
pub fn zero_init() -> impl FnMut(usize, &[usize]) -> ArrayD<f64> {
    |_fan_in: usize, shape: &[usize]| ArrayD::zeros(ndarray::IxDyn(shape))
}
