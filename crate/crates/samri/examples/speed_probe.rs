use std::time::Instant;
use samri::experiment::{build_dataset, PhantomBase};
use samri::nn::loss::LossWeights;
use samri::nn::train::{train_epochs, TrainState};
use samri::nn::{DiscriminatorCfg, GeneratorCfg, TrainConfig};
use samri::sampling::{make_cartesian_library, SelectionMode};

fn main() {
    for (grid, base, levels, n_imgs) in [(64usize, 16usize, 3usize, 30usize), (128, 12, 3, 30), (128, 8, 3, 30)] {
        let base_cfg = PhantomBase { grid, n_coils: 4, ..Default::default() };
        let data = build_dataset(&base_cfg, 500, n_imgs).unwrap();
        let lib = make_cartesian_library(50, grid, 3.0, 0.05, 7).unwrap();
        let cfg = TrainConfig {
            mode: SelectionMode::Augmented,
            weights: LossWeights { loss1: 10.0, loss2: 10.0, gan: 0.0 },
            epochs: 1,
            batch: 3,
            seed: 1,
            gen: GeneratorCfg { n_levels: levels, base_channels: base, residual: true },
            disc: DiscriminatorCfg { n_layers: 3, base_channels: base },
            ..Default::default()
        };
        let mut state = TrainState::new(cfg).unwrap();
        let t0 = Instant::now();
        train_epochs(&mut state, &data, &lib, 1, None).unwrap();
        let dt = t0.elapsed().as_secs_f64();
        let iters = state.iteration as f64;
        println!(
            "grid {grid} base {base}: {:.2}s/epoch of {n_imgs} imgs ({:.3}s/iter) -> 150 imgs x 30 epochs ~ {:.1} min",
            dt, dt / iters, dt / n_imgs as f64 * 150.0 * 30.0 / 60.0
        );
    }
}
