//! Minimal CNN stack: layers with hand-derived backward passes, the
//! residual encoder-decoder generator, the patch discriminator, losses,
//! Adam, the alternating training loop, checkpoints, and a
//! finite-difference gradient checker.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod init;
pub mod layers;
pub mod loss;
pub mod param;
pub mod patchgan;
pub mod train;
pub mod unet;

pub use layers::Tensor4;
pub use loss::{LossValues, LossWeights};
pub use param::{Net, Param};
pub use patchgan::{DiscriminatorCfg, PatchGan};
pub use train::{infer, train, train_epochs, TrainConfig, TrainSample, TrainState};
pub use unet::{GeneratorCfg, Unet};
