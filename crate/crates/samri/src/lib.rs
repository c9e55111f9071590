//! Accelerated-MRI reconstruction sandbox.
//!
//! Builds synthetic multi-coil k-space data, Cartesian and golden-angle
//! radial undersampling pattern libraries, a wavelet-regularized
//! compressed-sensing baseline, and a CNN reconstruction trained either with
//! a fixed undersampling pattern or with a fresh pattern per image per
//! iteration (sampling augmentation). An evaluation harness compares the
//! methods on seen and unseen patterns.

pub mod container;
pub mod cs;
pub mod encoding;
pub mod error;
pub mod experiment;
pub mod fft;
pub mod image;
pub mod linalg;
pub mod metrics;
pub mod nn;
pub mod nufft;
pub mod phantom;
pub mod report;
pub mod rng;
pub mod sampling;
pub mod sens;
pub mod testutil;
pub mod wavelet;

pub use error::{Error, Result};
