//! Soft octave convolution GAN toolkit: a small reverse-mode autodiff engine,
//! octave/soft octave convolution layers, DCGAN training, spectral and
//! FID-style metrics, and the experiment harness.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision for the common cases.

pub mod autograd;
pub mod error;
pub mod gan;
pub mod gradcheck;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod octave;
pub mod optim;
pub mod param;
pub mod rng;
pub mod scalar;
pub mod tensor;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tensor32 = tensor::Tensor<f32>;
pub type Tensor64 = tensor::Tensor<f64>;
pub type Graph32 = autograd::Graph<f32>;
pub type Graph64 = autograd::Graph<f64>;
pub type TrainState32 = gan::TrainState<f32>;
pub type TrainState64 = gan::TrainState<f64>;
