//! DCGAN-style generator/discriminator pair, adversarial losses and the
//! training loop.

mod config;
mod loss;
mod model;
mod train;

pub use config::{ConvKind, GanConfig, LossKind};
pub use loss::{discriminator_loss, gan_losses, generator_loss, lsgan_losses, vanilla_gan_losses, wgan_losses};
pub use model::{Discriminator, Generator};
pub use train::{generate, train_epoch, EpochRecord, TrainState};
