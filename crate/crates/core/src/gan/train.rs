//! Alternating discriminator/generator updates and sampling.

use super::config::{ConvKind, GanConfig, LossKind};
use super::loss::{discriminator_loss, generator_loss};
use super::model::{Discriminator, Generator};
use crate::autograd::{BnMode, Graph};
use crate::error::{DivergenceReport, Error, Result};
use crate::optim::{adam_step, weight_clip, AdamState};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

const STREAM_GENERATOR: u64 = 1;
const STREAM_DISCRIMINATOR: u64 = 2;
const STREAM_LATENT: u64 = 3;

/// Largest batch pushed through the generator at once by [`generate`].
const GENERATE_CHUNK: usize = 64;

/// One row of the per-epoch history. Evaluation columns are NaN until filled
/// in by whoever computes them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss_d: f64,
    pub loss_g: f64,
    pub beta_low: f64,
    pub beta_high: f64,
    pub fid_proxy: f64,
    pub spec_high_dist: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct TrainState<T: Scalar> {
    pub config: GanConfig,
    pub generator: Generator<T>,
    pub discriminator: Discriminator<T>,
    pub adam_g: AdamState<T>,
    pub adam_d: AdamState<T>,
    /// Number of completed epochs.
    pub epoch: usize,
    /// Number of completed batch updates over the whole run.
    pub iteration: usize,
    pub rng: Rng,
    pub history: Vec<EpochRecord>,
}

impl<T: Scalar> TrainState<T> {
    pub fn new(config: &GanConfig) -> Result<Self> {
        config.validate()?;
        let generator = Generator::new(config, &mut Rng::derived(config.seed, STREAM_GENERATOR))?;
        let discriminator = Discriminator::new(config, &mut Rng::derived(config.seed, STREAM_DISCRIMINATOR))?;
        let adam = |store| AdamState::new(store, T::lit(config.lr), T::lit(config.beta1), T::lit(config.beta2), T::lit(1e-8));
        let adam_g = adam(&generator.store)?;
        let adam_d = adam(&discriminator.store)?;
        Ok(Self {
            config: config.clone(),
            generator,
            discriminator,
            adam_g,
            adam_d,
            epoch: 0,
            iteration: 0,
            rng: Rng::derived(config.seed, STREAM_LATENT),
            history: Vec::new(),
        })
    }

    /// β pair in effect for epoch index `epoch` (zero-based).
    pub fn betas_for(&self, epoch: usize) -> Result<(f64, f64)> {
        match &self.config.conv {
            ConvKind::SoftOctave { schedule } => schedule.eval(epoch, self.config.epochs.max(1)),
            _ => Ok((1.0, 1.0)),
        }
    }
}

fn latent<T: Scalar>(rng: &mut Rng, n: usize, dim: usize) -> Result<Tensor<T>> {
    let mut buf = vec![0.0; n * dim];
    rng.fill_normal(&mut buf);
    Tensor::from_f64(vec![n, dim], &buf)
}

fn scalar_of<T: Scalar>(g: &Graph<T>, v: crate::autograd::Var) -> f64 {
    g.value(v).data()[0].as_f64()
}

struct StepLosses {
    d: f64,
    g: f64,
}

fn train_step<T: Scalar>(state: &mut TrainState<T>, real: Tensor<T>, losses: &mut StepLosses) -> Result<()> {
    let kind = state.config.loss;
    let n = real.shape()[0];
    let z = latent(&mut state.rng, n, state.config.latent_dim)?;

    let mut gg = Graph::new();
    let zv = gg.constant(z);
    let fake = state.generator.forward(&mut gg, zv, BnMode::Train)?;

    let mut gd = Graph::new();
    gd.freeze(&state.generator.store);
    let rv = gd.constant(real);
    let fv = gd.constant(gg.value(fake).clone());
    let d_real = state.discriminator.forward(&mut gd, rv, BnMode::Train)?;
    let d_fake = state.discriminator.forward(&mut gd, fv, BnMode::Train)?;
    let loss_d = discriminator_loss(&mut gd, kind, d_real, d_fake)?;
    losses.d = scalar_of(&gd, loss_d);
    if !losses.d.is_finite() {
        return Err(Error::Numeric("discriminator loss is not finite".into()));
    }
    let grads = gd.backward(loss_d)?;
    state.discriminator.store.zero_grad();
    grads.accumulate_into(&gd, &mut state.discriminator.store);
    adam_step(&mut state.discriminator.store, &mut state.adam_d)?;
    if kind == LossKind::Wgan {
        weight_clip(&mut state.discriminator.store, T::lit(state.config.clip))?;
    }

    gg.freeze(&state.discriminator.store);
    let d_fake_g = state.discriminator.forward(&mut gg, fake, BnMode::Train)?;
    let loss_g = generator_loss(&mut gg, kind, d_fake_g)?;
    losses.g = scalar_of(&gg, loss_g);
    if !losses.g.is_finite() {
        return Err(Error::Numeric("generator loss is not finite".into()));
    }
    let grads = gg.backward(loss_g)?;
    state.generator.store.zero_grad();
    grads.accumulate_into(&gg, &mut state.generator.store);
    adam_step(&mut state.generator.store, &mut state.adam_g)
}

/// Runs one epoch over `batches` (each `[B, 3, S, S]`). The returned record
/// carries mean losses and the β pair used; evaluation columns are NaN.
pub fn train_epoch<T: Scalar, I>(state: &mut TrainState<T>, batches: I) -> Result<EpochRecord>
where
    I: IntoIterator<Item = Tensor<T>>,
{
    let epoch = state.epoch;
    let (bl, bh) = state.betas_for(epoch)?;
    state.generator.set_betas(bl, bh);
    state.discriminator.set_betas(bl, bh);

    let (mut sum_d, mut sum_g, mut count) = (0.0, 0.0, 0usize);
    for batch in batches {
        let mut losses = StepLosses { d: f64::NAN, g: f64::NAN };
        match train_step(state, batch, &mut losses) {
            Ok(()) => {}
            Err(Error::Numeric(_)) => {
                return Err(Error::Divergence(DivergenceReport {
                    epoch,
                    iteration: state.iteration,
                    loss_d: losses.d,
                    loss_g: losses.g,
                }));
            }
            Err(e) => return Err(e),
        }
        sum_d += losses.d;
        sum_g += losses.g;
        count += 1;
        state.iteration += 1;
    }
    if count == 0 {
        return Err(Error::Dataset("epoch produced no batches".into()));
    }
    state.epoch += 1;
    Ok(EpochRecord {
        epoch,
        loss_d: sum_d / count as f64,
        loss_g: sum_g / count as f64,
        beta_low: bl,
        beta_high: bh,
        fid_proxy: f64::NAN,
        spec_high_dist: f64::NAN,
        seconds: f64::NAN,
    })
}

/// `n` samples from the generator in eval mode, latents drawn from `seed`.
pub fn generate<T: Scalar>(generator: &mut Generator<T>, n: usize, seed: u64) -> Result<Tensor<T>> {
    let mut rng = Rng::new(seed);
    let z: Tensor<T> = latent(&mut rng, n, generator.latent_dim())?;
    let mut parts = Vec::new();
    let mut start = 0;
    while start < n {
        let len = GENERATE_CHUNK.min(n - start);
        let mut g = Graph::new();
        let zv = g.constant(z.narrow_batch(start, len)?);
        let x = generator.forward(&mut g, zv, BnMode::Eval)?;
        parts.push(g.value(x).clone());
        start += len;
    }
    if parts.is_empty() {
        return Err(Error::Contract("generate needs n >= 1".into()));
    }
    Tensor::concat_batch(&parts)
}
