//! Adversarial loss pairs on raw (pre-sigmoid) discriminator scores.
//!
//! The discriminator and generator halves are exposed separately because the
//! training loop builds them in different graphs.

use super::config::LossKind;
use crate::autograd::{Graph, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub fn discriminator_loss<T: Scalar>(g: &mut Graph<T>, kind: LossKind, d_real: Var, d_fake: Var) -> Result<Var> {
    match kind {
        LossKind::Vanilla => {
            // -log σ(r) - log(1 - σ(f)) with 1 - σ(f) = σ(-f)
            let lr = g.log_sigmoid(d_real)?;
            let lr = g.mean(lr)?;
            let nf = g.scale(d_fake, -T::one())?;
            let lf = g.log_sigmoid(nf)?;
            let lf = g.mean(lf)?;
            let s = g.add(lr, lf)?;
            g.scale(s, -T::one())
        }
        LossKind::Lsgan => {
            let r = g.add_scalar(d_real, -T::one())?;
            let r = g.square(r)?;
            let r = g.mean(r)?;
            let f = g.square(d_fake)?;
            let f = g.mean(f)?;
            let s = g.add(r, f)?;
            g.scale(s, T::lit(0.5))
        }
        LossKind::Wgan => {
            let f = g.mean(d_fake)?;
            let r = g.mean(d_real)?;
            g.sub(f, r)
        }
    }
}

pub fn generator_loss<T: Scalar>(g: &mut Graph<T>, kind: LossKind, d_fake: Var) -> Result<Var> {
    match kind {
        LossKind::Vanilla => {
            let l = g.log_sigmoid(d_fake)?;
            let l = g.mean(l)?;
            g.scale(l, -T::one())
        }
        LossKind::Lsgan => {
            let f = g.add_scalar(d_fake, -T::one())?;
            let f = g.square(f)?;
            let f = g.mean(f)?;
            g.scale(f, T::lit(0.5))
        }
        LossKind::Wgan => {
            let f = g.mean(d_fake)?;
            g.scale(f, -T::one())
        }
    }
}

/// Both halves in one graph; errors if either value is not finite.
pub fn gan_losses<T: Scalar>(
    g: &mut Graph<T>,
    kind: LossKind,
    d_real: Var,
    d_fake_for_d: Var,
    d_fake_for_g: Var,
) -> Result<(Var, Var)> {
    let ld = discriminator_loss(g, kind, d_real, d_fake_for_d)?;
    let lg = generator_loss(g, kind, d_fake_for_g)?;
    let (vd, vg) = (g.value(ld).data()[0], g.value(lg).data()[0]);
    if !vd.is_finite() || !vg.is_finite() {
        return Err(Error::Numeric(format!("{kind} loss is not finite: loss_d={vd}, loss_g={vg}")));
    }
    Ok((ld, lg))
}

pub fn vanilla_gan_losses<T: Scalar>(g: &mut Graph<T>, d_real: Var, d_fake_for_d: Var, d_fake_for_g: Var) -> Result<(Var, Var)> {
    gan_losses(g, LossKind::Vanilla, d_real, d_fake_for_d, d_fake_for_g)
}

pub fn lsgan_losses<T: Scalar>(g: &mut Graph<T>, d_real: Var, d_fake_for_d: Var, d_fake_for_g: Var) -> Result<(Var, Var)> {
    gan_losses(g, LossKind::Lsgan, d_real, d_fake_for_d, d_fake_for_g)
}

pub fn wgan_losses<T: Scalar>(g: &mut Graph<T>, d_real: Var, d_fake_for_d: Var, d_fake_for_g: Var) -> Result<(Var, Var)> {
    gan_losses(g, LossKind::Wgan, d_real, d_fake_for_d, d_fake_for_g)
}
