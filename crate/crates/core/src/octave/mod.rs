//! Octave feature representation and the (soft) octave convolution.
//!
//! A feature map with `c` channels is split into a full-resolution high
//! frequency group of `round((1 - α)·c)` channels and a half-resolution low
//! frequency group holding the rest. Resampling between the groups uses 2×2
//! average pooling (high → low) and nearest-neighbour ×2 upsampling
//! (low → high).

mod conv;
mod norm;
mod schedule;

pub use conv::{
    octave_call_count, octave_conv_forward, scale_branches, soft_octave_conv_forward, OctaveConv2d, OctaveConvParams,
    SoftOctaveConvParams, SOFT_OCTAVE_ALPHA,
};
pub use norm::{dual_batch_norm, DualBatchNorm};
pub use schedule::{BetaSchedule, Breakpoint, ScheduleKind};

use crate::autograd::{Graph, Var};
use crate::error::{contract_err, dim_err, Result};
use crate::scalar::Scalar;

/// `(high, low)` channel counts for `channels` split at ratio `alpha`.
pub fn split_channels(channels: usize, alpha: f64) -> (usize, usize) {
    let high = ((1.0 - alpha) * channels as f64).round() as usize;
    let high = high.min(channels);
    (high, channels - high)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(contract_err!("alpha must lie in [0, 1], got {alpha}"));
    }
    Ok(())
}

/// High/low frequency pair. Either branch may be absent when its channel
/// count is zero; the low branch always has half the high resolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OctaveFeature {
    pub high: Option<Var>,
    pub low: Option<Var>,
}

impl OctaveFeature {
    /// A plain feature map viewed as all-high.
    pub fn plain(x: Var) -> Self {
        Self { high: Some(x), low: None }
    }

    pub fn channels<T: Scalar>(&self, g: &Graph<T>) -> (usize, usize) {
        let c = |v: Option<Var>| v.map_or(0, |v| g.shape(v)[1]);
        (c(self.high), c(self.low))
    }

    /// `(N, H, W)` at the high-frequency resolution.
    pub fn dims<T: Scalar>(&self, g: &Graph<T>) -> Result<(usize, usize, usize)> {
        match (self.high, self.low) {
            (Some(h), low) => {
                let (n, _, hh, ww) = g.value(h).dims4()?;
                if let Some(l) = low {
                    let (ln, _, lh, lw) = g.value(l).dims4()?;
                    if ln != n || lh * 2 != hh || lw * 2 != ww {
                        return Err(dim_err!("low branch {:?} is not half of high {:?}", g.shape(l), g.shape(h)));
                    }
                }
                Ok((n, hh, ww))
            }
            (None, Some(l)) => {
                let (n, _, lh, lw) = g.value(l).dims4()?;
                Ok((n, lh * 2, lw * 2))
            }
            (None, None) => Err(contract_err!("octave feature with neither branch")),
        }
    }
}

/// Splits the channels of `x` into high and low groups, pooling the low group.
pub fn octave_split<T: Scalar>(g: &mut Graph<T>, x: Var, alpha: f64) -> Result<OctaveFeature> {
    check_alpha(alpha)?;
    let (_, c, h, w) = g.value(x).dims4()?;
    let (ch, cl) = split_channels(c, alpha);
    if cl == 0 {
        return Ok(OctaveFeature::plain(x));
    }
    if h % 2 != 0 || w % 2 != 0 {
        return Err(dim_err!("octave split needs even spatial dims, got {h}x{w}"));
    }
    let high = if ch > 0 { Some(g.narrow_channels(x, 0, ch)?) } else { None };
    let rest = g.narrow_channels(x, ch, cl)?;
    let low = Some(g.avg_pool2d(rest, 2)?);
    Ok(OctaveFeature { high, low })
}

/// Upsamples the low group and appends it after the high channels.
pub fn octave_merge<T: Scalar>(g: &mut Graph<T>, f: OctaveFeature) -> Result<Var> {
    f.dims(g)?;
    match (f.high, f.low) {
        (Some(h), None) => Ok(h),
        (None, Some(l)) => g.upsample_nearest2d(l, 2),
        (Some(h), Some(l)) => {
            let up = g.upsample_nearest2d(l, 2)?;
            g.concat_channels(&[h, up])
        }
        (None, None) => unreachable!("dims() rejects empty features"),
    }
}
