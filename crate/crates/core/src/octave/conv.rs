use std::cell::Cell;

use super::{check_alpha, split_channels, OctaveFeature};
use crate::autograd::{Graph, Var};
use crate::error::{contract_err, dim_err, Result};
use crate::nn::INIT_STD;
use crate::param::{ParamId, ParamStore};
use crate::rng::Rng;
use crate::scalar::Scalar;

/// The soft octave convolution fixes the channel split at one half.
pub const SOFT_OCTAVE_ALPHA: f64 = 0.5;

thread_local! {
    static OCTAVE_CALLS: Cell<u64> = const { Cell::new(0) };
}

/// Number of octave convolutions evaluated on the current thread.
pub fn octave_call_count() -> u64 {
    OCTAVE_CALLS.with(Cell::get)
}

/// The four cross-frequency kernel banks of one octave layer, bound into a
/// graph. A bank is `None` when its input or output group has no channels.
#[derive(Clone, Copy, Debug)]
pub struct OctaveConvParams {
    pub w_hh: Option<Var>,
    pub w_hl: Option<Var>,
    pub w_lh: Option<Var>,
    pub w_ll: Option<Var>,
    pub alpha_in: f64,
    pub alpha_out: f64,
    pub stride: usize,
    pub padding: usize,
    /// Banks are transposed-convolution kernels (`[cin, cout, k, k]`).
    pub transposed: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct SoftOctaveConvParams {
    pub base: OctaveConvParams,
    pub beta_low: f64,
    pub beta_high: f64,
}

impl OctaveConvParams {
    fn conv<T: Scalar>(&self, g: &mut Graph<T>, x: Var, k: Var) -> Result<Var> {
        if self.transposed {
            g.conv_transpose2d(x, k, None, self.stride, self.padding)
        } else {
            g.conv2d(x, k, None, self.stride, self.padding)
        }
    }

    /// `(in_channels, out_channels)` of a bank kernel.
    fn bank_io<T: Scalar>(&self, g: &Graph<T>, k: Var) -> (usize, usize) {
        let s = g.shape(k);
        if self.transposed {
            (s[0], s[1])
        } else {
            (s[1], s[0])
        }
    }

    fn check_inputs<T: Scalar>(&self, g: &Graph<T>, f: &OctaveFeature) -> Result<()> {
        check_alpha(self.alpha_in)?;
        check_alpha(self.alpha_out)?;
        let (ch, cl) = f.channels(g);
        let mut expect_h = None;
        let mut expect_l = None;
        for (bank, from_high) in [(self.w_hh, true), (self.w_hl, true), (self.w_lh, false), (self.w_ll, false)] {
            if let Some(k) = bank {
                let (cin, _) = self.bank_io(g, k);
                let slot = if from_high { &mut expect_h } else { &mut expect_l };
                if slot.is_some_and(|c| c != cin) {
                    return Err(dim_err!("octave banks disagree on input channels"));
                }
                *slot = Some(cin);
            }
        }
        let eh = expect_h.unwrap_or(0);
        let el = expect_l.unwrap_or(0);
        if (ch, cl) != (eh, el) {
            return Err(dim_err!("octave input has ({ch}, {cl}) high/low channels, banks expect ({eh}, {el})"));
        }
        if split_channels(ch + cl, self.alpha_in) != (ch, cl) {
            return Err(contract_err!(
                "input split ({ch}, {cl}) does not match alpha_in {} for {} channels",
                self.alpha_in,
                ch + cl
            ));
        }
        Ok(())
    }
}

fn add_parts<T: Scalar>(g: &mut Graph<T>, parts: [Option<Var>; 2]) -> Result<Option<Var>> {
    match parts {
        [Some(a), Some(b)] => {
            if g.shape(a) != g.shape(b) {
                return Err(dim_err!("octave branch outputs {:?} and {:?} differ", g.shape(a), g.shape(b)));
            }
            Ok(Some(g.add(a, b)?))
        }
        [a, b] => Ok(a.or(b)),
    }
}

/// Octave convolution:
///
/// ```text
/// out_high = conv(high, W_HH) + up2(conv(low, W_LH))
/// out_low  = conv(pool2(high), W_HL) + conv(low, W_LL)
/// ```
pub fn octave_conv_forward<T: Scalar>(g: &mut Graph<T>, f: OctaveFeature, p: &OctaveConvParams) -> Result<OctaveFeature> {
    p.check_inputs(g, &f)?;
    OCTAVE_CALLS.with(|c| c.set(c.get() + 1));
    let (_, h, w) = f.dims(g)?;

    let hh = match (f.high, p.w_hh) {
        (Some(x), Some(k)) => Some(p.conv(g, x, k)?),
        _ => None,
    };
    let lh = match (f.low, p.w_lh) {
        (Some(x), Some(k)) => {
            let y = p.conv(g, x, k)?;
            Some(g.upsample_nearest2d(y, 2)?)
        }
        _ => None,
    };
    let hl = match (f.high, p.w_hl) {
        (Some(x), Some(k)) => {
            if h % 2 != 0 || w % 2 != 0 {
                return Err(dim_err!("high branch {h}x{w} cannot feed a low branch (odd size)"));
            }
            let pooled = g.avg_pool2d(x, 2)?;
            Some(p.conv(g, pooled, k)?)
        }
        _ => None,
    };
    let ll = match (f.low, p.w_ll) {
        (Some(x), Some(k)) => Some(p.conv(g, x, k)?),
        _ => None,
    };
    let out = OctaveFeature { high: add_parts(g, [hh, lh])?, low: add_parts(g, [hl, ll])? };
    out.dims(g)?;
    Ok(out)
}

/// Multiplies the high branch by `beta_high` and the low branch by `beta_low`.
pub fn scale_branches<T: Scalar>(g: &mut Graph<T>, f: OctaveFeature, beta_low: f64, beta_high: f64) -> Result<OctaveFeature> {
    if !(beta_low >= 0.0 && beta_high >= 0.0) {
        return Err(contract_err!("beta factors must be non-negative, got ({beta_low}, {beta_high})"));
    }
    let high = f.high.map(|v| g.scale(v, T::lit(beta_high))).transpose()?;
    let low = f.low.map(|v| g.scale(v, T::lit(beta_low))).transpose()?;
    Ok(OctaveFeature { high, low })
}

/// Soft octave convolution: an octave convolution at α = 0.5 whose output
/// branches are weighted by `beta_high` and `beta_low`.
pub fn soft_octave_conv_forward<T: Scalar>(g: &mut Graph<T>, f: OctaveFeature, p: &SoftOctaveConvParams) -> Result<OctaveFeature> {
    let edge_ok = |a: f64| a == SOFT_OCTAVE_ALPHA || a == 0.0;
    if !edge_ok(p.base.alpha_in) || !edge_ok(p.base.alpha_out) || (p.base.alpha_in == 0.0 && p.base.alpha_out == 0.0) {
        return Err(contract_err!(
            "soft octave convolution runs at alpha {SOFT_OCTAVE_ALPHA}, got ({}, {})",
            p.base.alpha_in,
            p.base.alpha_out
        ));
    }
    let out = octave_conv_forward(g, f, &p.base)?;
    scale_branches(g, out, p.beta_low, p.beta_high)
}

/// Parameter-owning octave layer; binds its banks into a graph on demand.
#[derive(Clone, Debug)]
pub struct OctaveConv2d {
    pub w_hh: Option<ParamId>,
    pub w_hl: Option<ParamId>,
    pub w_lh: Option<ParamId>,
    pub w_ll: Option<ParamId>,
    pub alpha_in: f64,
    pub alpha_out: f64,
    pub stride: usize,
    pub padding: usize,
    pub transposed: bool,
}

impl OctaveConv2d {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        cin: usize,
        cout: usize,
        k: usize,
        alpha_in: f64,
        alpha_out: f64,
        stride: usize,
        padding: usize,
        transposed: bool,
        rng: &mut Rng,
    ) -> Result<Self> {
        check_alpha(alpha_in)?;
        check_alpha(alpha_out)?;
        let (ih, il) = split_channels(cin, alpha_in);
        let (oh, ol) = split_channels(cout, alpha_out);
        let mut bank = |tag: &str, i: usize, o: usize| -> Result<Option<ParamId>> {
            if i == 0 || o == 0 {
                return Ok(None);
            }
            let shape = if transposed { vec![i, o, k, k] } else { vec![o, i, k, k] };
            store.add_normal(format!("{name}.{tag}"), shape, INIT_STD, rng).map(Some)
        };
        Ok(Self {
            w_hh: bank("w_hh", ih, oh)?,
            w_hl: bank("w_hl", ih, ol)?,
            w_lh: bank("w_lh", il, oh)?,
            w_ll: bank("w_ll", il, ol)?,
            alpha_in,
            alpha_out,
            stride,
            padding,
            transposed,
        })
    }

    pub fn bind<T: Scalar>(&self, g: &mut Graph<T>, store: &ParamStore<T>) -> OctaveConvParams {
        let mut b = |id: Option<ParamId>| id.map(|id| g.param(store, id));
        OctaveConvParams {
            w_hh: b(self.w_hh),
            w_hl: b(self.w_hl),
            w_lh: b(self.w_lh),
            w_ll: b(self.w_ll),
            alpha_in: self.alpha_in,
            alpha_out: self.alpha_out,
            stride: self.stride,
            padding: self.padding,
            transposed: self.transposed,
        }
    }
}
