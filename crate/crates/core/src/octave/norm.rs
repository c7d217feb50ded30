use super::OctaveFeature;
use crate::autograd::{BnMode, Graph};
use crate::error::{contract_err, Result};
use crate::nn::BatchNorm2d;
use crate::param::ParamStore;
use crate::scalar::Scalar;

/// Independent batch normalization for the high and low branches.
#[derive(Clone, Debug)]
pub struct DualBatchNorm<T> {
    pub high: Option<BatchNorm2d<T>>,
    pub low: Option<BatchNorm2d<T>>,
}

impl<T: Scalar> DualBatchNorm<T> {
    pub fn new(store: &mut ParamStore<T>, name: &str, high_channels: usize, low_channels: usize) -> Result<Self> {
        let high = (high_channels > 0).then(|| BatchNorm2d::new(store, &format!("{name}.bn_high"), high_channels)).transpose()?;
        let low = (low_channels > 0).then(|| BatchNorm2d::new(store, &format!("{name}.bn_low"), low_channels)).transpose()?;
        Ok(Self { high, low })
    }
}

pub fn dual_batch_norm<T: Scalar>(
    g: &mut Graph<T>,
    f: OctaveFeature,
    d: &mut DualBatchNorm<T>,
    store: &ParamStore<T>,
    mode: BnMode,
) -> Result<OctaveFeature> {
    let high = match (f.high, d.high.as_mut()) {
        (Some(x), Some(bn)) => Some(bn.forward(g, store, x, mode)?),
        (None, _) => None,
        (Some(_), None) => return Err(contract_err!("high branch present but no high normalizer")),
    };
    let low = match (f.low, d.low.as_mut()) {
        (Some(x), Some(bn)) => Some(bn.forward(g, store, x, mode)?),
        (None, _) => None,
        (Some(_), None) => return Err(contract_err!("low branch present but no low normalizer")),
    };
    Ok(OctaveFeature { high, low })
}
