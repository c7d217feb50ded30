//! Parameter-owning layer wrappers around the graph operators.

use crate::autograd::{BnMode, Graph, RunningStats, Var};
use crate::error::Result;
use crate::param::{ParamId, ParamStore};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Standard deviation of the Gaussian used for all kernel initializations.
pub const INIT_STD: f64 = 0.02;

#[derive(Clone, Debug)]
pub struct Conv2d {
    pub kernel: ParamId,
    pub bias: Option<ParamId>,
    pub stride: usize,
    pub padding: usize,
    pub transposed: bool,
}

impl Conv2d {
    /// Kernel is `[cout, cin, k, k]`, or `[cin, cout, k, k]` when transposed.
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        cin: usize,
        cout: usize,
        k: usize,
        stride: usize,
        padding: usize,
        transposed: bool,
        bias: bool,
        rng: &mut Rng,
    ) -> Result<Self> {
        let shape = if transposed { vec![cin, cout, k, k] } else { vec![cout, cin, k, k] };
        let kernel = store.add_normal(format!("{name}.weight"), shape, INIT_STD, rng)?;
        let bias = if bias { Some(store.add(format!("{name}.bias"), Tensor::zeros(vec![cout]))?) } else { None };
        Ok(Self { kernel, bias, stride, padding, transposed })
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        let k = g.param(store, self.kernel);
        let b = self.bias.map(|b| g.param(store, b));
        if self.transposed {
            g.conv_transpose2d(x, k, b, self.stride, self.padding)
        } else {
            g.conv2d(x, k, b, self.stride, self.padding)
        }
    }
}

#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
}

impl Linear {
    pub fn new<T: Scalar>(store: &mut ParamStore<T>, name: &str, fin: usize, fout: usize, bias: bool, rng: &mut Rng) -> Result<Self> {
        let weight = store.add_normal(format!("{name}.weight"), vec![fout, fin], INIT_STD, rng)?;
        let bias = if bias { Some(store.add(format!("{name}.bias"), Tensor::zeros(vec![fout]))?) } else { None };
        Ok(Self { weight, bias })
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        let w = g.param(store, self.weight);
        let b = self.bias.map(|b| g.param(store, b));
        g.linear(x, w, b)
    }
}

#[derive(Clone, Debug)]
pub struct BatchNorm2d<T> {
    pub name: String,
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running: RunningStats<T>,
    pub momentum: T,
    pub eps: T,
}

impl<T: Scalar> BatchNorm2d<T> {
    pub fn new(store: &mut ParamStore<T>, name: &str, channels: usize) -> Result<Self> {
        let gamma = store.add(format!("{name}.gamma"), Tensor::full(vec![channels], T::one()))?;
        let beta = store.add(format!("{name}.beta"), Tensor::zeros(vec![channels]))?;
        Ok(Self {
            name: name.to_string(),
            gamma,
            beta,
            running: RunningStats::new(channels),
            momentum: T::lit(0.1),
            eps: T::lit(1e-5),
        })
    }

    pub fn forward(&mut self, g: &mut Graph<T>, store: &ParamStore<T>, x: Var, mode: BnMode) -> Result<Var> {
        let gamma = g.param(store, self.gamma);
        let beta = g.param(store, self.beta);
        g.batch_norm2d(x, gamma, beta, &mut self.running, mode, self.momentum, self.eps)
    }
}
