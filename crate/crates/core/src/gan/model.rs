//! Generator and discriminator in the DCGAN layout, with every interior
//! convolution swappable between standard, octave and soft octave blocks.

use super::config::{ConvKind, GanConfig};
use crate::autograd::{BnMode, Graph, RunningStats, Var};
use crate::error::Result;
use crate::nn::{BatchNorm2d, Conv2d, Linear};
use crate::octave::{
    dual_batch_norm, octave_conv_forward, octave_merge, scale_branches, split_channels, DualBatchNorm, OctaveConv2d,
    OctaveFeature, SOFT_OCTAVE_ALPHA,
};
use crate::param::ParamStore;
use crate::rng::Rng;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Act {
    Relu,
    Leaky,
}

#[derive(Clone, Debug)]
enum Block<T> {
    Standard { conv: Conv2d, bn: Option<BatchNorm2d<T>> },
    Octave { conv: OctaveConv2d, bn: Option<DualBatchNorm<T>>, soft: bool },
}

/// Shape of one conv block; `alpha_in`/`alpha_out` only matter for octave kinds.
struct BlockSpec<'a> {
    name: &'a str,
    cin: usize,
    cout: usize,
    transposed: bool,
    first: bool,
    last: bool,
    norm: bool,
}

fn kind_alpha(kind: &ConvKind) -> Option<f64> {
    match kind {
        ConvKind::Standard => None,
        ConvKind::Octave { alpha } => Some(*alpha),
        ConvKind::SoftOctave { .. } => Some(SOFT_OCTAVE_ALPHA),
    }
}

impl<T: Scalar> Block<T> {
    fn new(store: &mut ParamStore<T>, kind: &ConvKind, s: BlockSpec<'_>, rng: &mut Rng) -> Result<Self> {
        match kind_alpha(kind) {
            None => {
                let conv = Conv2d::new(store, s.name, s.cin, s.cout, 4, 2, 1, s.transposed, false, rng)?;
                let bn = s.norm.then(|| BatchNorm2d::new(store, &format!("{}.bn", s.name), s.cout)).transpose()?;
                Ok(Block::Standard { conv, bn })
            }
            Some(alpha) => {
                let a_in = if s.first { 0.0 } else { alpha };
                let a_out = if s.last { 0.0 } else { alpha };
                let conv = OctaveConv2d::new(store, s.name, s.cin, s.cout, 4, a_in, a_out, 2, 1, s.transposed, rng)?;
                let bn = if s.norm {
                    let (ch, cl) = split_channels(s.cout, a_out);
                    Some(DualBatchNorm::new(store, s.name, ch, cl)?)
                } else {
                    None
                };
                Ok(Block::Octave { conv, bn, soft: matches!(kind, ConvKind::SoftOctave { .. }) })
            }
        }
    }

    fn forward(
        &mut self,
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        f: OctaveFeature,
        act: Act,
        mode: BnMode,
        betas: (f64, f64),
    ) -> Result<OctaveFeature> {
        match self {
            Block::Standard { conv, bn } => {
                let x = f.high.expect("standard block expects a plain feature");
                let mut y = conv.forward(g, store, x)?;
                if let Some(bn) = bn {
                    y = bn.forward(g, store, y, mode)?;
                }
                Ok(OctaveFeature::plain(activate(g, y, act)?))
            }
            Block::Octave { conv, bn, soft } => {
                let params = conv.bind(g, store);
                let mut y = octave_conv_forward(g, f, &params)?;
                if let Some(bn) = bn {
                    y = dual_batch_norm(g, y, bn, store, mode)?;
                }
                let high = y.high.map(|v| activate(g, v, act)).transpose()?;
                let low = y.low.map(|v| activate(g, v, act)).transpose()?;
                let y = OctaveFeature { high, low };
                // The branch weights sit after normalization; in front of a
                // BN they would be divided straight back out.
                if *soft && conv.alpha_out > 0.0 {
                    scale_branches(g, y, betas.0, betas.1)
                } else {
                    Ok(y)
                }
            }
        }
    }

    fn norms(&self) -> Vec<&BatchNorm2d<T>> {
        match self {
            Block::Standard { bn, .. } => bn.iter().collect(),
            Block::Octave { bn, .. } => bn.iter().flat_map(|d| d.high.iter().chain(d.low.iter())).collect(),
        }
    }

    fn norms_mut(&mut self) -> Vec<&mut BatchNorm2d<T>> {
        match self {
            Block::Standard { bn, .. } => bn.iter_mut().collect(),
            Block::Octave { bn, .. } => bn.iter_mut().flat_map(|d| d.high.iter_mut().chain(d.low.iter_mut())).collect(),
        }
    }
}

fn activate<T: Scalar>(g: &mut Graph<T>, x: Var, act: Act) -> Result<Var> {
    match act {
        Act::Relu => g.relu(x),
        Act::Leaky => g.leaky_relu(x, T::lit(0.2)),
    }
}

fn stats_of<'a, T: Scalar>(norms: impl Iterator<Item = &'a BatchNorm2d<T>>) -> Vec<(String, &'a RunningStats<T>)> {
    norms.map(|bn| (bn.name.clone(), &bn.running)).collect()
}

/// Latent `[N, latent]` to image `[N, 3, S, S]` in `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct Generator<T: Scalar> {
    pub store: ParamStore<T>,
    project: Linear,
    project_bn: BatchNorm2d<T>,
    seed_channels: usize,
    blocks: Vec<Block<T>>,
    to_rgb: Conv2d,
    betas: (f64, f64),
    latent_dim: usize,
}

impl<T: Scalar> Generator<T> {
    pub fn new(cfg: &GanConfig, rng: &mut Rng) -> Result<Self> {
        cfg.validate()?;
        let mut store = ParamStore::new();
        let n = cfg.num_blocks();
        let seed_channels = cfg.base_channels << n;
        let project = Linear::new(&mut store, "g.project", cfg.latent_dim, seed_channels * 16, false, rng)?;
        let project_bn = BatchNorm2d::new(&mut store, "g.project.bn", seed_channels)?;
        let mut blocks = Vec::with_capacity(n);
        let mut cin = seed_channels;
        for i in 0..n {
            let cout = cin / 2;
            let name = format!("g.up{i}");
            let spec = BlockSpec { name: &name, cin, cout, transposed: true, first: i == 0, last: false, norm: true };
            blocks.push(Block::new(&mut store, &cfg.conv, spec, rng)?);
            cin = cout;
        }
        let to_rgb = Conv2d::new(&mut store, "g.to_rgb", cin, 3, 3, 1, 1, false, true, rng)?;
        Ok(Self {
            store,
            project,
            project_bn,
            seed_channels,
            blocks,
            to_rgb,
            betas: (1.0, 1.0),
            latent_dim: cfg.latent_dim,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn set_betas(&mut self, beta_low: f64, beta_high: f64) {
        self.betas = (beta_low, beta_high);
    }

    pub fn betas(&self) -> (f64, f64) {
        self.betas
    }

    pub fn forward(&mut self, g: &mut Graph<T>, z: Var, mode: BnMode) -> Result<Var> {
        let n = g.shape(z)[0];
        let h = self.project.forward(g, &self.store, z)?;
        let h = g.reshape(h, vec![n, self.seed_channels, 4, 4])?;
        let h = self.project_bn.forward(g, &self.store, h, mode)?;
        let mut f = OctaveFeature::plain(g.relu(h)?);
        for b in &mut self.blocks {
            f = b.forward(g, &self.store, f, Act::Relu, mode, self.betas)?;
        }
        let x = octave_merge(g, f)?;
        let x = self.to_rgb.forward(g, &self.store, x)?;
        g.tanh(x)
    }

    /// Named batch-norm running statistics, in construction order.
    pub fn running_stats(&self) -> Vec<(String, &RunningStats<T>)> {
        let norms = std::iter::once(&self.project_bn).chain(self.blocks.iter().flat_map(|b| b.norms()));
        stats_of(norms)
    }

    pub fn running_stats_mut(&mut self) -> Vec<(String, &mut RunningStats<T>)> {
        let norms = std::iter::once(&mut self.project_bn).chain(self.blocks.iter_mut().flat_map(|b| b.norms_mut()));
        norms.map(|bn| (bn.name.clone(), &mut bn.running)).collect()
    }
}

/// Image `[N, 3, S, S]` to one unbounded score per sample, `[N, 1]`.
#[derive(Clone, Debug)]
pub struct Discriminator<T: Scalar> {
    pub store: ParamStore<T>,
    blocks: Vec<Block<T>>,
    head: Linear,
    betas: (f64, f64),
}

impl<T: Scalar> Discriminator<T> {
    pub fn new(cfg: &GanConfig, rng: &mut Rng) -> Result<Self> {
        cfg.validate()?;
        let mut store = ParamStore::new();
        let n = cfg.num_blocks();
        let mut blocks = Vec::with_capacity(n);
        let mut cin = 3;
        for i in 0..n {
            let cout = cfg.base_channels << i;
            let name = format!("d.down{i}");
            let spec =
                BlockSpec { name: &name, cin, cout, transposed: false, first: i == 0, last: i + 1 == n, norm: i > 0 };
            blocks.push(Block::new(&mut store, &cfg.conv, spec, rng)?);
            cin = cout;
        }
        let head = Linear::new(&mut store, "d.head", cin * 16, 1, true, rng)?;
        Ok(Self { store, blocks, head, betas: (1.0, 1.0) })
    }

    pub fn set_betas(&mut self, beta_low: f64, beta_high: f64) {
        self.betas = (beta_low, beta_high);
    }

    pub fn forward(&mut self, g: &mut Graph<T>, x: Var, mode: BnMode) -> Result<Var> {
        let n = g.shape(x)[0];
        let mut f = OctaveFeature::plain(x);
        for b in &mut self.blocks {
            f = b.forward(g, &self.store, f, Act::Leaky, mode, self.betas)?;
        }
        let h = octave_merge(g, f)?;
        let per = g.shape(h).iter().skip(1).product();
        let h = g.reshape(h, vec![n, per])?;
        self.head.forward(g, &self.store, h)
    }

    pub fn running_stats(&self) -> Vec<(String, &RunningStats<T>)> {
        stats_of(self.blocks.iter().flat_map(|b| b.norms()))
    }

    pub fn running_stats_mut(&mut self) -> Vec<(String, &mut RunningStats<T>)> {
        self.blocks.iter_mut().flat_map(|b| b.norms_mut()).map(|bn| (bn.name.clone(), &mut bn.running)).collect()
    }
}
