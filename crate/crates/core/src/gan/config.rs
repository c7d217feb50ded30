use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::octave::BetaSchedule;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossKind {
    Vanilla,
    Lsgan,
    Wgan,
}

impl LossKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Vanilla => "vanilla",
            Self::Lsgan => "lsgan",
            Self::Wgan => "wgan",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vanilla" => Ok(Self::Vanilla),
            "lsgan" => Ok(Self::Lsgan),
            "wgan" => Ok(Self::Wgan),
            other => Err(Error::Config(format!("unknown loss `{other}`"))),
        }
    }
}

/// Convolution flavour used by every interior block of both networks.
#[derive(Clone, Debug, PartialEq)]
pub enum ConvKind {
    Standard,
    Octave { alpha: f64 },
    SoftOctave { schedule: BetaSchedule },
}

impl ConvKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Standard => "standard",
            Self::Octave { .. } => "octave",
            Self::SoftOctave { .. } => "soft_octave",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GanConfig {
    pub image_size: usize,
    pub latent_dim: usize,
    pub base_channels: usize,
    pub loss: LossKind,
    pub conv: ConvKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub clip: f64,
    pub seed: u64,
}

impl Default for GanConfig {
    fn default() -> Self {
        Self {
            image_size: 32,
            latent_dim: 100,
            base_channels: 8,
            loss: LossKind::Vanilla,
            conv: ConvKind::Standard,
            lr: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            batch_size: 64,
            epochs: 20,
            clip: 0.01,
            seed: 1,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.image_size < 8 || !self.image_size.is_power_of_two() {
            return bad(format!("image_size must be a power of two >= 8, got {}", self.image_size));
        }
        if self.batch_size < 2 {
            return bad(format!("batch_size must be at least 2, got {}", self.batch_size));
        }
        if self.latent_dim == 0 || self.base_channels == 0 {
            return bad("latent_dim and base_channels must be positive".into());
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be a finite non-negative number, got {}", self.lr));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return bad(format!("{name} must lie in (0, 1), got {b}"));
            }
        }
        if !(self.clip > 0.0) {
            return bad(format!("clip must be positive, got {}", self.clip));
        }
        if let ConvKind::Octave { alpha } = self.conv {
            if !(0.0..=1.0).contains(&alpha) {
                return bad(format!("alpha must lie in [0, 1], got {alpha}"));
            }
        }
        Ok(())
    }

    /// Number of resolution-doubling blocks between the 4×4 seed and the image.
    pub fn num_blocks(&self) -> usize {
        self.image_size.trailing_zeros() as usize - 2
    }
}
