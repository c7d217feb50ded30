//! Epoch-indexed (β_low, β_high) schedules, piecewise linear in the training
//! fraction `t = epoch / total_epochs`.

use std::fmt;
use std::str::FromStr;

use crate::error::{contract_err, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScheduleKind {
    Constant,
    Ramp,
    Combination,
    /// β_low = 1 − β_high at every t.
    Coupled,
}

impl ScheduleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Constant => "constant",
            Self::Ramp => "ramp",
            Self::Combination => "combination",
            Self::Coupled => "coupled",
        }
    }

    pub fn default_points(self) -> Vec<Breakpoint> {
        let bp = Breakpoint::new;
        match self {
            Self::Constant => vec![bp(0.0, 1.0, 1.0), bp(1.0, 1.0, 1.0)],
            Self::Ramp | Self::Coupled => vec![bp(0.0, 1.0, 0.0), bp(1.0, 0.0, 1.0)],
            Self::Combination => vec![bp(0.0, 1.0, 0.25), bp(0.5, 0.75, 0.75), bp(1.0, 0.25, 1.0)],
        }
    }
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Self::Constant),
            "ramp" => Ok(Self::Ramp),
            "combination" => Ok(Self::Combination),
            "coupled" => Ok(Self::Coupled),
            other => Err(Error::Config(format!("unknown schedule `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Breakpoint {
    pub t: f64,
    pub beta_low: f64,
    pub beta_high: f64,
}

impl Breakpoint {
    pub const fn new(t: f64, beta_low: f64, beta_high: f64) -> Self {
        Self { t, beta_low, beta_high }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BetaSchedule {
    kind: ScheduleKind,
    points: Vec<Breakpoint>,
}

impl BetaSchedule {
    pub fn new(kind: ScheduleKind) -> Self {
        Self { kind, points: kind.default_points() }
    }

    pub fn constant(beta_low: f64, beta_high: f64) -> Result<Self> {
        Self::with_points(
            ScheduleKind::Constant,
            vec![Breakpoint::new(0.0, beta_low, beta_high), Breakpoint::new(1.0, beta_low, beta_high)],
        )
    }

    /// Custom breakpoints; validated against the kind's constraints.
    pub fn with_points(kind: ScheduleKind, points: Vec<Breakpoint>) -> Result<Self> {
        let (first, last) = match (points.first(), points.last()) {
            (Some(f), Some(l)) if points.len() >= 2 => (f, l),
            _ => return Err(contract_err!("a schedule needs at least two breakpoints")),
        };
        if first.t != 0.0 || last.t != 1.0 {
            return Err(contract_err!("breakpoints must start at t=0 and end at t=1"));
        }
        if points.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(contract_err!("breakpoints must be strictly increasing in t"));
        }
        for p in &points {
            let ok = |b: f64| b.is_finite() && b >= 0.0;
            if !ok(p.beta_low) || !ok(p.beta_high) {
                return Err(contract_err!("beta values must be finite and non-negative at t={}", p.t));
            }
        }
        match kind {
            ScheduleKind::Constant if points.iter().any(|p| p.beta_low != first.beta_low || p.beta_high != first.beta_high) => {
                return Err(contract_err!("constant schedule with differing breakpoints"));
            }
            ScheduleKind::Coupled if points.iter().any(|p| (p.beta_low + p.beta_high - 1.0).abs() > 1e-12) => {
                return Err(contract_err!("coupled schedule needs beta_low = 1 - beta_high"));
            }
            _ => {}
        }
        Ok(Self { kind, points })
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn points(&self) -> &[Breakpoint] {
        &self.points
    }

    /// Interpolated `(beta_low, beta_high)` at training fraction `t ∈ [0, 1]`.
    pub fn at(&self, t: f64) -> (f64, f64) {
        let t = t.clamp(0.0, 1.0);
        let i = self.points.partition_point(|p| p.t <= t).clamp(1, self.points.len() - 1);
        let (a, b) = (self.points[i - 1], self.points[i]);
        let s = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
        let lerp = |x: f64, y: f64| x + (y - x) * s;
        let high = lerp(a.beta_high, b.beta_high);
        let low = if self.kind == ScheduleKind::Coupled { 1.0 - high } else { lerp(a.beta_low, b.beta_low) };
        (low, high)
    }

    /// β pair in force during `epoch` of `total_epochs`.
    pub fn eval(&self, epoch: usize, total_epochs: usize) -> Result<(f64, f64)> {
        if total_epochs == 0 || epoch > total_epochs {
            return Err(contract_err!("epoch {epoch} outside 0..={total_epochs}"));
        }
        Ok(self.at(epoch as f64 / total_epochs as f64))
    }
}
