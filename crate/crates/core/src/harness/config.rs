//! Flat `key=value` experiment configuration.
//!
//! One assignment per line, `#` starts a comment. Command-line overrides use
//! the same syntax and are applied after the file.

use std::fmt::Write as _;
use std::path::PathBuf;

use super::dataset::{DataSource, SyntheticSpec};
use crate::error::{Error, Result};
use crate::gan::{ConvKind, GanConfig, LossKind};
use crate::octave::{BetaSchedule, Breakpoint, ScheduleKind, SOFT_OCTAVE_ALPHA};

pub const KEYS: &[&str] = &[
    "image_size",
    "latent_dim",
    "base_channels",
    "loss",
    "conv",
    "alpha",
    "schedule",
    "schedule_points",
    "lr",
    "beta1",
    "beta2",
    "batch_size",
    "epochs",
    "clip",
    "seed",
    "eval_samples",
    "data_dir",
    "synthetic",
    "out_dir",
];

pub const DEFAULT_EVAL_SAMPLES: usize = 512;

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub gan: GanConfig,
    pub data: DataSource,
    pub out_dir: PathBuf,
    /// Generated samples per epoch used for the FID-proxy and spectrum columns.
    pub eval_samples: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            gan: GanConfig::default(),
            data: DataSource::Synthetic(SyntheticSpec { count: 2048, seed: 1, texture: 0.0 }),
            out_dir: PathBuf::from("run"),
            eval_samples: DEFAULT_EVAL_SAMPLES,
        }
    }
}

/// One `key=value` with a human-readable origin for error messages.
#[derive(Clone, Debug)]
struct Assignment {
    key: String,
    value: String,
    origin: String,
    layer: usize,
}

fn split_assignment(text: &str, origin: &str) -> Result<(String, String)> {
    let (k, v) = text
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("{origin}: expected key=value, got `{text}`")))?;
    let (k, v) = (k.trim(), v.trim());
    if !KEYS.contains(&k) {
        return Err(Error::Config(format!("{origin}: unknown key `{k}`")));
    }
    if v.is_empty() {
        return Err(Error::Config(format!("{origin}: empty value for `{k}`")));
    }
    Ok((k.to_string(), v.to_string()))
}

fn file_assignments(text: &str, layer: usize) -> Result<Vec<Assignment>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let origin = format!("line {}", i + 1);
        let (key, value) = split_assignment(body, &origin)?;
        out.push(Assignment { key, value, origin, layer });
    }
    Ok(out)
}

fn parse_num<T: std::str::FromStr>(a: &Assignment) -> Result<T> {
    a.value
        .parse()
        .map_err(|_| Error::Config(format!("{}: invalid value `{}` for `{}`", a.origin, a.value, a.key)))
}

fn parse_points(a: &Assignment) -> Result<Vec<Breakpoint>> {
    let bad = || Error::Config(format!("{}: schedule_points must be t:bl:bh triples, got `{}`", a.origin, a.value));
    a.value
        .split([',', ' '])
        .filter(|s| !s.is_empty())
        .map(|triple| {
            let v: Vec<f64> = triple.split(':').map(|x| x.parse().map_err(|_| bad())).collect::<Result<_>>()?;
            match v[..] {
                [t, bl, bh] => Ok(Breakpoint::new(t, bl, bh)),
                _ => Err(bad()),
            }
        })
        .collect()
}

/// Parses a config file followed by command-line overrides.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut all = file_assignments(text, 0)?;
    for o in overrides {
        let origin = format!("argument `{o}`");
        let (key, value) = split_assignment(o, &origin)?;
        all.push(Assignment { key, value, origin, layer: 1 });
    }
    build(&all)
}

fn build(all: &[Assignment]) -> Result<ExperimentConfig> {
    let last = |key: &str| all.iter().rev().find(|a| a.key == key);
    for layer in 0..2 {
        let in_layer = |k: &str| all.iter().find(|a| a.layer == layer && a.key == k);
        if let (Some(d), Some(_)) = (in_layer("data_dir"), in_layer("synthetic")) {
            return Err(Error::Config(format!("{}: data_dir and synthetic are mutually exclusive", d.origin)));
        }
    }
    let mut cfg = ExperimentConfig::default();
    let g = &mut cfg.gan;
    if let Some(a) = last("image_size") {
        g.image_size = parse_num(a)?;
    }
    if let Some(a) = last("latent_dim") {
        g.latent_dim = parse_num(a)?;
    }
    if let Some(a) = last("base_channels") {
        g.base_channels = parse_num(a)?;
    }
    if let Some(a) = last("loss") {
        g.loss = a.value.parse::<LossKind>().map_err(|e| Error::Config(format!("{}: {e}", a.origin)))?;
    }
    if let Some(a) = last("lr") {
        g.lr = parse_num(a)?;
    }
    if let Some(a) = last("beta1") {
        g.beta1 = parse_num(a)?;
    }
    if let Some(a) = last("beta2") {
        g.beta2 = parse_num(a)?;
    }
    if let Some(a) = last("batch_size") {
        g.batch_size = parse_num(a)?;
    }
    if let Some(a) = last("epochs") {
        g.epochs = parse_num(a)?;
    }
    if let Some(a) = last("clip") {
        g.clip = parse_num(a)?;
    }
    if let Some(a) = last("seed") {
        g.seed = parse_num(a)?;
    }
    g.conv = conv_kind(last("conv"), last("alpha"), last("schedule"), last("schedule_points"))?;
    if let Some(a) = last("eval_samples") {
        cfg.eval_samples = parse_num(a)?;
    }
    if let Some(a) = last("out_dir") {
        cfg.out_dir = PathBuf::from(&a.value);
    }
    let data = all.iter().rev().find(|a| a.key == "data_dir" || a.key == "synthetic");
    if let Some(a) = data {
        cfg.data = if a.key == "data_dir" {
            DataSource::Directory(PathBuf::from(&a.value))
        } else {
            DataSource::Synthetic(a.value.parse().map_err(|e| Error::Config(format!("{}: {e}", a.origin)))?)
        };
    }
    cfg.gan.validate()?;
    if cfg.eval_samples < 2 {
        return Err(Error::Config("eval_samples must be at least 2".into()));
    }
    if cfg.gan.epochs == 0 {
        return Err(Error::Config("epochs must be at least 1".into()));
    }
    Ok(cfg)
}

fn conv_kind(
    conv: Option<&Assignment>,
    alpha: Option<&Assignment>,
    schedule: Option<&Assignment>,
    points: Option<&Assignment>,
) -> Result<ConvKind> {
    let name = conv.map_or("standard", |a| a.value.as_str());
    let contradiction =
        |a: &Assignment, why: &str| Err(Error::Config(format!("{}: `{}` contradicts conv={name}: {why}", a.origin, a.key)));
    match name {
        "standard" | "octave" => {
            if let Some(a) = schedule.or(points) {
                return contradiction(a, "schedules only apply to soft_octave");
            }
            if name == "standard" {
                return match alpha {
                    Some(a) => contradiction(a, "standard convolution has no split"),
                    None => Ok(ConvKind::Standard),
                };
            }
            let alpha = alpha.map(parse_num).transpose()?.unwrap_or(0.5);
            if !(0.0..=1.0).contains(&alpha) {
                return Err(Error::Config(format!("alpha must lie in [0, 1], got {alpha}")));
            }
            Ok(ConvKind::Octave { alpha })
        }
        "soft_octave" => {
            if let Some(a) = alpha {
                if parse_num::<f64>(a)? != SOFT_OCTAVE_ALPHA {
                    return contradiction(a, "the soft octave split is fixed at 0.5");
                }
            }
            let kind = match schedule {
                Some(a) => a.value.parse::<ScheduleKind>().map_err(|e| Error::Config(format!("{}: {e}", a.origin)))?,
                None => ScheduleKind::Combination,
            };
            let schedule = match points {
                Some(a) => BetaSchedule::with_points(kind, parse_points(a)?)
                    .map_err(|e| Error::Config(format!("{}: {e}", a.origin)))?,
                None => BetaSchedule::new(kind),
            };
            Ok(ConvKind::SoftOctave { schedule })
        }
        other => Err(Error::Config(format!(
            "{}: unknown conv `{other}` (expected standard, octave or soft_octave)",
            conv.map_or("default".into(), |a| a.origin.clone())
        ))),
    }
}

/// Canonical text form; parsing it yields the same config.
pub fn print_config(cfg: &ExperimentConfig) -> String {
    let g = &cfg.gan;
    let mut s = String::new();
    let mut kv = |k: &str, v: &dyn std::fmt::Display| {
        let _ = writeln!(s, "{k}={v}");
    };
    kv("image_size", &g.image_size);
    kv("latent_dim", &g.latent_dim);
    kv("base_channels", &g.base_channels);
    kv("loss", &g.loss);
    kv("conv", &g.conv.name());
    match &g.conv {
        ConvKind::Standard => {}
        ConvKind::Octave { alpha } => kv("alpha", alpha),
        ConvKind::SoftOctave { schedule } => {
            kv("schedule", &schedule.kind());
            let pts: Vec<String> =
                schedule.points().iter().map(|p| format!("{}:{}:{}", p.t, p.beta_low, p.beta_high)).collect();
            kv("schedule_points", &pts.join(","));
        }
    }
    kv("lr", &g.lr);
    kv("beta1", &g.beta1);
    kv("beta2", &g.beta2);
    kv("batch_size", &g.batch_size);
    kv("epochs", &g.epochs);
    kv("clip", &g.clip);
    kv("seed", &g.seed);
    kv("eval_samples", &cfg.eval_samples);
    match &cfg.data {
        DataSource::Directory(p) => kv("data_dir", &p.display()),
        DataSource::Synthetic(spec) => kv("synthetic", spec),
    }
    kv("out_dir", &cfg.out_dir.display());
    s
}
