//! Training images: a procedural shapes set or a folder of Netpbm files.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::image::{crop_resize, read_image};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Stream tag for per-epoch shuffles; the epoch index is added to it.
const STREAM_SHUFFLE: u64 = 0x5348_0000;

/// `shapes:count:seed[:texture]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub count: usize,
    pub seed: u64,
    /// Amplitude of the per-pixel texture overlay, in `[0, 1]` intensity units.
    pub texture: f64,
}

impl fmt::Display for SyntheticSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "shapes:{}:{}:{}", self.count, self.seed, self.texture)
    }
}

impl FromStr for SyntheticSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("synthetic source `{s}` is not shapes:count:seed[:texture]"));
        let parts: Vec<&str> = s.split(':').collect();
        if !(3..=4).contains(&parts.len()) || parts[0] != "shapes" {
            return Err(bad());
        }
        let count = parts[1].parse().map_err(|_| bad())?;
        let seed = parts[2].parse().map_err(|_| bad())?;
        let texture = match parts.get(3) {
            Some(t) => t.parse().map_err(|_| bad())?,
            None => 0.0,
        };
        if count == 0 || !(0.0..=1.0).contains(&texture) {
            return Err(bad());
        }
        Ok(Self { count, seed, texture })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Directory(PathBuf),
    Synthetic(SyntheticSpec),
}

/// Preprocessed images held in memory as `[count, 3, S, S]` in `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct ImageDataset {
    pub size: usize,
    pub count: usize,
    /// Files in a directory source that could not be decoded.
    pub skipped: usize,
    pixels: Vec<f32>,
}

impl ImageDataset {
    pub fn load(source: &DataSource, size: usize) -> Result<Self> {
        match source {
            DataSource::Synthetic(spec) => Ok(synthetic_shapes(spec, size)),
            DataSource::Directory(dir) => load_dir(dir, size),
        }
    }

    fn plane(&self) -> usize {
        3 * self.size * self.size
    }

    /// Images `[start, start + len)` as a tensor.
    pub fn slice<T: Scalar>(&self, start: usize, len: usize) -> Result<Tensor<T>> {
        if start + len > self.count {
            return Err(Error::Dataset(format!("images {start}..{} out of {}", start + len, self.count)));
        }
        let p = self.plane();
        let data = self.pixels[start * p..(start + len) * p].iter().map(|&v| T::lit(v as f64)).collect();
        Tensor::new(vec![len, 3, self.size, self.size], data)
    }

    pub fn all<T: Scalar>(&self) -> Result<Tensor<T>> {
        self.slice(0, self.count)
    }

    /// Shuffled full batches for `epoch`; a trailing partial batch is dropped.
    pub fn batches<T: Scalar>(&self, seed: u64, epoch: usize, batch: usize) -> Vec<Tensor<T>> {
        let mut order: Vec<usize> = (0..self.count).collect();
        Rng::derived(seed, STREAM_SHUFFLE + epoch as u64).shuffle(&mut order);
        let p = self.plane();
        order
            .chunks_exact(batch)
            .map(|idx| {
                let data = idx.iter().flat_map(|&i| &self.pixels[i * p..(i + 1) * p]).map(|&v| T::lit(v as f64)).collect();
                Tensor::new(vec![batch, 3, self.size, self.size], data).expect("sized by construction")
            })
            .collect()
    }
}

fn load_dir(dir: &Path, size: usize) -> Result<ImageDataset> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::Dataset(format!("cannot read {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    let (mut pixels, mut count, mut skipped) = (Vec::new(), 0, 0);
    for path in &paths {
        let Ok(img) = read_image(path) else {
            skipped += 1;
            continue;
        };
        let img = crop_resize(&img, size);
        for c in 0..3 {
            for y in 0..size {
                for x in 0..size {
                    pixels.push(img.get(x, y, c) * 2.0 - 1.0);
                }
            }
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::Dataset(format!("no usable images in {} ({skipped} skipped)", dir.display())));
    }
    if skipped > 0 {
        eprintln!("warning: skipped {skipped} unreadable file(s) in {}", dir.display());
    }
    Ok(ImageDataset { size, count, skipped, pixels })
}

fn smoothstep(e0: f64, e1: f64, x: f64) -> f64 {
    let t = ((x - e0) / (e1 - e0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

struct Shape {
    ellipse: bool,
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
    cos: f64,
    sin: f64,
    color: [f64; 3],
    shade: (f64, f64),
}

impl Shape {
    fn random(rng: &mut Rng, size: f64) -> Self {
        let angle = rng.uniform_range(0.0, std::f64::consts::PI);
        Self {
            ellipse: rng.uniform() < 0.5,
            cx: rng.uniform_range(0.25, 0.75) * size,
            cy: rng.uniform_range(0.25, 0.75) * size,
            a: rng.uniform_range(0.12, 0.35) * size,
            b: rng.uniform_range(0.12, 0.35) * size,
            cos: angle.cos(),
            sin: angle.sin(),
            color: [rng.uniform(), rng.uniform(), rng.uniform()],
            shade: (rng.uniform_range(-0.4, 0.4), rng.uniform_range(-0.4, 0.4)),
        }
    }

    /// Approximate signed distance in pixels, negative inside.
    fn distance(&self, x: f64, y: f64) -> f64 {
        let (dx, dy) = (x - self.cx, y - self.cy);
        let (u, v) = (dx * self.cos + dy * self.sin, -dx * self.sin + dy * self.cos);
        if self.ellipse {
            ((u / self.a).hypot(v / self.b) - 1.0) * self.a.min(self.b)
        } else {
            (u.abs() - self.a).max(v.abs() - self.b)
        }
    }
}

/// Soft-edged ellipses and rectangles with linear shading over a gradient
/// background, plus optional per-pixel texture noise.
pub fn synthetic_shapes(spec: &SyntheticSpec, size: usize) -> ImageDataset {
    let plane = size * size;
    let s = size as f64;
    // Edge transition width scales with resolution so the set stays band-limited.
    let edge = 1.5 * s / 32.0;
    let mut pixels = Vec::with_capacity(spec.count * 3 * plane);
    for i in 0..spec.count {
        let mut rng = Rng::derived(spec.seed, i as u64);
        let bg = [[rng.uniform(), rng.uniform(), rng.uniform()], [rng.uniform(), rng.uniform(), rng.uniform()]];
        let dir = rng.uniform_range(0.0, 2.0 * std::f64::consts::PI);
        let shapes: Vec<Shape> = (0..1 + rng.below(3)).map(|_| Shape::random(&mut rng, s)).collect();
        let mut img = vec![0.0f64; 3 * plane];
        for y in 0..size {
            for x in 0..size {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                let t = 0.5 + ((px / s - 0.5) * dir.cos() + (py / s - 0.5) * dir.sin()) * 0.7;
                let mut rgb = [0.0; 3];
                for c in 0..3 {
                    rgb[c] = bg[0][c] * (1.0 - t) + bg[1][c] * t;
                }
                for sh in &shapes {
                    let cover = 1.0 - smoothstep(-edge, edge, sh.distance(px, py));
                    let shade = 1.0 + sh.shade.0 * (px - sh.cx) / s + sh.shade.1 * (py - sh.cy) / s;
                    for (v, col) in rgb.iter_mut().zip(sh.color) {
                        *v = *v * (1.0 - cover) + (col * shade).clamp(0.0, 1.0) * cover;
                    }
                }
                for c in 0..3 {
                    img[c * plane + y * size + x] = rgb[c];
                }
            }
        }
        if spec.texture > 0.0 {
            for v in img.iter_mut() {
                *v += spec.texture * rng.uniform_range(-1.0, 1.0);
            }
        }
        pixels.extend(img.iter().map(|v| (v.clamp(0.0, 1.0) * 2.0 - 1.0) as f32));
    }
    ImageDataset { size, count: spec.count, skipped: 0, pixels }
}
