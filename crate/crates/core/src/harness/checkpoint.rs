//! Binary training checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "SOGC" | u32 version | str config | u64 epoch | u64 iteration
//! rng: [u8; 32] seed, u64 stream, u128 word position
//! generator params | discriminator params      (u32 count, then name + blob)
//! generator buffers | discriminator buffers    (u32 count, then name + mean blob + var blob)
//! generator adam | discriminator adam          (u64 step, u32 count, then m blob + v blob)
//! history                                      (u32 count, then 8 × f64 per record)
//! ```
//!
//! A `str` is a u32 byte length followed by UTF-8; a blob is a u32 rank, u64
//! dims and f32 values.

use std::fs;
use std::path::Path;

use super::config::{parse_config, print_config, ExperimentConfig};
use crate::error::{Error, Result};
use crate::gan::{EpochRecord, TrainState};
use crate::optim::AdamState;
use crate::param::ParamStore;
use crate::rng::{Rng, RngState};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"SOGC";
pub const VERSION: u32 = 1;

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }
    fn blob<T: Scalar>(&mut self, shape: &[usize], values: &[T]) {
        self.u32(shape.len() as u32);
        for &d in shape {
            self.u64(d as u64);
        }
        for v in values {
            self.0.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

fn err(field: &'static str, reason: impl Into<String>) -> Error {
    Error::Checkpoint { field, reason: reason.into() }
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, field: &'static str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| err(field, format!("truncated at byte {}", self.bytes.len())))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u32(&mut self, field: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, field)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self, field: &'static str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, field)?.try_into().expect("8 bytes")))
    }
    fn str(&mut self, field: &'static str) -> Result<String> {
        let n = self.u32(field)? as usize;
        String::from_utf8(self.take(n, field)?.to_vec()).map_err(|_| err(field, "invalid UTF-8"))
    }
    fn blob(&mut self, field: &'static str) -> Result<Tensor<f32>> {
        let rank = self.u32(field)? as usize;
        if rank > 8 {
            return Err(err(field, format!("implausible rank {rank}")));
        }
        let shape = (0..rank).map(|_| self.u64(field).map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let count = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| err(field, "size overflow"))?;
        let raw = self.take(count.checked_mul(4).ok_or_else(|| err(field, "size overflow"))?, field)?;
        let data = raw.chunks(4).map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes"))).collect();
        Tensor::new(shape, data).map_err(|e| err(field, e.to_string()))
    }
}

fn write_params<T: Scalar>(w: &mut Writer, store: &ParamStore<T>) {
    w.u32(store.len() as u32);
    for p in store.iter() {
        w.str(&p.name);
        w.blob(p.value.shape(), p.value.data());
    }
}

fn write_adam<T: Scalar>(w: &mut Writer, a: &AdamState<T>) {
    w.u64(a.step);
    w.u32(a.m.len() as u32);
    for (m, v) in a.m.iter().zip(&a.v) {
        w.blob(m.shape(), m.data());
        w.blob(v.shape(), v.data());
    }
}

/// Serialized checkpoint bytes for `state` trained under `cfg`.
pub fn encode_checkpoint<T: Scalar>(state: &TrainState<T>, cfg: &ExperimentConfig) -> Vec<u8> {
    let mut w = Writer(MAGIC.to_vec());
    w.u32(VERSION);
    w.str(&print_config(cfg));
    w.u64(state.epoch as u64);
    w.u64(state.iteration as u64);
    let rng = state.rng.state();
    w.0.extend_from_slice(&rng.seed);
    w.u64(rng.stream);
    w.0.extend_from_slice(&rng.word_pos.to_le_bytes());
    write_params(&mut w, &state.generator.store);
    write_params(&mut w, &state.discriminator.store);
    for stats in [state.generator.running_stats(), state.discriminator.running_stats()] {
        w.u32(stats.len() as u32);
        for (name, s) in stats {
            w.str(&name);
            w.blob(&[s.mean.len()], &s.mean);
            w.blob(&[s.var.len()], &s.var);
        }
    }
    write_adam(&mut w, &state.adam_g);
    write_adam(&mut w, &state.adam_d);
    w.u32(state.history.len() as u32);
    for r in &state.history {
        for v in [r.epoch as f64, r.loss_d, r.loss_g, r.beta_low, r.beta_high, r.fid_proxy, r.spec_high_dist, r.seconds] {
            w.0.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.0
}

fn read_params<T: Scalar>(r: &mut Reader<'_>, store: &mut ParamStore<T>, field: &'static str) -> Result<()> {
    let n = r.u32(field)? as usize;
    if n != store.len() {
        return Err(err(field, format!("expected {} parameters, found {n}", store.len())));
    }
    for p in store.iter_mut() {
        let name = r.str(field)?;
        let blob = r.blob(field)?;
        if name != p.name || blob.shape() != p.value.shape() {
            return Err(err(field, format!("`{name}` {:?} does not match `{}` {:?}", blob.shape(), p.name, p.value.shape())));
        }
        p.value = blob.cast();
    }
    Ok(())
}

fn read_adam<T: Scalar>(r: &mut Reader<'_>, a: &mut AdamState<T>, field: &'static str) -> Result<()> {
    a.step = r.u64(field)?;
    let n = r.u32(field)? as usize;
    if n != a.m.len() {
        return Err(err(field, format!("expected {} moment pairs, found {n}", a.m.len())));
    }
    for (m, v) in a.m.iter_mut().zip(a.v.iter_mut()) {
        for slot in [m, v] {
            let blob = r.blob(field)?;
            if blob.shape() != slot.shape() {
                return Err(err(field, format!("moment shape {:?} vs {:?}", blob.shape(), slot.shape())));
            }
            *slot = blob.cast();
        }
    }
    Ok(())
}

/// Parses checkpoint bytes; nothing is returned unless the whole file is valid.
pub fn decode_checkpoint<T: Scalar>(bytes: &[u8]) -> Result<(TrainState<T>, ExperimentConfig)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(err("magic", "not a checkpoint file"));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(err("version", format!("unsupported format version {version}, expected {VERSION}")));
    }
    let text = r.str("config")?;
    let cfg = parse_config(&text, &[]).map_err(|e| err("config", e.to_string()))?;
    let mut state = TrainState::<T>::new(&cfg.gan).map_err(|e| err("config", e.to_string()))?;
    state.epoch = r.u64("epoch")? as usize;
    state.iteration = r.u64("iteration")? as usize;
    let seed: [u8; 32] = r.take(32, "rng")?.try_into().expect("32 bytes");
    let stream = r.u64("rng")?;
    let word_pos = u128::from_le_bytes(r.take(16, "rng")?.try_into().expect("16 bytes"));
    state.rng = Rng::from_state(RngState { seed, stream, word_pos });
    read_params(&mut r, &mut state.generator.store, "generator parameters")?;
    read_params(&mut r, &mut state.discriminator.store, "discriminator parameters")?;
    for (field, stats) in [
        ("generator buffers", state.generator.running_stats_mut()),
        ("discriminator buffers", state.discriminator.running_stats_mut()),
    ] {
        let n = r.u32(field)? as usize;
        if n != stats.len() {
            return Err(err(field, format!("expected {} buffers, found {n}", stats.len())));
        }
        for (name, s) in stats {
            let found = r.str(field)?;
            if found != name {
                return Err(err(field, format!("`{found}` does not match `{name}`")));
            }
            for slot in [&mut s.mean, &mut s.var] {
                let blob = r.blob(field)?;
                if blob.len() != slot.len() {
                    return Err(err(field, format!("`{name}` has {} values, expected {}", blob.len(), slot.len())));
                }
                *slot = blob.data().iter().map(|&v| T::lit(v as f64)).collect();
            }
        }
    }
    read_adam(&mut r, &mut state.adam_g, "generator optimizer")?;
    read_adam(&mut r, &mut state.adam_d, "discriminator optimizer")?;
    let n = r.u32("history")? as usize;
    for _ in 0..n {
        let mut v = [0.0; 8];
        for x in &mut v {
            *x = f64::from_le_bytes(r.take(8, "history")?.try_into().expect("8 bytes"));
        }
        state.history.push(EpochRecord {
            epoch: v[0] as usize,
            loss_d: v[1],
            loss_g: v[2],
            beta_low: v[3],
            beta_high: v[4],
            fid_proxy: v[5],
            spec_high_dist: v[6],
            seconds: v[7],
        });
    }
    if r.pos != bytes.len() {
        return Err(err("trailer", format!("{} unexpected trailing bytes", bytes.len() - r.pos)));
    }
    Ok((state, cfg))
}

/// Writes through a temporary file so a crash never leaves a torn checkpoint.
pub fn save_checkpoint<T: Scalar>(state: &TrainState<T>, cfg: &ExperimentConfig, path: &Path) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, encode_checkpoint(state, cfg))?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<(TrainState<T>, ExperimentConfig)> {
    decode_checkpoint(&fs::read(path)?)
}
