//! The training driver behind `train`: per-epoch evaluation, sample grids,
//! CSV log and checkpoints.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::checkpoint::save_checkpoint;
use super::config::{print_config, ExperimentConfig};
use super::dataset::ImageDataset;
use super::image::{sample_grid, write_image};
use super::record::csv;
use crate::error::{Error, Result};
use crate::gan::{generate, train_epoch, EpochRecord, TrainState};
use crate::metrics::{
    extract_features, fit_stats, power_spectrum_1d, spectrum_distance, Band, FeatureExtractor, FidReference,
    SpectrumProfile,
};
use crate::tensor::Tensor;

pub const CSV_FILE: &str = "metrics.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.sogc";
pub const CONFIG_FILE: &str = "config.txt";
const GRID_COLS: usize = 8;

/// Offset mixed into the run seed for the fixed evaluation latents.
const EVAL_SEED_OFFSET: u64 = 0xE7A1;

/// Maps `[-1, 1]` pixels to `[0, 1]` intensities, the space spectra are taken in.
pub fn to_unit(images: &Tensor<f32>) -> Tensor<f32> {
    images.map(|v| (v + 1.0) * 0.5)
}

/// Fixed real-data statistics that every epoch is compared against.
pub struct Evaluator {
    pub reference: FidReference,
    pub real_spectrum: SpectrumProfile,
    pub extractor: FeatureExtractor,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub fid_proxy: f64,
    pub spec_high_dist: f64,
    pub high_band_power: f64,
}

impl Evaluator {
    pub fn new(real: &Tensor<f32>) -> Result<Self> {
        let extractor = FeatureExtractor::DEFAULT;
        let reference = FidReference::new(fit_stats(&extract_features(real, &extractor)?)?)?;
        let real_spectrum = power_spectrum_1d(&to_unit(real))?;
        Ok(Self { reference, real_spectrum, extractor })
    }

    pub fn evaluate(&self, images: &Tensor<f32>) -> Result<Evaluation> {
        let fid_proxy = self.reference.distance(&fit_stats(&extract_features(images, &self.extractor)?)?)?;
        let spectrum = power_spectrum_1d(&to_unit(images))?;
        Ok(Evaluation {
            fid_proxy,
            spec_high_dist: spectrum_distance(&spectrum, &self.real_spectrum, Band::High)?,
            high_band_power: spectrum.high_band_power(),
        })
    }
}

pub fn eval_seed(cfg: &ExperimentConfig) -> u64 {
    cfg.gan.seed.wrapping_add(EVAL_SEED_OFFSET)
}

pub fn sample_path(out_dir: &Path, epoch: usize) -> PathBuf {
    out_dir.join(format!("samples_epoch_{:03}.ppm", epoch + 1))
}

/// Trains from `state` (or from scratch) until `cfg.gan.epochs`, or until
/// `stop_after` epochs are complete. `on_epoch` sees every finished record.
pub fn run_training(
    cfg: &ExperimentConfig,
    state: Option<TrainState<f32>>,
    stop_after: Option<usize>,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainState<f32>> {
    let dataset = ImageDataset::load(&cfg.data, cfg.gan.image_size)?;
    if dataset.count < cfg.gan.batch_size {
        return Err(Error::Dataset(format!(
            "{} images cannot fill one batch of {}",
            dataset.count, cfg.gan.batch_size
        )));
    }
    let mut state = match state {
        Some(s) => s,
        None => TrainState::new(&cfg.gan)?,
    };
    fs::create_dir_all(&cfg.out_dir)?;
    fs::write(cfg.out_dir.join(CONFIG_FILE), print_config(cfg))?;
    let evaluator = Evaluator::new(&dataset.all()?)?;
    let csv_path = cfg.out_dir.join(CSV_FILE);
    fs::write(&csv_path, csv(&state.history))?;

    let end = stop_after.map_or(cfg.gan.epochs, |s| s.min(cfg.gan.epochs));
    while state.epoch < end {
        let start = Instant::now();
        let batches = dataset.batches::<f32>(cfg.gan.seed, state.epoch, cfg.gan.batch_size);
        let mut record = train_epoch(&mut state, batches)?;
        let samples = generate(&mut state.generator, cfg.eval_samples, eval_seed(cfg))?;
        let eval = evaluator.evaluate(&samples)?;
        record.fid_proxy = eval.fid_proxy;
        record.spec_high_dist = eval.spec_high_dist;
        let shown = cfg.eval_samples.min(GRID_COLS * GRID_COLS);
        let grid = sample_grid(samples.data(), shown, cfg.gan.image_size, GRID_COLS);
        write_image(&sample_path(&cfg.out_dir, record.epoch), &grid)?;
        record.seconds = start.elapsed().as_secs_f64();
        state.history.push(record);
        fs::write(&csv_path, csv(&state.history))?;
        save_checkpoint(&state, cfg, &cfg.out_dir.join(CHECKPOINT_FILE))?;
        on_epoch(&record);
    }
    Ok(state)
}
