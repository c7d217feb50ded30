//! Data ingestion, configuration, checkpoints and the training driver.

pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod experiment;
pub mod image;
pub mod record;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use config::{parse_config, print_config, ExperimentConfig};
pub use dataset::{DataSource, ImageDataset, SyntheticSpec};
pub use experiment::{run_training, Evaluation, Evaluator};
pub use record::{csv, parse_csv, CSV_HEADER};
