use std::fmt;

use thiserror::Error;

/// Loss values at the point where training produced a non-finite number.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceReport {
    pub epoch: usize,
    pub iteration: usize,
    pub loss_d: f64,
    pub loss_g: f64,
}

impl fmt::Display for DivergenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "epoch {} iteration {}: loss_d={} loss_g={}",
            self.epoch, self.iteration, self.loss_d, self.loss_g
        )
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("contract violated: {0}")]
    Contract(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("checkpoint error in field `{field}`: {reason}")]
    Checkpoint { field: &'static str, reason: String },
    #[error("dataset error: {0}")]
    Dataset(String),
    #[error("image error: {0}")]
    Image(String),
    #[error("training diverged at {0}")]
    Divergence(DivergenceReport),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

macro_rules! dim_err {
    ($($arg:tt)*) => { $crate::error::Error::Dimension(format!($($arg)*)) };
}
macro_rules! contract_err {
    ($($arg:tt)*) => { $crate::error::Error::Contract(format!($($arg)*)) };
}
pub(crate) use contract_err;
pub(crate) use dim_err;
