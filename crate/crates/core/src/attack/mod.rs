//! Universal perturbation training and the per-image MADC-style attack.

mod adam;
mod dataset;
mod madc;
mod uap;

use crate::imaging::ImagingError;
use crate::metrics::MetricError;

pub use adam::AdamState;
pub use dataset::{DirectorySource, ImageSource};
pub use madc::{madc_attack, MadcConfig, MadcOutcome};
pub use uap::{
    train_uap, train_uap_observed, uap_loss, uap_loss_and_gradient, write_training_log,
    TrainConfig, TrainOutcome, TrainRecord, TRAINING_LOG_HEADER,
};

#[derive(Debug, thiserror::Error)]
pub enum AttackError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
