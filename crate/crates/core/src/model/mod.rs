//! The AWSRN family: configuration, parameter layout, forward graph and checkpoints.

mod checkpoint;
mod config;
mod network;

pub use checkpoint::{load_checkpoint, load_checkpoint_as, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointError, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{names, ConvSpec, ModelConfig, ParamRole, ParamSpec, Preset, RuKind, IMAGE_CHANNELS, SUPPORTED_SCALES};
pub use network::AwsrnModel;

use thiserror::Error;

use crate::tensor::TensorError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("parameter registry does not match config: {0}")]
    RegistryMismatch(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}
