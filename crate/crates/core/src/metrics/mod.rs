//! Quality metrics, complexity accounting, weight inspection and branch pruning.

mod complexity;
mod eval;
mod inspect;
mod prune;
mod quality;

pub use complexity::{analyze, count_multi_adds, count_params, format_giga, format_kilo, ComplexityReport, LayerComplexity, DEFAULT_OUT_SIZE};
pub use eval::{evaluate_dir, evaluate_paths, score_image, super_resolve_image, EvalReport, ImageScores, Scores};
pub use inspect::{inspect_weights, BlockWeights, BranchWeight, UnitWeights, WeightReport};
pub use prune::{prune_branches, PruneError};
pub use quality::{gaussian_taps, psnr_planes, psnr_y, ssim_planes, ssim_y, Psnr, PEAK, SSIM_K1, SSIM_K2, SSIM_SIGMA, SSIM_WINDOW};

use thiserror::Error;

use crate::data::DataError;
use crate::tensor::TensorError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("shave {shave} consumes the whole {width}x{height} image")]
    ShaveTooLarge { shave: usize, width: usize, height: usize },
    #[error("image too small: {0}")]
    TooSmall(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}
