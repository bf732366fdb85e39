//! Image I/O, colour conversion, bicubic degradation and patch sampling.

mod image;
mod resize;
mod sampler;

pub use self::image::{decode_png, load_png, quantize, save_png, Image};
pub use resize::{axis_taps, bicubic_resize, bicubic_resize_tensor, cubic, resize_plane, Factor, Taps, CUBIC_A};
pub use sampler::{sample_batch, Augment, BatchLoader, PatchBatch, PatchOrigin};

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("io error: {0}")]
    Io(String),
    #[error("decode error: {0}")]
    Decode(String),
    #[error("unsupported bit depth: {0}")]
    UnsupportedBitDepth(String),
    #[error("image too small: {0}")]
    TooSmall(String),
    #[error("zero-size result: {0}")]
    ZeroSize(String),
    #[error("bad image data: {0}")]
    Format(String),
    #[error("empty dataset: {0}")]
    Empty(String),
}

/// A luminance plane in the `[16, 235]` studio range (or raw samples for grayscale input).
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

/// BT.601 studio-swing luma: `Y = 16 + (65.481 R + 128.553 G + 24.966 B) / 255`.
/// Grayscale images are returned unchanged.
pub fn rgb_to_y(img: &Image) -> Plane {
    let data = if img.channels() == 1 {
        img.plane_f64(0)
    } else {
        img.samples()
            .chunks_exact(3)
            .map(|p| 16.0 + (65.481 * p[0] as f64 + 128.553 * p[1] as f64 + 24.966 * p[2] as f64) / 255.0)
            .collect()
    };
    Plane { width: img.width(), height: img.height(), data }
}

/// An aligned low/high resolution pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub lr: Image,
    pub hr: Image,
}

impl TrainingPair {
    pub fn scale(&self) -> usize {
        self.hr.width() / self.lr.width().max(1)
    }
}

/// Crops `hr` to a multiple of `s` and bicubic-downscales it by `1/s`.
pub fn make_pair(hr: &Image, s: usize) -> Result<TrainingPair, DataError> {
    if s == 0 || hr.width() < s || hr.height() < s {
        return Err(DataError::TooSmall(format!("{}x{} image at scale {s}", hr.width(), hr.height())));
    }
    let (w, h) = (hr.width() / s * s, hr.height() / s * s);
    let hr = hr.crop(0, 0, w, h)?;
    let lr = bicubic_resize(&hr, Factor::down(s))?;
    Ok(TrainingPair { lr, hr })
}

/// Lists the images of a dataset directory: the paths in `manifest.txt` (one per
/// line, relative to the directory, `#` comments allowed) or, without a manifest,
/// every `.png` file sorted by name.
pub fn dataset_paths(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, DataError> {
    let dir = dir.as_ref();
    let manifest = dir.join("manifest.txt");
    let paths: Vec<PathBuf> = if manifest.is_file() {
        let text = fs::read_to_string(&manifest).map_err(|e| DataError::Io(format!("{}: {e}", manifest.display())))?;
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| dir.join(l))
            .collect()
    } else {
        let entries = fs::read_dir(dir).map_err(|e| DataError::Io(format!("{}: {e}", dir.display())))?;
        let mut v: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
            .collect();
        v.sort();
        v
    };
    if paths.is_empty() {
        return Err(DataError::Empty(dir.display().to_string()));
    }
    Ok(paths)
}

/// Loads every dataset image and degrades it into a training pair.
pub fn load_pairs(dir: impl AsRef<Path>, s: usize) -> Result<Vec<TrainingPair>, DataError> {
    dataset_paths(dir)?.iter().map(|p| make_pair(&load_png(p)?, s)).collect()
}
