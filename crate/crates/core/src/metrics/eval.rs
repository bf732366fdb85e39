//! Benchmark protocol: degrade each HR image by bicubic 1/s, super-resolve,
//! and score against the HR image and a bicubic-only baseline.

use std::path::{Path, PathBuf};

use crate::data::{bicubic_resize, load_png, make_pair, Factor, Image};
use crate::metrics::{psnr_y, ssim_y, MetricsError, Psnr};
use crate::model::AwsrnModel;
use crate::tensor::Element;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub psnr: Psnr,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageScores {
    pub name: String,
    /// `Err` holds the message for an image that could not be scored.
    pub result: Result<(Scores, Scores), String>,
}

impl ImageScores {
    pub fn model(&self) -> Option<Scores> {
        self.result.as_ref().ok().map(|r| r.0)
    }

    pub fn bicubic(&self) -> Option<Scores> {
        self.result.as_ref().ok().map(|r| r.1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub scale: usize,
    pub shave: usize,
    pub images: Vec<ImageScores>,
}

/// Mean over finite PSNR values; `Identical` when every scored image is identical.
fn mean_scores(it: impl Iterator<Item = Scores>) -> Option<Scores> {
    let all: Vec<Scores> = it.collect();
    if all.is_empty() {
        return None;
    }
    let ssim = all.iter().map(|s| s.ssim).sum::<f64>() / all.len() as f64;
    let finite: Vec<f64> = all.iter().filter_map(|s| match s.psnr {
        Psnr::Db(v) => Some(v),
        Psnr::Identical => None,
    }).collect();
    let psnr = if finite.is_empty() {
        Psnr::Identical
    } else {
        Psnr::Db(finite.iter().sum::<f64>() / finite.len() as f64)
    };
    Some(Scores { psnr, ssim })
}

impl EvalReport {
    pub fn mean_model(&self) -> Option<Scores> {
        mean_scores(self.images.iter().filter_map(ImageScores::model))
    }

    pub fn mean_bicubic(&self) -> Option<Scores> {
        mean_scores(self.images.iter().filter_map(ImageScores::bicubic))
    }

    pub fn failures(&self) -> usize {
        self.images.iter().filter(|i| i.result.is_err()).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("image,psnr,ssim,bicubic_psnr,bicubic_ssim,error\n");
        for img in &self.images {
            match &img.result {
                Ok((m, b)) => out.push_str(&format!("{},{},{:.6},{},{:.6},\n", img.name, m.psnr, m.ssim, b.psnr, b.ssim)),
                Err(e) => out.push_str(&format!("{},,,,,{}\n", img.name, e.replace(',', ";"))),
            }
        }
        out
    }
}

impl std::fmt::Display for EvalReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "scale x{} shave {}", self.scale, self.shave)?;
        writeln!(f, "{:<24} {:>10} {:>8} {:>12} {:>12}", "image", "psnr", "ssim", "bicubic_psnr", "bicubic_ssim")?;
        for img in &self.images {
            match &img.result {
                Ok((m, b)) => writeln!(
                    f,
                    "{:<24} {:>10} {:>8.4} {:>12} {:>12.4}",
                    img.name, m.psnr.to_string(), m.ssim, b.psnr.to_string(), b.ssim
                )?,
                Err(e) => writeln!(f, "{:<24} error: {e}", img.name)?,
            }
        }
        if let (Some(m), Some(b)) = (self.mean_model(), self.mean_bicubic()) {
            writeln!(f, "{:<24} {:>10} {:>8.4} {:>12} {:>12.4}", "mean", m.psnr.to_string(), m.ssim, b.psnr.to_string(), b.ssim)?;
        }
        Ok(())
    }
}

/// Super-resolves an RGB image, clamping and quantizing to 8 bits.
pub fn super_resolve_image<T: Element>(model: &AwsrnModel<T>, lr: &Image) -> Result<Image, MetricsError> {
    let out = model.super_resolve(&lr.to_tensor::<T>())?;
    Ok(Image::from_tensor(&out, 0)?)
}

/// Model and bicubic scores of one HR image. SSIM is computed on the same shaved region as PSNR.
pub fn score_image<T: Element>(model: &AwsrnModel<T>, hr: &Image, shave: usize) -> Result<(Scores, Scores), MetricsError> {
    let s = model.config().scale;
    let pair = make_pair(hr, s)?;
    let sr = super_resolve_image(model, &pair.lr)?;
    let bic = bicubic_resize(&pair.lr, Factor::up(s))?;
    let score = |img: &Image| -> Result<Scores, MetricsError> {
        let psnr = psnr_y(img, &pair.hr, shave)?;
        let ssim = ssim_y(&img.shave(shave)?, &pair.hr.shave(shave)?)?;
        Ok(Scores { psnr, ssim })
    };
    Ok((score(&sr)?, score(&bic)?))
}

/// Scores every image; per-image failures are recorded and the run continues.
pub fn evaluate_paths<T: Element>(model: &AwsrnModel<T>, paths: &[PathBuf], shave: usize) -> EvalReport {
    let images = paths
        .iter()
        .map(|p| {
            let name = p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned());
            let result = load_png(p)
                .map_err(MetricsError::from)
                .and_then(|hr| score_image(model, &hr, shave))
                .map_err(|e| e.to_string());
            ImageScores { name, result }
        })
        .collect();
    EvalReport { scale: model.config().scale, shave, images }
}

pub fn evaluate_dir<T: Element>(model: &AwsrnModel<T>, dir: impl AsRef<Path>, shave: usize) -> Result<EvalReport, MetricsError> {
    let paths = crate::data::dataset_paths(dir)?;
    Ok(evaluate_paths(model, &paths, shave))
}
