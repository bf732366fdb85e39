//! PSNR and SSIM on the luma plane.

use std::fmt;

use crate::data::{rgb_to_y, Image, Plane};
use crate::metrics::MetricsError;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
pub const PEAK: f64 = 255.0;

/// PSNR in dB, or `Identical` when the compared planes match exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    Identical,
    Db(f64),
}

impl Psnr {
    /// Value in dB, `+inf` for identical inputs.
    pub fn db(self) -> f64 {
        match self {
            Psnr::Identical => f64::INFINITY,
            Psnr::Db(v) => v,
        }
    }

    pub fn from_db(v: f64) -> Self {
        if v.is_infinite() && v > 0.0 {
            Psnr::Identical
        } else {
            Psnr::Db(v)
        }
    }
}

impl fmt::Display for Psnr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Psnr::Identical => f.write_str("identical"),
            Psnr::Db(v) => write!(f, "{v:.4}"),
        }
    }
}

fn check_dims(a: &Image, b: &Image) -> Result<(), MetricsError> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(MetricsError::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

/// PSNR of two planes after removing `shave` pixels from every border.
pub fn psnr_planes(a: &Plane, b: &Plane, shave: usize) -> Result<Psnr, MetricsError> {
    if 2 * shave >= a.width || 2 * shave >= a.height {
        return Err(MetricsError::ShaveTooLarge { shave, width: a.width, height: a.height });
    }
    let mut se = 0.0;
    let mut count = 0usize;
    for y in shave..a.height - shave {
        for x in shave..a.width - shave {
            let i = y * a.width + x;
            let d = a.data[i] - b.data[i];
            se += d * d;
            count += 1;
        }
    }
    let mse = se / count as f64;
    if mse == 0.0 {
        return Ok(Psnr::Identical);
    }
    Ok(Psnr::Db(10.0 * (PEAK * PEAK / mse).log10()))
}

/// PSNR on the Y channel with a border shave.
pub fn psnr_y(sr: &Image, hr: &Image, shave: usize) -> Result<Psnr, MetricsError> {
    check_dims(sr, hr)?;
    psnr_planes(&rgb_to_y(sr), &rgb_to_y(hr), shave)
}

/// Normalised 1-D Gaussian taps.
pub fn gaussian_taps(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..size).map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Separable valid-region filtering.
fn filter_valid(src: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let (ow, oh) = (w + 1 - k, h + 1 - k);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = taps.iter().enumerate().map(|(t, &c)| c * src[y * w + x + t]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps.iter().enumerate().map(|(t, &c)| c * rows[(y + t) * ow + x]).sum();
        }
    }
    out
}

/// Mean SSIM of two planes with an 11x11 Gaussian window over the valid region.
pub fn ssim_planes(a: &Plane, b: &Plane) -> Result<f64, MetricsError> {
    let (w, h) = (a.width, a.height);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(MetricsError::TooSmall(format!("{w}x{h} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")));
    }
    let taps = gaussian_taps(SSIM_WINDOW, SSIM_SIGMA);
    let c1 = (SSIM_K1 * PEAK).powi(2);
    let c2 = (SSIM_K2 * PEAK).powi(2);
    let prod = |f: fn(f64, f64) -> f64| -> Vec<f64> { a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect() };
    let mu_a = filter_valid(&a.data, w, h, &taps);
    let mu_b = filter_valid(&b.data, w, h, &taps);
    let e_aa = filter_valid(&prod(|x, _| x * x), w, h, &taps);
    let e_bb = filter_valid(&prod(|_, y| y * y), w, h, &taps);
    let e_ab = filter_valid(&prod(|x, y| x * y), w, h, &taps);
    let mut total = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = e_aa[i] - ma * ma;
        let vb = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        let num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
        let den = (ma * ma + mb * mb + c1) * (va + vb + c2);
        total += num / den;
    }
    Ok(total / mu_a.len() as f64)
}

/// SSIM on the Y channel.
pub fn ssim_y(sr: &Image, hr: &Image) -> Result<f64, MetricsError> {
    check_dims(sr, hr)?;
    ssim_planes(&rgb_to_y(sr), &rgb_to_y(hr))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane(w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> Plane {
        Plane { width: w, height: h, data: (0..w * h).map(|i| f(i % w, i / w)).collect() }
    }

    #[test]
    fn unit_mse_is_20_log10_255() {
        let a = plane(8, 8, |x, y| (x * y) as f64);
        let b = plane(8, 8, |x, y| (x * y) as f64 + 1.0);
        let p = psnr_planes(&a, &b, 0).unwrap().db();
        assert!((p - 48.1308).abs() < 1e-4, "{p}");
        assert!((p - 20.0 * 255f64.log10()).abs() < 1e-12);
        assert_eq!(psnr_planes(&a, &a, 2).unwrap(), Psnr::Identical);
        assert!(matches!(psnr_planes(&a, &b, 4), Err(MetricsError::ShaveTooLarge { .. })));
    }

    #[test]
    fn ssim_identity_and_luminance_shift() {
        let a = plane(16, 16, |x, y| ((x * 7 + y * 3) % 50) as f64 + 100.0);
        assert_eq!(ssim_planes(&a, &a).unwrap(), 1.0);
        let c = plane(16, 16, |_, _| 100.0);
        let d = plane(16, 16, |_, _| 160.0);
        let s = ssim_planes(&c, &d).unwrap();
        // contrast/structure terms are C2/C2 = 1 on constants
        let c1 = (SSIM_K1 * PEAK).powi(2);
        let lum = (2.0 * 100.0 * 160.0 + c1) / (100.0f64.powi(2) + 160.0f64.powi(2) + c1);
        assert!(s < 1.0);
        assert!((s - lum).abs() < 1e-9, "{s} vs {lum}");
        assert!(ssim_planes(&plane(10, 20, |_, _| 0.0), &plane(10, 20, |_, _| 0.0)).is_err());
    }

    #[test]
    fn gaussian_is_normalised_and_symmetric() {
        let g = gaussian_taps(11, 1.5);
        assert!((g.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(g[0], g[10]);
    }
}
