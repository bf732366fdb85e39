//! Separable bicubic resampling.
//!
//! Cubic convolution with `a = -0.5`, half-pixel centre alignment
//! (`src = (dst + 0.5) / scale - 0.5`) and clamped edges. When shrinking, the
//! kernel is stretched by `1 / scale` so every source pixel contributes, as in
//! the usual benchmark degradation.

use crate::data::{DataError, Image};
use crate::tensor::{Element, Shape, Tensor};

pub const CUBIC_A: f64 = -0.5;

/// Cubic convolution kernel.
pub fn cubic(x: f64) -> f64 {
    let a = CUBIC_A;
    let x = x.abs();
    if x <= 1.0 {
        (a + 2.0) * x * x * x - (a + 3.0) * x * x + 1.0
    } else if x < 2.0 {
        a * x * x * x - 5.0 * a * x * x + 8.0 * a * x - 4.0 * a
    } else {
        0.0
    }
}

/// Rational resize factor `num / den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Factor {
    pub num: usize,
    pub den: usize,
}

impl Factor {
    pub fn new(num: usize, den: usize) -> Self {
        Factor { num, den }
    }

    pub fn up(s: usize) -> Self {
        Factor { num: s, den: 1 }
    }

    pub fn down(s: usize) -> Self {
        Factor { num: 1, den: s }
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Output length for an input of `len` pixels (rounded up).
    pub fn apply(self, len: usize) -> usize {
        (len * self.num).div_ceil(self.den.max(1))
    }
}

/// Sampling taps for one output pixel: source indices (already clamped) and normalised weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Taps {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

/// Taps for every output position along one axis.
pub fn axis_taps(in_len: usize, out_len: usize, scale: f64) -> Vec<Taps> {
    let stretch = if scale < 1.0 { scale } else { 1.0 };
    let support = 2.0 / stretch;
    (0..out_len)
        .map(|o| {
            let centre = (o as f64 + 0.5) / scale - 0.5;
            let first = (centre - support).floor() as isize;
            let last = (centre + support).ceil() as isize;
            let mut indices = Vec::new();
            let mut weights = Vec::new();
            for j in first..=last {
                let w = stretch * cubic(stretch * (centre - j as f64));
                if w != 0.0 {
                    indices.push(j.clamp(0, in_len as isize - 1) as usize);
                    weights.push(w);
                }
            }
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            Taps { indices, weights }
        })
        .collect()
}

/// Resizes one `w x h` plane to `out_w x out_h`, rows first then columns.
pub fn resize_plane(src: &[f64], w: usize, h: usize, out_w: usize, out_h: usize, scale: f64) -> Vec<f64> {
    let col_taps = axis_taps(w, out_w, scale);
    let row_taps = axis_taps(h, out_h, scale);
    let mut tmp = vec![0.0; out_w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for (x, t) in col_taps.iter().enumerate() {
            tmp[y * out_w + x] = t.indices.iter().zip(&t.weights).map(|(&i, &wt)| wt * row[i]).sum();
        }
    }
    let mut out = vec![0.0; out_w * out_h];
    for (y, t) in row_taps.iter().enumerate() {
        for x in 0..out_w {
            out[y * out_w + x] = t.indices.iter().zip(&t.weights).map(|(&i, &wt)| wt * tmp[i * out_w + x]).sum();
        }
    }
    out
}

fn output_dims(w: usize, h: usize, factor: Factor) -> Result<(usize, usize), DataError> {
    if factor.num == 0 || factor.den == 0 {
        return Err(DataError::ZeroSize(format!("factor {}/{}", factor.num, factor.den)));
    }
    let (ow, oh) = (factor.apply(w), factor.apply(h));
    if ow == 0 || oh == 0 {
        return Err(DataError::ZeroSize(format!("{w}x{h} by {}/{} gives {ow}x{oh}", factor.num, factor.den)));
    }
    Ok((ow, oh))
}

/// Bicubic resize of an 8-bit image; results are rounded back to 8 bits.
pub fn bicubic_resize(img: &Image, factor: Factor) -> Result<Image, DataError> {
    let (ow, oh) = output_dims(img.width(), img.height(), factor)?;
    let planes: Vec<Vec<f64>> = (0..img.channels())
        .map(|c| resize_plane(&img.plane_f64(c), img.width(), img.height(), ow, oh, factor.value()))
        .collect();
    Image::from_planes(ow, oh, &planes)
}

/// Bicubic resize of every plane of a tensor, without quantisation.
pub fn bicubic_resize_tensor<T: Element>(t: &Tensor<T>, factor: Factor) -> Result<Tensor<T>, DataError> {
    let s = t.shape();
    let (ow, oh) = output_dims(s.w(), s.h(), factor)?;
    let mut data = Vec::with_capacity(s.n() * s.c() * ow * oh);
    for n in 0..s.n() {
        for c in 0..s.c() {
            let plane: Vec<f64> = t.plane(n, c).iter().map(|&v| Element::to_f64(v)).collect();
            data.extend(resize_plane(&plane, s.w(), s.h(), ow, oh, factor.value()).into_iter().map(T::from_f64));
        }
    }
    Tensor::new(Shape::new(s.n(), s.c(), oh, ow), data).map_err(|e| DataError::Format(e.to_string()))
}
