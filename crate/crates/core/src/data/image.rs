use std::path::Path;

use image::{ColorType, DynamicImage, ImageBuffer, ImageReader, Luma, Rgb};

use crate::data::DataError;
use crate::tensor::{Element, Shape, Tensor};

/// 8-bit image, row-major, interleaved channels (1 or 3).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    samples: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, samples: Vec<u8>) -> Result<Self, DataError> {
        if channels != 1 && channels != 3 {
            return Err(DataError::Format(format!("{channels} channels (expected 1 or 3)")));
        }
        if samples.len() != width * height * channels {
            return Err(DataError::Format(format!(
                "{width}x{height}x{channels} image needs {} samples, got {}",
                width * height * channels,
                samples.len()
            )));
        }
        Ok(Image { width, height, channels, samples })
    }

    pub fn from_fn_rgb(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        let mut samples = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                samples.extend_from_slice(&f(x, y));
            }
        }
        Image { width, height, channels: 3, samples }
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn channels(&self) -> usize {
        self.channels
    }
    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let i = (y * self.width + x) * self.channels;
        &self.samples[i..i + self.channels]
    }

    /// Sub-image starting at `(x, y)`.
    pub fn crop(&self, x: usize, y: usize, width: usize, height: usize) -> Result<Image, DataError> {
        if x + width > self.width || y + height > self.height {
            return Err(DataError::TooSmall(format!(
                "crop {width}x{height}+{x}+{y} outside {}x{}",
                self.width, self.height
            )));
        }
        let mut samples = Vec::with_capacity(width * height * self.channels);
        for row in y..y + height {
            let start = (row * self.width + x) * self.channels;
            samples.extend_from_slice(&self.samples[start..start + width * self.channels]);
        }
        Ok(Image { width, height, channels: self.channels, samples })
    }

    /// Removes `border` pixels from every side.
    pub fn shave(&self, border: usize) -> Result<Image, DataError> {
        if 2 * border >= self.width || 2 * border >= self.height {
            return Err(DataError::TooSmall(format!(
                "shave of {border} consumes a {}x{} image",
                self.width, self.height
            )));
        }
        self.crop(border, border, self.width - 2 * border, self.height - 2 * border)
    }

    /// Channel `c` as a float plane.
    pub fn plane_f64(&self, c: usize) -> Vec<f64> {
        self.samples.iter().skip(c).step_by(self.channels).map(|&v| v as f64).collect()
    }

    /// Builds an image from float planes in `[0, 255]`, rounding and clamping.
    pub fn from_planes(width: usize, height: usize, planes: &[Vec<f64>]) -> Result<Image, DataError> {
        let channels = planes.len();
        let mut samples = vec![0u8; width * height * channels];
        for (c, plane) in planes.iter().enumerate() {
            for (i, &v) in plane.iter().enumerate() {
                samples[i * channels + c] = quantize(v);
            }
        }
        Image::new(width, height, channels, samples)
    }

    /// `(1, C, H, W)` tensor with samples scaled to `[0, 1]`.
    pub fn to_tensor<T: Element>(&self) -> Tensor<T> {
        let shape = Shape::new(1, self.channels, self.height, self.width);
        let plane = self.width * self.height;
        Tensor::from_fn(shape, |i| {
            let (c, p) = (i / plane, i % plane);
            T::from_f64(self.samples[p * self.channels + c] as f64 / 255.0)
        })
    }

    /// Converts image `n` of a `[0, 1]` tensor, clamping and rounding to 8 bits.
    pub fn from_tensor<T: Element>(t: &Tensor<T>, n: usize) -> Result<Image, DataError> {
        let s = t.shape();
        if n >= s.n() {
            return Err(DataError::Format(format!("batch index {n} out of range for {s}")));
        }
        let planes: Vec<Vec<f64>> =
            (0..s.c()).map(|c| t.plane(n, c).iter().map(|&v| v.to_f64() * 255.0).collect()).collect();
        Image::from_planes(s.w(), s.h(), &planes)
    }
}

/// Rounds to nearest and clamps into `0..=255`.
pub fn quantize(v: f64) -> u8 {
    if v.is_nan() {
        0
    } else {
        v.round().clamp(0.0, 255.0) as u8
    }
}

/// Decodes a PNG (or any format the decoder recognises), converting to RGB.
pub fn load_png(path: impl AsRef<Path>) -> Result<Image, DataError> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|e| DataError::Io(format!("{}: {e}", path.display())))?
        .with_guessed_format()
        .map_err(|e| DataError::Io(format!("{}: {e}", path.display())))?;
    let img = reader.decode().map_err(|e| DataError::Decode(format!("{}: {e}", path.display())))?;
    from_dynamic(img)
}

/// Decodes an in-memory PNG.
pub fn decode_png(bytes: &[u8]) -> Result<Image, DataError> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| DataError::Decode(e.to_string()))?;
    from_dynamic(img)
}

fn from_dynamic(img: DynamicImage) -> Result<Image, DataError> {
    match img.color() {
        ColorType::L8 | ColorType::La8 | ColorType::Rgb8 | ColorType::Rgba8 => {}
        other => return Err(DataError::UnsupportedBitDepth(format!("{other:?}"))),
    }
    let rgb = img.to_rgb8();
    let (w, h) = rgb.dimensions();
    Image::new(w as usize, h as usize, 3, rgb.into_raw())
}

pub fn save_png(image: &Image, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let (w, h) = (image.width as u32, image.height as u32);
    let res = if image.channels == 3 {
        ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, image.samples.clone())
            .expect("sample count checked at construction")
            .save_with_format(path, image::ImageFormat::Png)
    } else {
        ImageBuffer::<Luma<u8>, _>::from_raw(w, h, image.samples.clone())
            .expect("sample count checked at construction")
            .save_with_format(path, image::ImageFormat::Png)
    };
    res.map_err(|e| DataError::Io(format!("{}: {e}", path.display())))
}
