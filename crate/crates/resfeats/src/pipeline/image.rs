//! In-memory RGB image and the geometric primitives behind preprocessing
//! and augmentation. Pixel values are f32 in [0, 255], interleaved RGB,
//! row-major; interpolated results keep fractional values until encoded.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    /// Interleaved RGB, length = width · height · 3.
    pub data: Vec<f32>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidGeometry(format!(
                "image extent {width}×{height} must be positive"
            )));
        }
        if data.len() != width * height * 3 {
            return Err(Error::ShapeMismatch(format!(
                "{} values cannot fill a {width}×{height} RGB image",
                data.len()
            )));
        }
        Ok(RgbImage { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Self::new(width, height, data)
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Bilinear sample at fractional coordinates, clamped to the border
    /// (border-replicate semantics).
    fn sample(&self, x: f64, y: f64, c: usize) -> f64 {
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        let x = x.clamp(0.0, max_x);
        let y = y.clamp(0.0, max_y);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let at = |xx: usize, yy: usize| self.data[(yy * self.width + xx) * 3 + c] as f64;
        let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
        let bot = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
        top * (1.0 - fy) + bot * fy
    }
}

/// Bilinear resize with half-pixel-centered sampling: destination pixel
/// centers map to src = (dst + 0.5)·scale − 0.5. A 2×2 → 1×1 resize
/// therefore averages all four pixels.
pub fn resize(img: &RgbImage, width: usize, height: usize) -> Result<RgbImage> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidGeometry("resize target must be positive".into()));
    }
    let sx = img.width as f64 / width as f64;
    let sy = img.height as f64 / height as f64;
    let mut data = vec![0.0f32; width * height * 3];
    for y in 0..height {
        let src_y = (y as f64 + 0.5) * sy - 0.5;
        for x in 0..width {
            let src_x = (x as f64 + 0.5) * sx - 0.5;
            for c in 0..3 {
                data[(y * width + x) * 3 + c] = img.sample(src_x, src_y, c) as f32;
            }
        }
    }
    RgbImage::new(width, height, data)
}

pub fn crop(img: &RgbImage, x: usize, y: usize, width: usize, height: usize) -> Result<RgbImage> {
    if width == 0 || height == 0 || x + width > img.width || y + height > img.height {
        return Err(Error::InvalidGeometry(format!(
            "crop {width}×{height}+{x}+{y} exceeds {}×{} image",
            img.width, img.height
        )));
    }
    let mut data = Vec::with_capacity(width * height * 3);
    for yy in y..y + height {
        let start = (yy * img.width + x) * 3;
        data.extend_from_slice(&img.data[start..start + width * 3]);
    }
    RgbImage::new(width, height, data)
}

/// Horizontal mirror; an exact permutation of pixels, so applying it
/// twice is the identity bit for bit.
pub fn mirror(img: &RgbImage) -> RgbImage {
    let mut data = vec![0.0f32; img.data.len()];
    for y in 0..img.height {
        for x in 0..img.width {
            let src = (y * img.width + x) * 3;
            let dst = (y * img.width + (img.width - 1 - x)) * 3;
            data[dst..dst + 3].copy_from_slice(&img.data[src..src + 3]);
        }
    }
    RgbImage { width: img.width, height: img.height, data }
}

/// Rotates image content by `degrees` counterclockwise about the image
/// center, same output size, bilinear sampling, border-replicated.
pub fn rotate(img: &RgbImage, degrees: f64) -> RgbImage {
    let theta = degrees.to_radians();
    let (sin, cos) = theta.sin_cos();
    let cx = (img.width as f64 - 1.0) / 2.0;
    let cy = (img.height as f64 - 1.0) / 2.0;
    let mut data = vec![0.0f32; img.data.len()];
    for y in 0..img.height {
        for x in 0..img.width {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            // Inverse map: rotate the destination offset by −θ. Screen
            // y grows downward, so visual CCW is math-convention −θ.
            let sx = cos * dx - sin * dy + cx;
            let sy = sin * dx + cos * dy + cy;
            for c in 0..3 {
                data[(y * img.width + x) * 3 + c] = img.sample(sx, sy, c) as f32;
            }
        }
    }
    RgbImage { width: img.width, height: img.height, data }
}

#[derive(Debug, Clone)]
pub struct PreprocessConfig {
    /// Square resize target; networks built here accept any size ≥ 32.
    pub size: usize,
    /// Per-channel means subtracted after scaling pixels to [0, 1].
    pub mean: [f32; 3],
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self { size: 224, mean: [0.485, 0.456, 0.406] }
    }
}

/// Resize to size×size, scale to [0, 1], subtract per-channel means;
/// output is planar [3, size, size].
pub fn preprocess(img: &RgbImage, cfg: &PreprocessConfig) -> Result<Tensor> {
    if img.width < 8 || img.height < 8 {
        return Err(Error::UnreadableImage(format!(
            "image {}×{} smaller than the 8×8 minimum",
            img.width, img.height
        )));
    }
    if cfg.size == 0 {
        return Err(Error::InvalidConfig("preprocess size must be positive".into()));
    }
    let resized = if img.width == cfg.size && img.height == cfg.size {
        img.clone()
    } else {
        resize(img, cfg.size, cfg.size)?
    };
    let hw = cfg.size * cfg.size;
    let mut data = vec![0.0f32; 3 * hw];
    for i in 0..hw {
        for c in 0..3 {
            data[c * hw + i] = resized.data[i * 3 + c] / 255.0 - cfg.mean[c];
        }
    }
    Tensor::new(vec![3, cfg.size, cfg.size], data)
}
