//! Sixteen-view test-time augmentation: eight base views and their
//! horizontal mirrors.

use crate::error::{Error, Result};
use crate::pipeline::image::{crop, mirror, rotate, RgbImage};

/// Fraction of each side kept by the five crops.
pub const CROP_FRACTION: f64 = 0.875;
/// Rotation magnitude in degrees for the two rotated views.
pub const ROTATION_DEGREES: f64 = 15.0;

/// Returns exactly 16 views in a fixed order: original, four corner
/// crops (top-left, top-right, bottom-left, bottom-right), center crop,
/// rotation +15°, rotation −15°, then the horizontal mirror of each of
/// those eight in the same order. Crops keep 87.5% of each side;
/// rotations keep the full frame with replicated borders.
pub fn augment16(img: &RgbImage) -> Result<Vec<RgbImage>> {
    let cw = (img.width as f64 * CROP_FRACTION).floor() as usize;
    let ch = (img.height as f64 * CROP_FRACTION).floor() as usize;
    if cw == 0 || ch == 0 {
        return Err(Error::InvalidGeometry(format!(
            "image {}×{} too small for {CROP_FRACTION} crops",
            img.width, img.height
        )));
    }
    let rx = img.width - cw;
    let by = img.height - ch;
    let mut views = vec![
        img.clone(),
        crop(img, 0, 0, cw, ch)?,
        crop(img, rx, 0, cw, ch)?,
        crop(img, 0, by, cw, ch)?,
        crop(img, rx, by, cw, ch)?,
        crop(img, rx / 2, by / 2, cw, ch)?,
        rotate(img, ROTATION_DEGREES),
        rotate(img, -ROTATION_DEGREES),
    ];
    for i in 0..8 {
        views.push(mirror(&views[i]));
    }
    Ok(views)
}
