//! Binary PPM (P6) codec, the only image format decoded natively. Other
//! formats are expected to be pre-converted (e.g. ImageMagick `mogrify
//! -format ppm`). Maxval must fit in one byte.

use std::path::Path;

use crate::error::{Error, Result};
use crate::pipeline::image::RgbImage;

fn bad(path: &Path, what: &str) -> Error {
    Error::UnreadableImage(format!("{}: {what}", path.display()))
}

/// Pulls the next whitespace-delimited token, skipping `#` comments.
fn next_token(bytes: &[u8], pos: &mut usize) -> Option<Vec<u8>> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    if *pos >= bytes.len() {
        return None;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    Some(bytes[start..*pos].to_vec())
}

fn parse_dim(tok: Option<Vec<u8>>, path: &Path, what: &str) -> Result<usize> {
    let tok = tok.ok_or_else(|| bad(path, "truncated header"))?;
    std::str::from_utf8(&tok)
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .ok_or_else(|| bad(path, what))
}

/// Decodes header and pixel data from bytes already in memory.
pub fn decode_ppm_bytes(bytes: &[u8], path: &Path) -> Result<RgbImage> {
    let (w, h, data_at) = decode_header(bytes, path)?;
    let need = w * h * 3;
    let pixels = bytes
        .get(data_at..data_at + need)
        .ok_or_else(|| bad(path, "pixel data shorter than header promises"))?;
    let data = pixels.iter().map(|&b| b as f32).collect();
    Ok(RgbImage::new(w, h, data).expect("extent checked"))
}

/// Header-only probe: (width, height, offset of pixel data).
pub fn decode_header(bytes: &[u8], path: &Path) -> Result<(usize, usize, usize)> {
    let mut pos = 0usize;
    let magic = next_token(bytes, &mut pos).ok_or_else(|| bad(path, "empty file"))?;
    if magic != b"P6" {
        return Err(bad(path, "not a binary PPM (P6) file"));
    }
    let w = parse_dim(next_token(bytes, &mut pos), path, "bad width")?;
    let h = parse_dim(next_token(bytes, &mut pos), path, "bad height")?;
    let maxval = parse_dim(next_token(bytes, &mut pos), path, "bad maxval")?;
    if w == 0 || h == 0 {
        return Err(bad(path, "zero image extent"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(bad(path, "maxval must be in 1..=255"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(bad(path, "missing raster separator"));
    }
    Ok((w, h, pos + 1))
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    decode_ppm_bytes(&bytes, path)
}

/// Validates just the header, cheaply, without reading pixel data into an
/// image. Used by dataset ingestion.
pub fn probe_ppm(path: impl AsRef<Path>) -> Result<(usize, usize)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    let (w, h, data_at) = decode_header(&bytes, path)?;
    if bytes.len() < data_at + w * h * 3 {
        return Err(bad(path, "pixel data shorter than header promises"));
    }
    Ok((w, h))
}

/// Writes an image as P6 with maxval 255; values are rounded and clamped.
pub fn write_ppm(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.data.iter().map(|&v| v.round().clamp(0.0, 255.0) as u8));
    crate::container::write_atomic(path.as_ref(), &out)
}
