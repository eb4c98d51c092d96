use std::path::Path;

use crate::error::{Error, Result};

/// Colour assigned to pixels no Gaussian covers.
pub const BACKGROUND: f64 = 1.0;

/// Row-major `H×W×3` colour buffer with per-pixel depth and accumulated alpha.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedImage {
    pub width: usize,
    pub height: usize,
    pub color: Vec<f64>,
    pub depth: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl RenderedImage {
    pub fn background(width: usize, height: usize, far: f64) -> Self {
        let n = width * height;
        Self { width, height, color: vec![BACKGROUND; 3 * n], depth: vec![far; n], alpha: vec![0.0; n] }
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn rgb(&self, x: usize, y: usize) -> [f64; 3] {
        let o = 3 * (y * self.width + x);
        [self.color[o], self.color[o + 1], self.color[o + 2]]
    }

    pub fn is_finite(&self) -> bool {
        self.color.iter().chain(&self.depth).chain(&self.alpha).all(|v| v.is_finite())
    }

    pub fn write_png(&self, path: impl AsRef<Path>) -> Result<()> {
        write_color_png(&self.color, self.width, self.height, path)
    }
}

/// Saves an `H×W×3` buffer in `[0, 1]` as an 8-bit PNG.
pub fn write_color_png(color: &[f64], width: usize, height: usize, path: impl AsRef<Path>) -> Result<()> {
    if color.len() != 3 * width * height {
        return Err(Error::InvalidInput("colour buffer does not match image size".into()));
    }
    let bytes: Vec<u8> = color.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    let img = image::RgbImage::from_raw(width as u32, height as u32, bytes)
        .ok_or_else(|| Error::Internal("png buffer size mismatch".into()))?;
    img.save(path)?;
    Ok(())
}

/// Raw little-endian float32 encoding used by the guidance wire protocol.
pub fn encode_f32_le(values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 4);
    for v in values {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn decode_f32_le(bytes: &[u8]) -> Result<Vec<f64>> {
    if bytes.len() % 4 != 0 {
        return Err(Error::Parse(format!("float32 block of {} bytes is not a multiple of 4", bytes.len())));
    }
    Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f32_round_trip_and_png() {
        let vals = vec![0.0, 0.25, 1.0, -3.5, 1e-3];
        let back = decode_f32_le(&encode_f32_le(&vals)).unwrap();
        for (a, b) in vals.iter().zip(&back) {
            assert_eq!(*a as f32, *b as f32);
        }
        assert!(decode_f32_le(&[0, 1, 2]).is_err());
        let dir = tempfile::tempdir().unwrap();
        let img = RenderedImage::background(4, 3, 10.0);
        img.write_png(dir.path().join("bg.png")).unwrap();
        let read = image::open(dir.path().join("bg.png")).unwrap().to_rgb8();
        assert_eq!(read.dimensions(), (4, 3));
        assert!(read.pixels().all(|p| p.0 == [255, 255, 255]));
    }
}
