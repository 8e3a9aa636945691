use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use image::DynamicImage;
use serde::de::DeserializeOwned;
use serde::Serialize;

use super::tensor::ImageTensor;
use crate::error::{Error, Result};

/// Reads a PNG or binary PGM into `[0, 1]`, optionally resizing to a
/// `size x size` square with bilinear interpolation.
pub fn load_image(path: &Path, size: Option<usize>) -> Result<ImageTensor> {
    let decoded = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| Error::Decode {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let (channels, data): (usize, Vec<f64>) = match &decoded {
        DynamicImage::ImageLuma8(b) => (1, b.as_raw().iter().map(|&v| v as f64 / 255.0).collect()),
        DynamicImage::ImageLumaA8(_) => {
            let b = decoded.to_luma8();
            (1, b.as_raw().iter().map(|&v| v as f64 / 255.0).collect())
        }
        DynamicImage::ImageLuma16(b) => (1, b.as_raw().iter().map(|&v| v as f64 / 65535.0).collect()),
        DynamicImage::ImageLumaA16(_) => {
            let b = decoded.to_luma16();
            (1, b.as_raw().iter().map(|&v| v as f64 / 65535.0).collect())
        }
        DynamicImage::ImageRgb8(_) | DynamicImage::ImageRgba8(_) => {
            let b = decoded.to_rgb8();
            (3, b.as_raw().iter().map(|&v| v as f64 / 255.0).collect())
        }
        DynamicImage::ImageRgb16(_) | DynamicImage::ImageRgba16(_) => {
            let b = decoded.to_rgb16();
            (3, b.as_raw().iter().map(|&v| v as f64 / 65535.0).collect())
        }
        other => {
            return Err(Error::UnsupportedBitDepth {
                path: path.to_path_buf(),
                depth: format!("{:?}", other.color()),
            })
        }
    };
    let img = ImageTensor::new(h, w, channels, data)?;
    match size {
        Some(s) if s != h || s != w => resize_bilinear(&img, s, s),
        _ => Ok(img),
    }
}

/// Bilinear resampling with half-pixel centers and edge clamping.
pub fn resize_bilinear(img: &ImageTensor, height: usize, width: usize) -> Result<ImageTensor> {
    let (src_h, src_w, channels) = img.shape();
    let scale_y = src_h as f64 / height as f64;
    let scale_x = src_w as f64 / width as f64;
    let coord = |dst: usize, scale: f64, limit: usize| {
        let pos = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (limit - 1) as f64);
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(limit - 1);
        (lo, hi, pos - lo as f64)
    };
    ImageTensor::from_fn(height, width, channels, |y, x, c| {
        let (y0, y1, fy) = coord(y, scale_y, src_h);
        let (x0, x1, fx) = coord(x, scale_x, src_w);
        let top = img.get(y0, x0, c) * (1.0 - fx) + img.get(y0, x1, c) * fx;
        let bottom = img.get(y1, x0, c) * (1.0 - fx) + img.get(y1, x1, c) * fx;
        (top * (1.0 - fy) + bottom * fy).clamp(0.0, 1.0)
    })
}

/// Newline-separated paths, resolved relative to the manifest's directory.
/// Blank lines are skipped.
pub fn load_manifest(path: &Path) -> Result<Vec<PathBuf>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| base.join(l))
        .collect())
}

pub fn write_csv_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_csv_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut reader = csv::Reader::from_path(path)?;
    reader
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
