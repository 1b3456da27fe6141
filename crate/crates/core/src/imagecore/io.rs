//! PNG and binary PGM (P5) reading and writing.

use std::path::Path;

use image::{ImageFormat, Luma};

use super::GrayImage;
use crate::error::{Error, Result};
use crate::scalar::Real;

fn codec(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Codec {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn format_for(path: &Path) -> Result<ImageFormat> {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .as_deref()
    {
        Some("png") => Ok(ImageFormat::Png),
        Some("pgm") | Some("pnm") => Ok(ImageFormat::Pnm),
        _ => Err(codec(path, "unsupported extension (expected .png or .pgm)")),
    }
}

/// Load an 8-bit grayscale image. Color inputs are converted to luma.
pub fn load_gray<T: Real>(path: impl AsRef<Path>) -> Result<GrayImage<T>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let fmt = format_for(path)?;
    let dynimg = image::load_from_memory_with_format(&bytes, fmt).map_err(|e| codec(path, e))?;
    let luma = dynimg.to_luma8();
    GrayImage::from_u8(luma.width() as usize, luma.height() as usize, luma.as_raw())
}

/// Write an 8-bit grayscale buffer, format chosen by extension.
pub fn save_luma8(path: impl AsRef<Path>, width: usize, height: usize, data: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let fmt = format_for(path)?;
    let buf = image::ImageBuffer::<Luma<u8>, _>::from_raw(width as u32, height as u32, data.to_vec())
        .ok_or_else(|| codec(path, "buffer size does not match dimensions"))?;
    match fmt {
        ImageFormat::Pnm => {
            let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
            let mut w = std::io::BufWriter::new(file);
            let enc = image::codecs::pnm::PnmEncoder::new(&mut w).with_subtype(
                image::codecs::pnm::PnmSubtype::Graymap(image::codecs::pnm::SampleEncoding::Binary),
            );
            buf.write_with_encoder(enc).map_err(|e| codec(path, e))
        }
        _ => buf.save_with_format(path, fmt).map_err(|e| codec(path, e)),
    }
}

/// Quantize and write an image (PNG or P5 PGM by extension).
pub fn save_gray<T: Real>(path: impl AsRef<Path>, img: &GrayImage<T>) -> Result<()> {
    save_luma8(path, img.width(), img.height(), &img.to_u8())
}

/// Write a boolean mask as PNG/PGM with 255 for set pixels.
pub fn save_mask(path: impl AsRef<Path>, width: usize, height: usize, mask: &[bool]) -> Result<()> {
    let data: Vec<u8> = mask.iter().map(|&m| if m { 255 } else { 0 }).collect();
    save_luma8(path, width, height, &data)
}

/// Write an interleaved RGB buffer as PNG.
pub fn save_rgb_png(path: impl AsRef<Path>, width: usize, height: usize, rgb: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let buf = image::RgbImage::from_raw(width as u32, height as u32, rgb.to_vec())
        .ok_or_else(|| codec(path, "buffer size does not match dimensions"))?;
    buf.save_with_format(path, ImageFormat::Png).map_err(|e| codec(path, e))
}

/// Load an 8-bit single-channel buffer without intensity interpretation
/// (used for label masks).
pub fn load_luma8(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<u8>)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let fmt = format_for(path)?;
    let luma = image::load_from_memory_with_format(&bytes, fmt)
        .map_err(|e| codec(path, e))?
        .to_luma8();
    Ok((luma.width() as usize, luma.height() as usize, luma.into_raw()))
}
