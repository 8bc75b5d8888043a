//! Raw file formats and image export.
//!
//! Image raw format ("REVI"): magic, u32-LE width, u32-LE height, then
//! width*height f64-LE pixels row-major.
//! Sinogram raw format ("REVS"): magic, u32-LE num_views, u32-LE
//! num_detectors, then f64-LE data view-major.
//! PNG export is 16-bit grayscale, linearly mapped from [lo, hi].

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Result, RevError};
use crate::image::Image;
use crate::projector::Sinogram;

const IMAGE_MAGIC: &[u8; 4] = b"REVI";
const SINO_MAGIC: &[u8; 4] = b"REVS";

fn write_raw(
    path: &Path,
    magic: &[u8; 4],
    dim_a: usize,
    dim_b: usize,
    data: &[f64],
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(magic)?;
    w.write_all(&(dim_a as u32).to_le_bytes())?;
    w.write_all(&(dim_b as u32).to_le_bytes())?;
    for v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_raw(path: &Path, magic: &[u8; 4]) -> Result<(usize, usize, Vec<f64>)> {
    let mut r = BufReader::new(File::open(path)?);
    let bad = |reason: &str| RevError::MalformedFile {
        path: path.display().to_string(),
        reason: reason.into(),
    };
    let mut m = [0u8; 4];
    r.read_exact(&mut m).map_err(|_| bad("truncated magic"))?;
    if &m != magic {
        return Err(bad("wrong magic bytes"));
    }
    let mut dim = [0u8; 4];
    r.read_exact(&mut dim).map_err(|_| bad("truncated header"))?;
    let a = u32::from_le_bytes(dim) as usize;
    r.read_exact(&mut dim).map_err(|_| bad("truncated header"))?;
    let b = u32::from_le_bytes(dim) as usize;
    let count = a
        .checked_mul(b)
        .ok_or_else(|| bad("dimension overflow"))?;
    let mut buf = vec![0u8; count * 8];
    r.read_exact(&mut buf).map_err(|_| bad("truncated payload"))?;
    let mut tail = [0u8; 1];
    if r.read(&mut tail)? != 0 {
        return Err(bad("trailing bytes after payload"));
    }
    let data = buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((a, b, data))
}

pub fn write_image_raw(path: impl AsRef<Path>, x: &Image) -> Result<()> {
    write_raw(path.as_ref(), IMAGE_MAGIC, x.width(), x.height(), x.data())
}

pub fn read_image_raw(path: impl AsRef<Path>) -> Result<Image> {
    let (w, h, data) = read_raw(path.as_ref(), IMAGE_MAGIC)?;
    Image::new(w, h, data).map_err(|e| RevError::MalformedFile {
        path: path.as_ref().display().to_string(),
        reason: e.to_string(),
    })
}

pub fn write_sinogram_raw(path: impl AsRef<Path>, s: &Sinogram) -> Result<()> {
    write_raw(
        path.as_ref(),
        SINO_MAGIC,
        s.num_views(),
        s.num_detectors(),
        s.data(),
    )
}

pub fn read_sinogram_raw(path: impl AsRef<Path>) -> Result<Sinogram> {
    let (v, d, data) = read_raw(path.as_ref(), SINO_MAGIC)?;
    Sinogram::new(v, d, data).map_err(|e| RevError::MalformedFile {
        path: path.as_ref().display().to_string(),
        reason: e.to_string(),
    })
}

/// 16-bit grayscale PNG with pixels linearly mapped from [lo, hi].
pub fn write_image_png(path: impl AsRef<Path>, x: &Image, lo: f64, hi: f64) -> Result<()> {
    if !(lo < hi) {
        return Err(RevError::InvalidArgument(format!(
            "invalid display range [{lo}, {hi}]"
        )));
    }
    let scale = 65535.0 / (hi - lo);
    let pixels: Vec<u16> = x
        .data()
        .iter()
        .map(|&v| (((v - lo) * scale).clamp(0.0, 65535.0)).round() as u16)
        .collect();
    let buf: image::ImageBuffer<image::Luma<u16>, Vec<u16>> =
        image::ImageBuffer::from_vec(x.width() as u32, x.height() as u32, pixels)
            .expect("pixel buffer length matches dimensions");
    buf.save(path.as_ref())
        .map_err(|e| RevError::Io(std::io::Error::other(e.to_string())))?;
    Ok(())
}
