//! PGM (P5) and PNG image reading and writing.
//!
//! Samples are mapped affinely to `[0, 1]` by `sample / max_sample_value`
//! on read and quantized back with rounding on write.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};

use crate::error::{Error, Result};
use crate::image::ImageGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Pgm,
    Png,
}

impl ImageFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        match ext.as_deref() {
            Some("pgm") => Ok(ImageFormat::Pgm),
            Some("png") => Ok(ImageFormat::Png),
            _ => Err(Error::UnsupportedFormat {
                path: path.to_path_buf(),
                reason: "expected a .pgm or .png extension".into(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BitDepth {
    #[default]
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn max_value(self) -> f64 {
        match self {
            BitDepth::Eight => 255.0,
            BitDepth::Sixteen => 65535.0,
        }
    }
}

fn decode(path: &Path) -> Result<DynamicImage> {
    ImageFormat::from_path(path)?;
    let reader = image::ImageReader::open(path)?
        .with_guessed_format()
        .map_err(|e| Error::Decode {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
    reader.decode().map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn luma_to_grid<P>(width: u32, height: u32, get: P, max: f64) -> Result<ImageGrid>
where
    P: Fn(u32, u32) -> f64,
{
    let (rows, cols) = (height as usize, width as usize);
    let mut data = Vec::with_capacity(rows * cols);
    for c in 0..width {
        for r in 0..height {
            data.push(get(c, r) / max);
        }
    }
    ImageGrid::new(rows, cols, data)
}

/// Reads an 8- or 16-bit grayscale PGM/PNG file.
pub fn read_image(path: &Path) -> Result<(ImageGrid, BitDepth)> {
    match decode(path)? {
        DynamicImage::ImageLuma8(buf) => {
            let grid = luma_to_grid(
                buf.width(),
                buf.height(),
                |x, y| buf.get_pixel(x, y)[0] as f64,
                255.0,
            )?;
            Ok((grid, BitDepth::Eight))
        }
        DynamicImage::ImageLuma16(buf) => {
            let grid = luma_to_grid(
                buf.width(),
                buf.height(),
                |x, y| buf.get_pixel(x, y)[0] as f64,
                65535.0,
            )?;
            Ok((grid, BitDepth::Sixteen))
        }
        other => Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: format!("expected grayscale, found {:?}", other.color()),
        }),
    }
}

/// Reads an RGB (or RGBA, alpha dropped) image into three channel grids.
/// Grayscale files are rejected.
pub fn read_rgb(path: &Path) -> Result<[ImageGrid; 3]> {
    let img = decode(path)?;
    if !img.color().has_color() {
        return Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: "expected a color image, found grayscale".into(),
        });
    }
    let (max, buf) = match img {
        DynamicImage::ImageRgb16(_) | DynamicImage::ImageRgba16(_) => {
            (65535.0, img.to_rgb16().pixels().map(|p| p.0.map(f64::from)).collect::<Vec<_>>())
        }
        _ => (255.0, img.to_rgb8().pixels().map(|p| p.0.map(f64::from)).collect()),
    };
    let (rows, cols) = (img.height() as usize, img.width() as usize);
    let channel = |k: usize| {
        let mut data = vec![0.0; rows * cols];
        for (i, px) in buf.iter().enumerate() {
            let (r, c) = (i / cols, i % cols);
            data[c * rows + r] = px[k] / max;
        }
        ImageGrid::new(rows, cols, data)
    };
    Ok([channel(0)?, channel(1)?, channel(2)?])
}

#[inline]
fn quantize(v: f64, max: f64) -> f64 {
    (v.clamp(0.0, 1.0) * max).round()
}

/// Writes a grayscale image; the format is chosen from the extension.
pub fn write_image(path: &Path, grid: &ImageGrid, depth: BitDepth) -> Result<()> {
    match ImageFormat::from_path(path)? {
        ImageFormat::Pgm => write_pgm(path, grid, depth),
        ImageFormat::Png => {
            let (w, h) = (grid.cols() as u32, grid.rows() as u32);
            let max = depth.max_value();
            let img = match depth {
                BitDepth::Eight => DynamicImage::ImageLuma8(ImageBuffer::from_fn(w, h, |x, y| {
                    Luma([quantize(grid.get(y as usize, x as usize), max) as u8])
                })),
                BitDepth::Sixteen => {
                    DynamicImage::ImageLuma16(ImageBuffer::from_fn(w, h, |x, y| {
                        Luma([quantize(grid.get(y as usize, x as usize), max) as u16])
                    }))
                }
            };
            img.save_with_format(path, image::ImageFormat::Png)
                .map_err(|e| Error::Decode {
                    path: path.to_path_buf(),
                    reason: e.to_string(),
                })
        }
    }
}

fn write_pgm(path: &Path, grid: &ImageGrid, depth: BitDepth) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let max = depth.max_value();
    write!(out, "P5\n{} {}\n{}\n", grid.cols(), grid.rows(), max as u32)?;
    for r in 0..grid.rows() {
        for c in 0..grid.cols() {
            let q = quantize(grid.get(r, c), max);
            match depth {
                BitDepth::Eight => out.write_all(&[q as u8])?,
                BitDepth::Sixteen => out.write_all(&(q as u16).to_be_bytes())?,
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Writes three channel grids as an 8-bit RGB PNG.
pub fn write_rgb(path: &Path, channels: &[ImageGrid; 3]) -> Result<()> {
    let (rows, cols) = channels[0].shape();
    for ch in &channels[1..] {
        channels[0].same_shape(ch)?;
    }
    let img = ImageBuffer::from_fn(cols as u32, rows as u32, |x, y| {
        let (r, c) = (y as usize, x as usize);
        Rgb(std::array::from_fn(|k| quantize(channels[k].get(r, c), 255.0) as u8))
    });
    DynamicImage::ImageRgb8(img)
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Decode {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
}
