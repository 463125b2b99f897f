//! Loading source images from directories and writing previews.

use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma};
use ndarray::{Array2, Array3};

use crate::dataset::SourceImage;
use crate::error::{Error, Result};
use crate::kspace::ComplexImage;
use crate::sr::HrImage;

fn sorted_entries(dir: &Path, extensions: &[&str]) -> Result<Vec<PathBuf>> {
    let rd = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in rd {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if matches!(ext, Some(ref e) if extensions.contains(&e.as_str())) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn open(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Grayscale raster as `[0, 1]` intensities (8- and 16-bit inputs).
pub fn load_grayscale(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let gray = open(path)?.into_luma16();
    let (w, h) = gray.dimensions();
    Ok(Array2::from_shape_fn((h as usize, w as usize), |(r, c)| {
        f64::from(gray.get_pixel(c as u32, r as u32)[0]) / 65535.0
    }))
}

/// Loads one source image: a PNG raster or a `.raw` complex array.
pub fn load_source(path: impl AsRef<Path>) -> Result<ComplexImage> {
    let path = path.as_ref();
    let is_raw = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("raw"));
    if is_raw {
        ComplexImage::new(crate::rawio::read_complex(path)?)
    } else {
        ComplexImage::from_real(&load_grayscale(path)?)
    }
}

/// Every `.png` and `.raw` file in `dir`, sorted by name; ids are file stems.
pub fn load_source_dir(dir: impl AsRef<Path>) -> Result<Vec<SourceImage>> {
    let dir = dir.as_ref();
    let paths = sorted_entries(dir, &["png", "raw"])?;
    if paths.is_empty() {
        return Err(Error::Empty(format!("no .png or .raw images in {}", dir.display())));
    }
    paths
        .iter()
        .map(|p| {
            Ok(SourceImage {
                id: stem(p),
                image: load_source(p)?,
            })
        })
        .collect()
}

/// HR images for super-resolution: colour PNGs keep 3 channels, grayscale ones 1.
pub fn load_hr_dir(dir: impl AsRef<Path>) -> Result<Vec<HrImage>> {
    let dir = dir.as_ref();
    let paths = sorted_entries(dir, &["png"])?;
    if paths.is_empty() {
        return Err(Error::Empty(format!("no .png images in {}", dir.display())));
    }
    paths
        .iter()
        .map(|p| {
            let img = open(p)?;
            let planes = if img.color().has_color() {
                let rgb = img.into_rgb16();
                let (w, h) = rgb.dimensions();
                Array3::from_shape_fn((3, h as usize, w as usize), |(ch, r, c)| {
                    f64::from(rgb.get_pixel(c as u32, r as u32)[ch]) / 65535.0
                })
            } else {
                let g = img.into_luma16();
                let (w, h) = g.dimensions();
                Array3::from_shape_fn((1, h as usize, w as usize), |(_, r, c)| {
                    f64::from(g.get_pixel(c as u32, r as u32)[0]) / 65535.0
                })
            };
            Ok(HrImage { id: stem(p), planes })
        })
        .collect()
}

/// Writes a 16-bit grayscale PNG; values are clamped to `[0, 1]`.
pub fn save_grayscale(path: impl AsRef<Path>, img: &Array2<f64>) -> Result<()> {
    let path = path.as_ref();
    let (h, w) = img.dim();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_fn(w as u32, h as u32, |c, r| {
        Luma([(img[[r as usize, c as usize]].clamp(0.0, 1.0) * 65535.0).round() as u16])
    });
    buf.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}
