//! Image files: grayscale inputs, label-code maps and 16-bit instance maps.

use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma};
use thiserror::Error;

use crate::boxgt::{LabelClass, LabelMap};
use crate::raster::{GrayImage, Mask, Raster};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Fs {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub const IMAGE_EXTENSIONS: [&str; 2] = ["png", "pgm"];

/// Loads any image as grayscale intensities in `[0, 1]`.
pub fn load_gray(path: &Path) -> Result<GrayImage, IoError> {
    let img = image::open(path).map_err(|source| IoError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = match img {
        DynamicImage::ImageLuma16(buf) => buf.into_raw().into_iter().map(|v| v as f64 / 65535.0).collect(),
        other => other.into_luma8().into_raw().into_iter().map(|v| v as f64 / 255.0).collect(),
    };
    Ok(GrayImage::from_vec(w, h, data))
}

pub fn save_gray8(image: &GrayImage, path: &Path) -> Result<(), IoError> {
    let data = image.as_slice().iter().map(|&v| crate::imageops::to_u8(v)).collect();
    save_u8(image.width(), image.height(), data, path)
}

fn save_u8(w: usize, h: usize, data: Vec<u8>, path: &Path) -> Result<(), IoError> {
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> = ImageBuffer::from_raw(w as u32, h as u32, data).expect("sized buffer");
    buf.save(path).map_err(|source| IoError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// 8-bit codes: 0 background, 1 object, 255 ignore.
pub fn save_label_map(labels: &LabelMap, path: &Path) -> Result<(), IoError> {
    save_u8(labels.width(), labels.height(), labels.codes(), path)
}

pub fn load_label_map(path: &Path) -> Result<LabelMap, IoError> {
    let img = image::open(path).map_err(|source| IoError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let DynamicImage::ImageLuma8(buf) = img else {
        return Err(IoError::Format {
            path: path.to_path_buf(),
            message: "label map must be 8-bit single channel".into(),
        });
    };
    let (w, h) = (buf.width() as usize, buf.height() as usize);
    let classes = buf
        .into_raw()
        .into_iter()
        .map(LabelClass::from_code)
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| IoError::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    Ok(LabelMap::from_vec(w, h, classes))
}

/// 16-bit instance labels, 0 for background.
pub fn save_instance_labels(labels: &Raster<u32>, path: &Path) -> Result<(), IoError> {
    let data: Vec<u16> = labels.as_slice().iter().map(|&v| v.min(u16::MAX as u32) as u16).collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(labels.width() as u32, labels.height() as u32, data).expect("sized buffer");
    buf.save(path).map_err(|source| IoError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Raw integer values of a single-channel 8- or 16-bit image.
pub fn load_instance_labels(path: &Path) -> Result<Raster<u32>, IoError> {
    let img = image::open(path).map_err(|source| IoError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<u32> = match img {
        DynamicImage::ImageLuma8(buf) => buf.into_raw().into_iter().map(u32::from).collect(),
        DynamicImage::ImageLuma16(buf) => buf.into_raw().into_iter().map(u32::from).collect(),
        _ => {
            return Err(IoError::Format {
                path: path.to_path_buf(),
                message: "expected an 8- or 16-bit single-channel image".into(),
            })
        }
    };
    Ok(Raster::from_vec(w, h, data))
}

pub fn labels_to_mask(labels: &Raster<u32>) -> Mask {
    labels.map(|&v| v != 0)
}

/// Image files (by extension) in `dir`, sorted by file name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>, IoError> {
    let rd = std::fs::read_dir(dir).map_err(|source| IoError::Fs {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut out: Vec<PathBuf> = rd
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    out.sort();
    Ok(out)
}

pub fn image_id(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

pub fn ensure_dir(dir: &Path) -> Result<(), IoError> {
    std::fs::create_dir_all(dir).map_err(|source| IoError::Fs {
        path: dir.to_path_buf(),
        source,
    })
}
