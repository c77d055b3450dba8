//! Rough segmentation providers.
//!
//! Downstream stages only ever consume the binarized, labeled components;
//! a provider's job is to hand back a foreground probability per pixel.

use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imageops;
use crate::raster::{GrayImage, Mask, Raster};

pub const DEFAULT_BINARIZE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum SegmenterError {
    #[error("image is empty")]
    EmptyImage,
    #[error("cannot read {path}: {source}")]
    UnreadableFile {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("cannot write {path}: {source}")]
    WriteFailed {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("unsupported pixel format in {path}: expected 8- or 16-bit single channel")]
    UnsupportedFormat { path: PathBuf },
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("probability value {value} at ({col}, {row}) outside [0, 1]")]
    OutOfRange { col: usize, row: usize, value: f64 },
    #[error("no rough segmentation file for image `{0}`")]
    MissingRough(String),
}

/// Foreground probability per pixel, each value in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap(Raster<f64>);

impl ProbabilityMap {
    pub fn new(values: Raster<f64>) -> Result<Self, SegmenterError> {
        if let Some((col, row, &value)) = values
            .iter_indexed()
            .find(|(_, _, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(SegmenterError::OutOfRange { col, row, value });
        }
        Ok(Self(values))
    }

    pub fn from_mask(mask: &Mask) -> Self {
        Self(mask.map(|&b| if b { 1.0 } else { 0.0 }))
    }

    pub fn values(&self) -> &Raster<f64> {
        &self.0
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    pub fn ensure_dims(&self, expected: (usize, usize)) -> Result<(), SegmenterError> {
        if self.dims() != expected {
            return Err(SegmenterError::DimensionMismatch {
                expected,
                found: self.dims(),
            });
        }
        Ok(())
    }
}

/// One labeled connected component of the rough segmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub id: u32,
    pub mask: Mask,
}

impl Component {
    pub fn area(&self) -> usize {
        self.mask.count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoughSegmentation {
    pub foreground: Mask,
    /// Disjoint 8-connected components with ids `1..=n` in raster-scan order.
    pub components: Vec<Component>,
}

impl RoughSegmentation {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            foreground: Mask::filled(width, height, false),
            components: Vec::new(),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.foreground.dims()
    }

    pub fn component(&self, id: u32) -> Option<&Component> {
        self.components.iter().find(|c| c.id == id)
    }

    /// 0 for background, component id elsewhere.
    pub fn label_map(&self) -> Raster<u32> {
        let mut labels = Raster::filled(self.foreground.width(), self.foreground.height(), 0u32);
        for comp in &self.components {
            for (c, r) in comp.mask.pixels() {
                labels.set(c, r, comp.id);
            }
        }
        labels
    }
}

/// Anything that can stand in for the learned rough-segmentation model.
///
/// Implementations must return a map with the image's dimensions and must be
/// callable concurrently on distinct images.
pub trait RoughSegmenter: Send + Sync {
    fn segment(&self, image_id: &str, image: &GrayImage) -> Result<ProbabilityMap, SegmenterError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "lowercase")]
pub enum ThresholdMode {
    Otsu,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub threshold: ThresholdMode,
    pub min_area: usize,
    pub opening_radius: u8,
    /// Gaussian pre-smoothing; 0 disables it.
    pub smoothing_sigma: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            threshold: ThresholdMode::Otsu,
            min_area: 30,
            opening_radius: 1,
            smoothing_sigma: 1.5,
        }
    }
}

/// Classical stand-in: smooth, threshold, open, drop small components.
/// Assumes objects are brighter than the background. The output is 0/1.
pub fn baseline_segment(image: &GrayImage, config: &BaselineConfig) -> Result<ProbabilityMap, SegmenterError> {
    if image.is_empty() {
        return Err(SegmenterError::EmptyImage);
    }
    let smoothed = imageops::gaussian_blur(image, config.smoothing_sigma);
    let fg = match config.threshold {
        ThresholdMode::Fixed(t) => smoothed.map(|&v| v >= t),
        ThresholdMode::Otsu => {
            let t = imageops::otsu_threshold(&smoothed);
            smoothed.map(|&v| v >= t)
        }
    };
    let fg = imageops::open_disk(&fg, config.opening_radius);
    let seg = label_mask(&fg, config.min_area);
    Ok(ProbabilityMap::from_mask(&seg.foreground))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BaselineSegmenter {
    pub config: BaselineConfig,
}

impl RoughSegmenter for BaselineSegmenter {
    fn segment(&self, _image_id: &str, image: &GrayImage) -> Result<ProbabilityMap, SegmenterError> {
        baseline_segment(image, &self.config)
    }
}

/// Reads `<dir>/<image id>.png` (or `.pgm`) as the probability map.
#[derive(Debug, Clone)]
pub struct FileSegmenter {
    pub dir: PathBuf,
}

impl FileSegmenter {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    fn locate(&self, image_id: &str) -> Option<PathBuf> {
        ["png", "pgm"]
            .iter()
            .map(|ext| self.dir.join(format!("{image_id}.{ext}")))
            .find(|p| p.is_file())
    }
}

impl RoughSegmenter for FileSegmenter {
    fn segment(&self, image_id: &str, image: &GrayImage) -> Result<ProbabilityMap, SegmenterError> {
        let path = self
            .locate(image_id)
            .ok_or_else(|| SegmenterError::MissingRough(image_id.to_string()))?;
        let map = import_probability_map(&path)?;
        map.ensure_dims(image.dims())?;
        Ok(map)
    }
}

/// Thresholds at `threshold` (inclusive) and labels 8-connected components,
/// dropping those smaller than `min_area`.
pub fn binarize_and_label(p: &ProbabilityMap, threshold: f64, min_area: usize) -> RoughSegmentation {
    let fg = p.values().map(|&v| v >= threshold && v > 0.0);
    label_mask(&fg, min_area)
}

/// Labels an already binary mask.
pub fn label_mask(fg: &Mask, min_area: usize) -> RoughSegmentation {
    let (w, h) = fg.dims();
    let raw = imageops::label_components(fg);
    // renumber in raster-scan order of first appearance
    let mut remap: std::collections::HashMap<u32, usize> = std::collections::HashMap::new();
    let mut masks: Vec<Mask> = Vec::new();
    for (c, r, &l) in raw.iter_indexed() {
        if l == 0 {
            continue;
        }
        let slot = *remap.entry(l).or_insert_with(|| {
            masks.push(Mask::filled(w, h, false));
            masks.len() - 1
        });
        masks[slot].set(c, r, true);
    }
    let mut foreground = Mask::filled(w, h, false);
    let mut components = Vec::new();
    for mask in masks {
        if mask.count() < min_area.max(1) {
            continue;
        }
        foreground.union_with(&mask);
        components.push(Component {
            id: components.len() as u32 + 1,
            mask,
        });
    }
    RoughSegmentation {
        foreground,
        components,
    }
}

/// Loads an 8- or 16-bit single-channel image as probabilities in `[0, 1]`.
pub fn import_probability_map(path: &Path) -> Result<ProbabilityMap, SegmenterError> {
    let img = image::open(path).map_err(|source| SegmenterError::UnreadableFile {
        path: path.to_path_buf(),
        source,
    })?;
    let values = match img {
        DynamicImage::ImageLuma8(buf) => {
            let (w, h) = buf.dimensions();
            Raster::from_vec(w as usize, h as usize, buf.into_raw().into_iter().map(|v| v as f64 / 255.0).collect())
        }
        DynamicImage::ImageLuma16(buf) => {
            let (w, h) = buf.dimensions();
            Raster::from_vec(w as usize, h as usize, buf.into_raw().into_iter().map(|v| v as f64 / 65535.0).collect())
        }
        _ => {
            return Err(SegmenterError::UnsupportedFormat {
                path: path.to_path_buf(),
            })
        }
    };
    ProbabilityMap::new(values)
}

/// Writes the map as 8-bit grayscale, `round(p · 255)`.
pub fn export_probability_map(map: &ProbabilityMap, path: &Path) -> Result<(), SegmenterError> {
    let (w, h) = map.dims();
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> = ImageBuffer::from_raw(
        w as u32,
        h as u32,
        map.values().as_slice().iter().map(|&v| imageops::to_u8(v)).collect(),
    )
    .expect("buffer sized from map");
    buf.save(path).map_err(|source| SegmenterError::WriteFailed {
        path: path.to_path_buf(),
        source,
    })
}
