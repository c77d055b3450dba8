//! Per-image annotation files (UTF-8 JSON).
//!
//! ```json
//! {"image": "img_0", "width": 64, "height": 48, "objects": [
//!   {"id": 1, "orientation_clicks": [[x, y], [x, y]],
//!    "extreme_points": {"top": [x, y], "bottom": [x, y], "left": [x, y], "right": [x, y]},
//!    "box": {"center": [x, y], "angle": a, "half_u": hu, "half_v": hv}}]}
//! ```
//!
//! `box` is derived from the clicks. It is regenerated on load and a stored
//! value that disagrees by more than [`BOX_TOLERANCE`] is rejected.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{box_from_clicks, ClickSequence, ExtremePoints, GeometryError, Point2, TiltedBox};

pub const BOX_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: parse error at line {line}, column {column}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("object {id}: {source}")]
    InvalidClicks {
        id: u32,
        #[source]
        source: GeometryError,
    },
    #[error("object {id}: stored box disagrees with the box derived from its clicks ({field} off by {diff:e})")]
    BoxMismatch { id: u32, field: &'static str, diff: f64 },
    #[error("duplicate object id {0}")]
    DuplicateId(u32),
    #[error("image dimensions must be positive, got {0}×{1}")]
    BadDimensions(u32, u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxRecord {
    pub center: Point2,
    pub angle: f64,
    pub half_u: f64,
    pub half_v: f64,
}

impl From<&TiltedBox> for BoxRecord {
    fn from(b: &TiltedBox) -> Self {
        Self {
            center: b.center,
            angle: b.angle,
            half_u: b.half_u,
            half_v: b.half_v,
        }
    }
}

impl BoxRecord {
    /// First field that differs from `derived` by more than `tol`.
    pub fn mismatch(&self, derived: &TiltedBox, tol: f64) -> Option<(&'static str, f64)> {
        [
            ("center", self.center.dist(derived.center)),
            ("angle", (self.angle - derived.angle).abs()),
            ("half_u", (self.half_u - derived.half_u).abs()),
            ("half_v", (self.half_v - derived.half_v).abs()),
        ]
        .into_iter()
        .find(|&(_, d)| !(d <= tol))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedObject {
    pub id: u32,
    pub orientation_clicks: [Point2; 2],
    pub extreme_points: ExtremePoints,
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub bx: Option<BoxRecord>,
}

impl AnnotatedObject {
    pub fn clicks(&self) -> ClickSequence {
        ClickSequence {
            orientation_clicks: self.orientation_clicks,
            extreme_points: self.extreme_points,
        }
    }

    /// Object with its box derived from the clicks.
    pub fn from_clicks(id: u32, clicks: &ClickSequence) -> Result<Self, GeometryError> {
        let b = box_from_clicks(clicks)?;
        Ok(Self {
            id,
            orientation_clicks: clicks.orientation_clicks,
            extreme_points: clicks.extreme_points,
            bx: Some(BoxRecord::from(&b)),
        })
    }

    /// Derives the box and checks it against the stored record, if any.
    pub fn derive_box(&self) -> Result<TiltedBox, AnnotationError> {
        let derived = box_from_clicks(&self.clicks()).map_err(|source| AnnotationError::InvalidClicks {
            id: self.id,
            source,
        })?;
        if let Some(stored) = &self.bx {
            if let Some((field, diff)) = stored.mismatch(&derived, BOX_TOLERANCE) {
                return Err(AnnotationError::BoxMismatch {
                    id: self.id,
                    field,
                    diff,
                });
            }
        }
        Ok(derived)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationFile {
    pub image: String,
    pub width: u32,
    pub height: u32,
    pub objects: Vec<AnnotatedObject>,
}

impl AnnotationFile {
    pub fn new(image: impl Into<String>, width: u32, height: u32) -> Self {
        Self {
            image: image.into(),
            width,
            height,
            objects: Vec::new(),
        }
    }

    /// Validates every object and returns the derived boxes keyed by object id.
    pub fn boxes(&self) -> Result<Vec<(u32, TiltedBox)>, AnnotationError> {
        if self.width == 0 || self.height == 0 {
            return Err(AnnotationError::BadDimensions(self.width, self.height));
        }
        let mut seen = BTreeSet::new();
        let mut out = Vec::with_capacity(self.objects.len());
        for obj in &self.objects {
            if !seen.insert(obj.id) {
                return Err(AnnotationError::DuplicateId(obj.id));
            }
            out.push((obj.id, obj.derive_box()?));
        }
        Ok(out)
    }

    /// Parses and validates; `path` only labels errors.
    pub fn from_json_bytes(bytes: &[u8], path: &Path) -> Result<Self, AnnotationError> {
        let file: Self = serde_json::from_slice(bytes).map_err(|e| AnnotationError::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        file.boxes()?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self, AnnotationError> {
        let bytes = std::fs::read(path).map_err(|source| AnnotationError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json_bytes(&bytes, path)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("annotation serializes") + "\n"
    }

    pub fn save(&self, path: &Path) -> Result<(), AnnotationError> {
        std::fs::write(path, self.to_json_pretty()).map_err(|source| AnnotationError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> AnnotationFile {
        let clicks = ClickSequence {
            orientation_clicks: [Point2::new(10.0, 10.0), Point2::new(12.0, 11.0)],
            extreme_points: ExtremePoints {
                top: Point2::new(12.0, 3.0),
                bottom: Point2::new(10.0, 19.0),
                left: Point2::new(2.0, 9.0),
                right: Point2::new(20.0, 12.0),
            },
        };
        let mut f = AnnotationFile::new("img", 32, 32);
        f.objects.push(AnnotatedObject::from_clicks(1, &clicks).unwrap());
        f
    }

    #[test]
    fn json_round_trip() {
        let f = sample();
        let text = f.to_json_pretty();
        let back = AnnotationFile::from_json_bytes(text.as_bytes(), Path::new("x.json")).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.to_json_pretty(), text);
    }

    #[test]
    fn stored_box_must_match_clicks() {
        let mut f = sample();
        f.objects[0].bx.as_mut().unwrap().half_u += 1e-3;
        let err = AnnotationFile::from_json_bytes(f.to_json_pretty().as_bytes(), Path::new("x.json")).unwrap_err();
        assert!(matches!(err, AnnotationError::BoxMismatch { field: "half_u", .. }));
    }

    #[test]
    fn box_is_optional_on_input() {
        let mut f = sample();
        f.objects[0].bx = None;
        let parsed = AnnotationFile::from_json_bytes(f.to_json_pretty().as_bytes(), Path::new("x.json")).unwrap();
        assert_eq!(parsed.boxes().unwrap().len(), 1);
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = AnnotationFile::from_json_bytes(b"{\n  \"image\": 3,\n}", Path::new("bad.json")).unwrap_err();
        match err {
            AnnotationError::Parse { path, line, .. } => {
                assert_eq!(path, PathBuf::from("bad.json"));
                assert_eq!(line, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let mut f = sample();
        f.objects.push(f.objects[0].clone());
        assert!(matches!(f.boxes(), Err(AnnotationError::DuplicateId(1))));
    }
}
