//! Box ground truth: the weak label map rasterized from tilted-box annotations.
//!
//! Pixels outside every box are background. Inside a box, the core rectangle
//! around the object center and the four spokes from the center to the
//! extreme points are object. Everything else is ignored (weight 0).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Frame, Point2, TiltedBox};
use crate::raster::{pixel_center, Raster};

/// Core rectangle scale used throughout.
pub const DEFAULT_CORE_SCALE: f64 = 0.4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoxGtError {
    #[error("core scale k must lie in (0, 1), got {0}")]
    InvalidCoreScale(f64),
    #[error("spoke thickness must be positive, got {0}")]
    InvalidThickness(f64),
    #[error("unknown label code {0}")]
    UnknownCode(u8),
}

/// Per-pixel class. The discriminants are the on-disk 8-bit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum LabelClass {
    Background = 0,
    Object = 1,
    Ignore = 255,
}

impl LabelClass {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self, BoxGtError> {
        match code {
            0 => Ok(Self::Background),
            1 => Ok(Self::Object),
            255 => Ok(Self::Ignore),
            other => Err(BoxGtError::UnknownCode(other)),
        }
    }

    /// Training weight implied by the class.
    pub fn weight(self) -> f64 {
        match self {
            Self::Ignore => 0.0,
            _ => 1.0,
        }
    }
}

/// Class per pixel; weights are derived from the class so the
/// `weight == 0 ⇔ IGNORE` invariant cannot be broken.
pub type LabelMap = Raster<LabelClass>;

impl LabelMap {
    pub fn weight_at(&self, col: usize, row: usize) -> f64 {
        self.get(col, row).weight()
    }

    pub fn weights(&self) -> Raster<f64> {
        self.map(|c| c.weight())
    }

    pub fn count_class(&self, class: LabelClass) -> usize {
        self.as_slice().iter().filter(|&&c| c == class).count()
    }

    pub fn codes(&self) -> Vec<u8> {
        self.as_slice().iter().map(|c| c.code()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxGtConfig {
    /// Linear scale of the core rectangle's half extents.
    pub k: f64,
    pub spoke_thickness: f64,
}

impl Default for BoxGtConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_CORE_SCALE,
            spoke_thickness: 1.0,
        }
    }
}

impl BoxGtConfig {
    pub fn validate(&self) -> Result<(), BoxGtError> {
        if !(self.k > 0.0 && self.k < 1.0) {
            return Err(BoxGtError::InvalidCoreScale(self.k));
        }
        if !(self.spoke_thickness > 0.0) {
            return Err(BoxGtError::InvalidThickness(self.spoke_thickness));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxGroundTruth {
    pub labels: LabelMap,
    /// Set when the annotation held no boxes; the map is then all background.
    pub empty_annotation: bool,
}

/// The core rectangle of a box: same orientation, centered on the object
/// center, half extents scaled by `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoreRect {
    pub center: Point2,
    pub frame: Frame,
    pub half_u: f64,
    pub half_v: f64,
}

impl CoreRect {
    pub fn of(bx: &TiltedBox, k: f64) -> Self {
        Self {
            center: bx.object_center,
            frame: bx.frame(),
            half_u: k * bx.half_u,
            half_v: k * bx.half_v,
        }
    }

    pub fn contains(&self, p: Point2) -> bool {
        let (u, v) = self.frame.to_uv(p - self.center);
        u.abs() <= self.half_u && v.abs() <= self.half_v
    }
}

/// Pixels `(col, row)` covered by the segment `a → b`.
///
/// The set is every pixel whose half-open square `[col, col+1) × [row, row+1)`
/// the segment passes through (an 8-connected grid walk) plus every pixel
/// whose center lies within `thickness / 2` of the segment. Coordinates may
/// be negative; callers clip.
pub fn segment_rasterize(a: Point2, b: Point2, thickness: f64) -> BTreeSet<(i64, i64)> {
    let mut out = grid_walk(a, b);
    let r = 0.5 * thickness;
    let (x0, x1) = ((a.x.min(b.x) - r).floor() as i64 - 1, (a.x.max(b.x) + r).ceil() as i64 + 1);
    let (y0, y1) = ((a.y.min(b.y) - r).floor() as i64 - 1, (a.y.max(b.y) + r).ceil() as i64 + 1);
    for row in y0..=y1 {
        for col in x0..=x1 {
            let c = Point2::new(col as f64 + 0.5, row as f64 + 0.5);
            if point_segment_distance(c, a, b) <= r {
                out.insert((col, row));
            }
        }
    }
    out
}

/// Cells visited by the segment, stepping boundary to boundary.
fn grid_walk(a: Point2, b: Point2) -> BTreeSet<(i64, i64)> {
    let mut out = BTreeSet::new();
    let d = b - a;
    let (mut cx, mut cy) = (a.x.floor() as i64, a.y.floor() as i64);
    let sx = d.x.partial_cmp(&0.0).map_or(0, |o| o as i64);
    let sy = d.y.partial_cmp(&0.0).map_or(0, |o| o as i64);
    // parameter of the next boundary crossing along one axis
    let next_t = |cell: i64, step: i64, start: f64, delta: f64| match step {
        1 => (cell as f64 + 1.0 - start) / delta,
        -1 => (cell as f64 - start) / delta,
        _ => f64::INFINITY,
    };
    // a crossing at t = 1 counts only when it enters the next cell at b itself
    let within = |t: f64, step: i64| if step > 0 { t <= 1.0 } else { t < 1.0 };
    let limit = ((b.x.floor() as i64 - cx).abs() + (b.y.floor() as i64 - cy).abs() + 2) as usize;
    out.insert((cx, cy));
    for _ in 0..limit {
        let tx = next_t(cx, sx, a.x, d.x);
        let ty = next_t(cy, sy, a.y, d.y);
        let take_x = within(tx, sx);
        let take_y = within(ty, sy);
        if !take_x && !take_y {
            break;
        }
        if take_x && take_y && tx == ty {
            // through a corner: the corner point belongs to the cell above
            // and to the right of it
            if sx > 0 && sy < 0 {
                cx += 1;
                out.insert((cx, cy));
                cy -= 1;
            } else if sx < 0 && sy > 0 {
                cy += 1;
                out.insert((cx, cy));
                cx -= 1;
            } else {
                cx += sx;
                cy += sy;
            }
        } else if take_x && (!take_y || tx < ty) {
            cx += sx;
        } else {
            cy += sy;
        }
        out.insert((cx, cy));
    }
    out
}

pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let d = b - a;
    let len2 = d.dot(d);
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(d) / len2).clamp(0.0, 1.0);
    p.dist(a + d * t)
}

/// Rasterizes the box ground truth for one image.
///
/// Precedence where rules overlap: object, then background, then ignore.
/// The core rectangle is clipped to its own box.
pub fn rasterize_box_gt(
    boxes: &[TiltedBox],
    width: usize,
    height: usize,
    config: &BoxGtConfig,
) -> Result<BoxGroundTruth, BoxGtError> {
    config.validate()?;
    if boxes.is_empty() {
        tracing::warn!("annotation holds no boxes; box ground truth is all background");
        return Ok(BoxGroundTruth {
            labels: LabelMap::filled(width, height, LabelClass::Background),
            empty_annotation: true,
        });
    }

    let mut labels = LabelMap::filled(width, height, LabelClass::Background);
    for bx in boxes {
        let core = CoreRect::of(bx, config.k);
        for_each_pixel_in_box(bx, width, height, |col, row| {
            let p = pixel_center(col, row);
            let current = *labels.get(col, row);
            if current == LabelClass::Object {
                return;
            }
            if core.contains(p) {
                labels.set(col, row, LabelClass::Object);
            } else {
                labels.set(col, row, LabelClass::Ignore);
            }
        });
    }
    for bx in boxes {
        for end in bx.extreme_points.as_array() {
            for (col, row) in segment_rasterize(bx.object_center, end, config.spoke_thickness) {
                if col >= 0 && row >= 0 && (col as usize) < width && (row as usize) < height {
                    labels.set(col as usize, row as usize, LabelClass::Object);
                }
            }
        }
    }
    Ok(BoxGroundTruth {
        labels,
        empty_annotation: false,
    })
}

/// Calls `f` for every in-image pixel whose center lies inside the box.
pub fn for_each_pixel_in_box(bx: &TiltedBox, width: usize, height: usize, mut f: impl FnMut(usize, usize)) {
    if width == 0 || height == 0 {
        return;
    }
    let corners = bx.corners();
    let min_x = corners.iter().map(|p| p.x).fold(f64::MAX, f64::min);
    let max_x = corners.iter().map(|p| p.x).fold(f64::MIN, f64::max);
    let min_y = corners.iter().map(|p| p.y).fold(f64::MAX, f64::min);
    let max_y = corners.iter().map(|p| p.y).fold(f64::MIN, f64::max);
    let c0 = (min_x - 1.0).floor().max(0.0) as usize;
    let c1 = ((max_x + 1.0).ceil().max(0.0) as usize).min(width - 1);
    let r0 = (min_y - 1.0).floor().max(0.0) as usize;
    let r1 = ((max_y + 1.0).ceil().max(0.0) as usize).min(height - 1);
    for row in r0..=r1 {
        for col in c0..=c1 {
            if bx.contains(pixel_center(col, row)) {
                f(col, row);
            }
        }
    }
}

/// Mask of pixels whose centers lie inside the box.
pub fn box_footprint(bx: &TiltedBox, width: usize, height: usize) -> crate::raster::Mask {
    let mut m = crate::raster::Mask::filled(width, height, false);
    for_each_pixel_in_box(bx, width, height, |c, r| m.set(c, r, true));
    m
}
