//! Tilted boxes from six-click annotations.
//!
//! A box lives in a rotated frame whose u-axis points along the annotated
//! orientation `(cos θ, sin θ)` and whose v-axis is `(-sin θ, cos θ)`. With
//! image coordinates (y down) and `θ = 0`, u is x and v is y, so "top" is the
//! smallest v and "leftmost" the smallest u.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::Mask;

/// Tolerance used when checking that extreme points sit on the box boundary.
pub const BOUNDARY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("orientation clicks coincide")]
    DegenerateOrientation,
    #[error("degenerate box: half extents ({half_u}, {half_v}) must be positive")]
    DegenerateBox { half_u: f64, half_v: f64 },
    #[error("extreme click `{label}` lies outside the box spanned by the other clicks")]
    InconsistentExtremes { label: &'static str },
    #[error("non-finite click coordinate")]
    NonFinite,
    #[error("mask has no foreground pixels")]
    EmptyMask,
    #[error("box angles differ: {0} vs {1}")]
    AngleMismatch(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn midpoint(self, other: Point2) -> Point2 {
        Point2::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

impl std::ops::Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

impl From<[f64; 2]> for Point2 {
    fn from(a: [f64; 2]) -> Self {
        Point2::new(a[0], a[1])
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

/// The four extreme points in annotation order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtremePoints {
    pub top: Point2,
    pub bottom: Point2,
    pub left: Point2,
    pub right: Point2,
}

impl ExtremePoints {
    pub fn as_array(&self) -> [Point2; 4] {
        [self.top, self.bottom, self.left, self.right]
    }
}

/// Two orientation clicks followed by top, bottom, leftmost, rightmost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClickSequence {
    pub orientation_clicks: [Point2; 2],
    pub extreme_points: ExtremePoints,
}

/// Rotated frame with angle `θ`: `u = p·(cos θ, sin θ)`, `v = p·(-sin θ, cos θ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub cos: f64,
    pub sin: f64,
}

impl Frame {
    pub fn new(angle: f64) -> Self {
        Self {
            cos: angle.cos(),
            sin: angle.sin(),
        }
    }

    #[inline]
    pub fn to_uv(&self, p: Point2) -> (f64, f64) {
        (
            p.x * self.cos + p.y * self.sin,
            -p.x * self.sin + p.y * self.cos,
        )
    }

    #[inline]
    pub fn from_uv(&self, u: f64, v: f64) -> Point2 {
        Point2::new(u * self.cos - v * self.sin, u * self.sin + v * self.cos)
    }

    pub fn u_axis(&self) -> Point2 {
        Point2::new(self.cos, self.sin)
    }

    pub fn v_axis(&self) -> Point2 {
        Point2::new(-self.sin, self.cos)
    }
}

/// Maps any direction angle onto the line-orientation range `[-π/2, π/2)`.
pub fn normalize_angle(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(PI);
    if a >= FRAC_PI_2 {
        a -= PI;
    }
    a
}

/// Orientation angle of the line through two distinct clicks.
pub fn orientation_angle(a: Point2, b: Point2) -> Result<f64, GeometryError> {
    if !a.is_finite() || !b.is_finite() {
        return Err(GeometryError::NonFinite);
    }
    let d = b - a;
    if d.norm() <= f64::EPSILON {
        return Err(GeometryError::DegenerateOrientation);
    }
    Ok(normalize_angle(d.y.atan2(d.x)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltedBox {
    pub center: Point2,
    pub angle: f64,
    pub half_u: f64,
    pub half_v: f64,
    pub object_center: Point2,
    pub extreme_points: ExtremePoints,
}

impl TiltedBox {
    pub fn frame(&self) -> Frame {
        Frame::new(self.angle)
    }

    /// Coordinates of `p` in the box frame, relative to the box center.
    #[inline]
    pub fn local(&self, p: Point2) -> (f64, f64) {
        self.frame().to_uv(p - self.center)
    }

    /// Point containment with an outward tolerance `margin` (pixels).
    #[inline]
    pub fn contains_with_margin(&self, p: Point2, margin: f64) -> bool {
        let (u, v) = self.local(p);
        u.abs() <= self.half_u + margin && v.abs() <= self.half_v + margin
    }

    pub fn contains(&self, p: Point2) -> bool {
        self.contains_with_margin(p, 1e-6)
    }

    pub fn area(&self) -> f64 {
        4.0 * self.half_u * self.half_v
    }

    /// Size counted in whole pixels: a box through the centers of a
    /// `w × h` pixel block has pixel extent `w × h`.
    pub fn pixel_extent(&self) -> (f64, f64) {
        (2.0 * self.half_u + 1.0, 2.0 * self.half_v + 1.0)
    }

    pub fn corners(&self) -> [Point2; 4] {
        let f = self.frame();
        [
            (-1.0, -1.0),
            (1.0, -1.0),
            (1.0, 1.0),
            (-1.0, 1.0),
        ]
        .map(|(su, sv)| self.center + f.from_uv(su * self.half_u, sv * self.half_v))
    }

    /// Checks both boundary invariants on the extreme points.
    pub fn extreme_points_on_boundary(&self, tol: f64) -> bool {
        let e = &self.extreme_points;
        let (tu, tv) = self.local(e.top);
        let (bu, bv) = self.local(e.bottom);
        let (lu, lv) = self.local(e.left);
        let (ru, rv) = self.local(e.right);
        let on = (tv.abs() - self.half_v).abs() <= tol
            && (bv.abs() - self.half_v).abs() <= tol
            && (lu.abs() - self.half_u).abs() <= tol
            && (ru.abs() - self.half_u).abs() <= tol;
        let inside = [(tu, tv), (bu, bv), (lu, lv), (ru, rv)]
            .iter()
            .all(|&(u, v)| u.abs() <= self.half_u + tol && v.abs() <= self.half_v + tol);
        on && inside
    }
}

/// Derives the tilted box whose edges pass through the four extreme clicks.
pub fn box_from_clicks(clicks: &ClickSequence) -> Result<TiltedBox, GeometryError> {
    let [c1, c2] = clicks.orientation_clicks;
    let e = clicks.extreme_points;
    if !e.as_array().iter().all(|p| p.is_finite()) {
        return Err(GeometryError::NonFinite);
    }
    let angle = orientation_angle(c1, c2)?;
    let frame = Frame::new(angle);

    let (_, v_top) = frame.to_uv(e.top);
    let (_, v_bottom) = frame.to_uv(e.bottom);
    let (u_left, _) = frame.to_uv(e.left);
    let (u_right, _) = frame.to_uv(e.right);

    let half_u = 0.5 * (u_right - u_left);
    let half_v = 0.5 * (v_bottom - v_top);
    if half_u <= 0.0 || half_v <= 0.0 {
        return Err(GeometryError::DegenerateBox { half_u, half_v });
    }
    let center = frame.from_uv(0.5 * (u_left + u_right), 0.5 * (v_top + v_bottom));
    let bx = TiltedBox {
        center,
        angle,
        half_u,
        half_v,
        object_center: c1.midpoint(c2),
        extreme_points: e,
    };

    for (label, p) in [("top", e.top), ("bottom", e.bottom), ("left", e.left), ("right", e.right)] {
        let (u, v) = bx.local(p);
        if u.abs() > half_u + BOUNDARY_TOLERANCE || v.abs() > half_v + BOUNDARY_TOLERANCE {
            return Err(GeometryError::InconsistentExtremes { label });
        }
    }
    Ok(bx)
}

/// Smallest box at `angle` containing every foreground pixel center of `mask`.
///
/// Extreme points are the touching pixel centers; among ties the median one
/// along the edge is taken.
pub fn same_angle_bounding_box(mask: &Mask, angle: f64) -> Result<TiltedBox, GeometryError> {
    let frame = Frame::new(angle);
    let uv: Vec<(f64, f64, crate::geometry::Point2)> = mask
        .pixel_centers()
        .map(|p| {
            let (u, v) = frame.to_uv(p);
            (u, v, p)
        })
        .collect();
    if uv.is_empty() {
        return Err(GeometryError::EmptyMask);
    }
    let (mut u_min, mut u_max, mut v_min, mut v_max) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(u, v, _) in &uv {
        u_min = u_min.min(u);
        u_max = u_max.max(u);
        v_min = v_min.min(v);
        v_max = v_max.max(v);
    }

    // median of the tied candidates along the perpendicular coordinate
    let pick = |select: &dyn Fn(&(f64, f64, Point2)) -> Option<f64>| -> Point2 {
        let mut cands: Vec<(f64, Point2)> = uv
            .iter()
            .filter_map(|t| select(t).map(|key| (key, t.2)))
            .collect();
        cands.sort_by(|a, b| a.0.total_cmp(&b.0));
        cands[(cands.len() - 1) / 2].1
    };
    const TIE: f64 = 1e-9;
    let extreme_points = ExtremePoints {
        top: pick(&|t| ((t.1 - v_min).abs() <= TIE).then_some(t.0)),
        bottom: pick(&|t| ((t.1 - v_max).abs() <= TIE).then_some(t.0)),
        left: pick(&|t| ((t.0 - u_min).abs() <= TIE).then_some(t.1)),
        right: pick(&|t| ((t.0 - u_max).abs() <= TIE).then_some(t.1)),
    };
    let center = frame.from_uv(0.5 * (u_min + u_max), 0.5 * (v_min + v_max));
    Ok(TiltedBox {
        center,
        angle,
        half_u: 0.5 * (u_max - u_min),
        half_v: 0.5 * (v_max - v_min),
        object_center: center,
        extreme_points,
    })
}

/// IoU of two boxes sharing one orientation, computed in their common frame.
pub fn same_angle_iou(a: &TiltedBox, b: &TiltedBox) -> Result<f64, GeometryError> {
    if (a.angle - b.angle).abs() > 1e-9 {
        return Err(GeometryError::AngleMismatch(a.angle, b.angle));
    }
    // the smaller angle, so the result does not depend on argument order
    let frame = Frame::new(a.angle.min(b.angle));
    let (au, av) = frame.to_uv(a.center);
    let (bu, bv) = frame.to_uv(b.center);
    // intervals, so that identical boxes give identical products
    let span = |c: f64, h: f64| (c - h, c + h);
    let (a_u, a_v, b_u, b_v) = (span(au, a.half_u), span(av, a.half_v), span(bu, b.half_u), span(bv, b.half_v));
    let overlap = |p: (f64, f64), q: (f64, f64)| (p.1.min(q.1) - p.0.max(q.0)).max(0.0);
    let area = |u: (f64, f64), v: (f64, f64)| (u.1 - u.0) * (v.1 - v.0);
    let inter = overlap(a_u, b_u) * overlap(a_v, b_v);
    let union = area(a_u, a_v) + area(b_u, b_v) - inter;
    if union <= 0.0 {
        // two zero-area boxes
        let same = (au - bu).abs() <= 1e-12
            && (av - bv).abs() <= 1e-12
            && (a.half_u - b.half_u).abs() <= 1e-12
            && (a.half_v - b.half_v).abs() <= 1e-12;
        return Ok(if same { 1.0 } else { 0.0 });
    }
    Ok((inter / union).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridFamily {
    /// Lines running along the u-axis (constant v).
    AlongU,
    /// Lines running along the v-axis (constant u).
    AlongV,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridLine {
    pub family: GridFamily,
    /// Signed offset of the line from the grid origin, a multiple of the spacing.
    pub offset: f64,
    pub start: Point2,
    pub end: Point2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssistiveGrid {
    pub angle: f64,
    pub origin: Point2,
    pub spacing: f64,
    pub lines: Vec<GridLine>,
}

/// Grid aligned with the orientation clicks, anchored at their midpoint and
/// clipped to `[0, width] × [0, height]`.
pub fn assistive_grid(
    orientation_clicks: [Point2; 2],
    width: f64,
    height: f64,
    spacing: f64,
) -> Result<AssistiveGrid, GeometryError> {
    let angle = orientation_angle(orientation_clicks[0], orientation_clicks[1])?;
    let origin = orientation_clicks[0].midpoint(orientation_clicks[1]);
    let frame = Frame::new(angle);
    let mut lines = Vec::new();
    if spacing > 0.0 && width > 0.0 && height > 0.0 {
        let corners = [
            Point2::new(0.0, 0.0),
            Point2::new(width, 0.0),
            Point2::new(width, height),
            Point2::new(0.0, height),
        ];
        for family in [GridFamily::AlongU, GridFamily::AlongV] {
            // direction of the lines and the normal along which they repeat
            let (dir, normal) = match family {
                GridFamily::AlongU => (frame.u_axis(), frame.v_axis()),
                GridFamily::AlongV => (frame.v_axis(), frame.u_axis()),
            };
            let offsets = corners.map(|c| (c - origin).dot(normal));
            let lo = offsets.iter().cloned().fold(f64::MAX, f64::min);
            let hi = offsets.iter().cloned().fold(f64::MIN, f64::max);
            let k_lo = (lo / spacing).ceil() as i64;
            let k_hi = (hi / spacing).floor() as i64;
            for k in k_lo..=k_hi {
                let offset = k as f64 * spacing;
                let through = origin + normal * offset;
                if let Some((start, end)) = clip_line(through, dir, width, height) {
                    lines.push(GridLine {
                        family,
                        offset,
                        start,
                        end,
                    });
                }
            }
        }
    }
    Ok(AssistiveGrid {
        angle,
        origin,
        spacing,
        lines,
    })
}

/// Liang–Barsky clip of the infinite line `p + t·d` to the image rectangle.
fn clip_line(p: Point2, d: Point2, width: f64, height: f64) -> Option<(Point2, Point2)> {
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for (pc, dc, max) in [(p.x, d.x, width), (p.y, d.y, height)] {
        if dc.abs() < 1e-12 {
            if pc < 0.0 || pc > max {
                return None;
            }
        } else {
            let a = (0.0 - pc) / dc;
            let b = (max - pc) / dc;
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
    }
    if t1 - t0 <= 1e-12 {
        return None;
    }
    Some((p + d * t0, p + d * t1))
}
