//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::collections::VecDeque;

use rand::Rng;
use tiltseg_core::geometry::{box_from_clicks, ClickSequence, ExtremePoints, Point2, TiltedBox};
use tiltseg_core::raster::Mask;

pub fn pt(x: f64, y: f64) -> Point2 {
    Point2::new(x, y)
}

/// Local coordinates of `p` in the frame of a rectangle, computed directly.
pub fn local(center: Point2, angle: f64, p: Point2) -> (f64, f64) {
    let (dx, dy) = (p.x - center.x, p.y - center.y);
    (dx * angle.cos() + dy * angle.sin(), -dx * angle.sin() + dy * angle.cos())
}

pub fn inside_rect(center: Point2, angle: f64, hu: f64, hv: f64, p: Point2, margin: f64) -> bool {
    let (u, v) = local(center, angle, p);
    u.abs() <= hu + margin && v.abs() <= hv + margin
}

/// Clicks for a rectangle with the given geometry. Extreme points sit at
/// fractions `along` ∈ [-1, 1] of each edge; the object center is `oc`
/// (given in local coordinates).
pub fn clicks_for(center: Point2, angle: f64, hu: f64, hv: f64, along: [f64; 4], oc: (f64, f64), spread: f64) -> ClickSequence {
    let (c, s) = (angle.cos(), angle.sin());
    let at = |u: f64, v: f64| pt(center.x + u * c - v * s, center.y + u * s + v * c);
    let o = at(oc.0, oc.1);
    ClickSequence {
        orientation_clicks: [pt(o.x - spread * c, o.y - spread * s), pt(o.x + spread * c, o.y + spread * s)],
        extreme_points: ExtremePoints {
            top: at(along[0] * hu, -hv),
            bottom: at(along[1] * hu, hv),
            left: at(-hu, along[2] * hv),
            right: at(hu, along[3] * hv),
        },
    }
}

pub fn random_clicks(rng: &mut impl Rng, extent: f64, half: (f64, f64)) -> (ClickSequence, Point2, f64, f64, f64) {
    let angle = rng.random_range(-std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2);
    let hu = rng.random_range(half.0..half.1);
    let hv = rng.random_range(half.0..half.1);
    let center = pt(rng.random_range(0.0..extent), rng.random_range(0.0..extent));
    let along = [0; 4].map(|_| rng.random_range(-1.0..=1.0));
    let oc = (rng.random_range(-0.5..0.5) * hu, rng.random_range(-0.5..0.5) * hv);
    let spread = rng.random_range(1.0..10.0);
    (clicks_for(center, angle, hu, hv, along, oc, spread), center, angle, hu, hv)
}

pub fn box_at(center: Point2, angle: f64, hu: f64, hv: f64) -> TiltedBox {
    box_from_clicks(&clicks_for(center, angle, hu, hv, [0.0; 4], (0.0, 0.0), 2.0)).expect("valid box")
}

/// IoU of two rectangles by point sampling at `res` spacing.
pub fn rasterized_iou(a: &TiltedBox, b: &TiltedBox, res: f64) -> f64 {
    let mut lo = pt(f64::MAX, f64::MAX);
    let mut hi = pt(f64::MIN, f64::MIN);
    for bx in [a, b] {
        let r = bx.half_u.hypot(bx.half_v);
        lo = pt(lo.x.min(bx.center.x - r), lo.y.min(bx.center.y - r));
        hi = pt(hi.x.max(bx.center.x + r), hi.y.max(bx.center.y + r));
    }
    let nx = ((hi.x - lo.x) / res).ceil() as usize;
    let ny = ((hi.y - lo.y) / res).ceil() as usize;
    let (mut inter, mut union) = (0u64, 0u64);
    for j in 0..ny {
        for i in 0..nx {
            let p = pt(lo.x + (i as f64 + 0.5) * res, lo.y + (j as f64 + 0.5) * res);
            let ia = inside_rect(a.center, a.angle, a.half_u, a.half_v, p, 0.0);
            let ib = inside_rect(b.center, b.angle, b.half_u, b.half_v, p, 0.0);
            inter += (ia && ib) as u64;
            union += (ia || ib) as u64;
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Whether the segment meets the half-open square of pixel `(col, row)`,
/// by clipping the segment parameter against both slabs.
pub fn segment_hits_pixel(a: Point2, b: Point2, col: i64, row: i64) -> bool {
    // interval of t as (lo, lo_closed, hi, hi_closed)
    let mut lo = (0.0f64, true);
    let mut hi = (1.0f64, true);
    for (start, delta, cell) in [(a.x, b.x - a.x, col as f64), (a.y, b.y - a.y, row as f64)] {
        if delta == 0.0 {
            if !(start >= cell && start < cell + 1.0) {
                return false;
            }
            continue;
        }
        // coordinate reaches cell (closed) and cell + 1 (open)
        let t_closed = (cell - start) / delta;
        let t_open = (cell + 1.0 - start) / delta;
        let (slab_lo, slab_hi) = if delta > 0.0 {
            ((t_closed, true), (t_open, false))
        } else {
            ((t_open, false), (t_closed, true))
        };
        if slab_lo.0 > lo.0 || (slab_lo.0 == lo.0 && !slab_lo.1) {
            lo = slab_lo;
        }
        if slab_hi.0 < hi.0 || (slab_hi.0 == hi.0 && !slab_hi.1) {
            hi = slab_hi;
        }
    }
    lo.0 < hi.0 || (lo.0 == hi.0 && lo.1 && hi.1)
}

pub fn seg_dist(p: Point2, a: Point2, b: Point2) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
    };
    (p.x - a.x - t * dx).hypot(p.y - a.y - t * dy)
}

pub fn on_spoke(a: Point2, b: Point2, thickness: f64, col: i64, row: i64) -> bool {
    segment_hits_pixel(a, b, col, row) || seg_dist(pt(col as f64 + 0.5, row as f64 + 0.5), a, b) <= 0.5 * thickness
}

/// Per-pixel label codes (0 background, 1 object, 255 ignore), rule by rule.
pub fn box_gt_oracle(boxes: &[TiltedBox], w: usize, h: usize, k: f64, thickness: f64) -> Vec<u8> {
    let mut out = Vec::with_capacity(w * h);
    for row in 0..h {
        for col in 0..w {
            let p = pt(col as f64 + 0.5, row as f64 + 0.5);
            let in_box = |b: &TiltedBox| inside_rect(b.center, b.angle, b.half_u, b.half_v, p, 1e-6);
            let core = boxes
                .iter()
                .any(|b| in_box(b) && inside_rect(b.object_center, b.angle, k * b.half_u, k * b.half_v, p, 0.0));
            let spoke = boxes.iter().any(|b| {
                b.extreme_points
                    .as_array()
                    .iter()
                    .any(|&e| on_spoke(b.object_center, e, thickness, col as i64, row as i64))
            });
            out.push(if core || spoke {
                1
            } else if boxes.iter().any(in_box) {
                255
            } else {
                0
            });
        }
    }
    out
}

/// Best closed selection by enumerating all `m^n` paths.
pub fn exhaustive_dp(n: usize, m: usize, cost: &[f64], delta: usize, forced: &[Option<usize>]) -> Option<(f64, Vec<usize>)> {
    let mut best: Option<(f64, Vec<usize>)> = None;
    let total = m.pow(n as u32);
    let mut sel = vec![0usize; n];
    for code in 0..total {
        let mut c = code;
        for s in sel.iter_mut() {
            *s = c % m;
            c /= m;
        }
        let ok = (0..n).all(|i| sel[i].abs_diff(sel[(i + 1) % n]) <= delta)
            && forced.iter().zip(&sel).all(|(f, s)| f.is_none_or(|f| f == *s));
        if !ok {
            continue;
        }
        let total_cost: f64 = sel.iter().enumerate().map(|(i, &s)| cost[i * m + s]).sum();
        if best.as_ref().is_none_or(|(b, _)| total_cost < *b) {
            best = Some((total_cost, sel.clone()));
        }
    }
    best
}

/// 8-connected components by breadth-first flood fill, in raster order of
/// their first pixel.
pub fn bfs_components(mask: &Mask) -> Vec<Vec<(usize, usize)>> {
    let (w, h) = mask.dims();
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    for row in 0..h {
        for col in 0..w {
            if !*mask.get(col, row) || seen[row * w + col] {
                continue;
            }
            let mut comp = Vec::new();
            let mut queue = VecDeque::from([(col, row)]);
            seen[row * w + col] = true;
            while let Some((c, r)) = queue.pop_front() {
                comp.push((c, r));
                for dr in -1i64..=1 {
                    for dc in -1i64..=1 {
                        let (nc, nr) = (c as i64 + dc, r as i64 + dr);
                        if nc < 0 || nr < 0 || nc >= w as i64 || nr >= h as i64 {
                            continue;
                        }
                        let (nc, nr) = (nc as usize, nr as usize);
                        if *mask.get(nc, nr) && !seen[nr * w + nc] {
                            seen[nr * w + nc] = true;
                            queue.push_back((nc, nr));
                        }
                    }
                }
            }
            comp.sort_by_key(|&(c, r)| (r, c));
            out.push(comp);
        }
    }
    out
}

/// Ray-crossing point-in-polygon test.
pub fn pnpoly(poly: &[Point2], p: Point2) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x {
            inside = !inside;
        }
        j = i;
    }
    inside
}

pub fn f1(pred: &Mask, gt: &Mask) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
    for (p, g) in pred.as_slice().iter().zip(gt.as_slice()) {
        match (p, g) {
            (true, true) => tp += 1.0,
            (true, false) => fp += 1.0,
            (false, true) => fn_ += 1.0,
            _ => {}
        }
    }
    if tp == 0.0 {
        0.0
    } else {
        2.0 * tp / (2.0 * tp + fp + fn_)
    }
}
