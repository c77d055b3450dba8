use std::io::Write;

use crate::geometry::{Point2, TiltedBox};
use crate::imageops;
use crate::raster::{bilinear, pixel_center, GrayImage, Mask};
use crate::segmenter::Component;

use super::solve::Contour;
use super::{DomainCells, GraphSearchError, GsConfig};

/// Image prepared for gradient sampling (optionally pre-smoothed).
#[derive(Debug, Clone)]
pub struct CostImage {
    smoothed: GrayImage,
}

impl CostImage {
    pub fn new(image: &GrayImage, gradient_sigma: f64) -> Self {
        Self {
            smoothed: imageops::gaussian_blur(image, gradient_sigma),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.smoothed.dims()
    }

    pub fn sample(&self, p: Point2) -> f64 {
        bilinear(&self.smoothed, p)
    }
}

/// Columns normal to a rough boundary, in boundary traversal order.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnGraph {
    pub n_columns: usize,
    pub nodes_per_column: usize,
    pub smoothness_delta: usize,
    pub base: Vec<Point2>,
    /// Unit outward normals.
    pub normal: Vec<Point2>,
    /// Distance between adjacent nodes along a column.
    pub step: f64,
    /// Row-major `n_columns × nodes_per_column`.
    pub cost: Vec<f64>,
    pub excluded: Vec<bool>,
    pub forced_node: Vec<Option<usize>>,
    pub warnings: Vec<String>,
}

impl ColumnGraph {
    /// Graph without geometry, for exercising the solver directly.
    pub fn from_costs(
        n_columns: usize,
        nodes_per_column: usize,
        cost: Vec<f64>,
        smoothness_delta: usize,
        forced_node: Vec<Option<usize>>,
    ) -> Self {
        assert_eq!(cost.len(), n_columns * nodes_per_column);
        assert_eq!(forced_node.len(), n_columns);
        Self {
            n_columns,
            nodes_per_column,
            smoothness_delta,
            base: vec![Point2::default(); n_columns],
            normal: vec![Point2::new(1.0, 0.0); n_columns],
            step: 1.0,
            excluded: vec![false; cost.len()],
            cost,
            forced_node,
            warnings: Vec::new(),
        }
    }

    #[inline]
    pub fn cost_at(&self, column: usize, node: usize) -> f64 {
        self.cost[column * self.nodes_per_column + node]
    }

    #[inline]
    pub fn is_excluded(&self, column: usize, node: usize) -> bool {
        self.excluded[column * self.nodes_per_column + node]
    }

    /// Signed offset of a node from the column base, in pixels.
    #[inline]
    pub fn offset(&self, node: usize) -> f64 {
        (node as f64 - (self.nodes_per_column - 1) as f64 / 2.0) * self.step
    }

    #[inline]
    pub fn node_position(&self, column: usize, node: usize) -> Point2 {
        self.base[column] + self.normal[column] * self.offset(node)
    }

    pub fn half_length(&self) -> f64 {
        self.offset(self.nodes_per_column - 1)
    }

    /// Unfolded cost matrix with the chosen path, one CSV row per node.
    pub fn write_debug_csv<W: Write>(&self, contour: Option<&Contour>, mut out: W) -> std::io::Result<()> {
        writeln!(out, "column,node,cost,chosen")?;
        for col in 0..self.n_columns {
            let chosen = contour.map(|c| c.selection[col]);
            for node in 0..self.nodes_per_column {
                writeln!(
                    out,
                    "{},{},{},{}",
                    col,
                    node,
                    self.cost_at(col, node),
                    u8::from(chosen == Some(node))
                )?;
            }
        }
        Ok(())
    }
}

// Clockwise on screen (y down), starting west.
const DIRS: [(i64, i64); 8] = [(-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1)];

fn dir_index(dx: i64, dy: i64) -> usize {
    DIRS.iter().position(|&d| d == (dx, dy)).expect("8-neighbour offset")
}

/// Moore-neighbour trace of the outer boundary, as pixel coordinates.
/// The first pixel in raster order starts the trace; the closing pixel is not repeated.
pub fn trace_outer_boundary(mask: &Mask) -> Vec<(usize, usize)> {
    let Some(start) = mask.pixels().next() else {
        return Vec::new();
    };
    let fg = |c: i64, r: i64| mask.get_checked(c, r).copied().unwrap_or(false);
    let start = (start.0 as i64, start.1 as i64);
    let mut contour = Vec::new();
    let mut current = start;
    // the west neighbour of the first raster pixel is background
    let mut back = 0usize;
    let mut first_move: Option<((i64, i64), usize)> = None;
    let limit = 4 * mask.len() + 8;
    for _ in 0..limit {
        let mut next = None;
        for k in 1..=8 {
            let d = (back + k) % 8;
            let q = (current.0 + DIRS[d].0, current.1 + DIRS[d].1);
            if fg(q.0, q.1) {
                let prev = (back + k - 1) % 8;
                let b = (current.0 + DIRS[prev].0, current.1 + DIRS[prev].1);
                next = Some((q, dir_index(b.0 - q.0, b.1 - q.1)));
                break;
            }
        }
        let Some(step) = next else {
            // isolated pixel
            contour.push(current);
            break;
        };
        // leaving the start the same way twice closes the loop
        match first_move {
            None => first_move = Some(step),
            Some(first) if current == start && step == first => break,
            Some(_) => {}
        }
        contour.push(current);
        current = step.0;
        back = step.1;
    }
    contour.into_iter().map(|(c, r)| (c as usize, r as usize)).collect()
}

fn signed_area(poly: &[Point2]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let a = poly[i];
            let b = poly[(i + 1) % n];
            a.x * b.y - b.x * a.y
        })
        .sum::<f64>()
        * 0.5
}

/// `n` points spaced uniformly by arc length along a closed polyline.
fn resample_closed(poly: &[Point2], n: usize) -> Vec<Point2> {
    let m = poly.len();
    let seg_len: Vec<f64> = (0..m).map(|i| poly[i].dist(poly[(i + 1) % m])).collect();
    let total: f64 = seg_len.iter().sum();
    let mut out = Vec::with_capacity(n);
    let mut seg = 0usize;
    let mut acc = 0.0;
    for i in 0..n {
        let target = total * i as f64 / n as f64;
        while seg < m - 1 && acc + seg_len[seg] < target {
            acc += seg_len[seg];
            seg += 1;
        }
        let a = poly[seg];
        let b = poly[(seg + 1) % m];
        let t = if seg_len[seg] > 0.0 {
            ((target - acc) / seg_len[seg]).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push(a + (b - a) * t);
    }
    out
}

/// Builds the column graph for `component` inside `bx`.
pub fn build_column_graph(
    image: &CostImage,
    component: &Component,
    bx: &TiltedBox,
    cells: &DomainCells,
    config: &GsConfig,
) -> Result<ColumnGraph, GraphSearchError> {
    config.validate()?;
    let boundary = trace_outer_boundary(&component.mask);
    if boundary.len() < 8 {
        return Err(GraphSearchError::DegenerateBoundary(boundary.len()));
    }
    let mut poly: Vec<Point2> = boundary.iter().map(|&(c, r)| pixel_center(c, r)).collect();
    if signed_area(&poly) < 0.0 {
        poly.reverse();
    }

    let n = config.n_columns;
    let m = config.nodes_per_column;
    let base = resample_closed(&poly, n);

    // outward normals from tangents averaged over a 5-point window
    let unit_tangent = |i: usize| {
        let t = base[(i + 1) % n] - base[(i + n - 1) % n];
        let len = t.norm();
        if len > 0.0 {
            t * (1.0 / len)
        } else {
            t
        }
    };
    let tangents: Vec<Point2> = (0..n).map(unit_tangent).collect();
    let normal: Vec<Point2> = (0..n)
        .map(|i| {
            let mut t = Point2::default();
            for k in 0..5 {
                t = t + tangents[(i + n + k - 2) % n];
            }
            let len = t.norm();
            let t = if len > 0.0 { t * (1.0 / len) } else { Point2::new(1.0, 0.0) };
            // outward for a positively oriented polygon
            Point2::new(t.y, -t.x)
        })
        .collect();

    let half = config.half_length_for_area(component.area());
    let step = 2.0 * half / (m - 1) as f64;
    let (w, h) = image.dims();

    let mut graph = ColumnGraph {
        n_columns: n,
        nodes_per_column: m,
        smoothness_delta: config.smoothness_delta,
        base,
        normal,
        step,
        cost: vec![0.0; n * m],
        excluded: vec![false; n * m],
        forced_node: vec![None; n],
        warnings: Vec::new(),
    };

    for col in 0..n {
        let nrm = graph.normal[col];
        for node in 0..m {
            let p = graph.node_position(col, node);
            let ahead = image.sample(p + nrm * step);
            let behind = image.sample(p - nrm * step);
            let gradient = (ahead - behind) / (2.0 * step);
            let idx = col * m + node;
            graph.cost[idx] = -gradient.abs();

            let in_image = p.x >= 0.0 && p.y >= 0.0 && p.x < w as f64 && p.y < h as f64;
            let in_cell = cells.owner_at(p.x, p.y) == Some(component.id);
            let in_box = bx.contains_with_margin(p, config.box_margin);
            if !(in_image && in_cell && in_box) {
                graph.cost[idx] += config.exclusion_cost;
                graph.excluded[idx] = true;
            }
        }
    }

    force_extreme_points(&mut graph, bx, config);
    Ok(graph)
}

fn force_extreme_points(graph: &mut ColumnGraph, bx: &TiltedBox, config: &GsConfig) {
    let n = graph.n_columns;
    let m = graph.nodes_per_column;
    let half = graph.half_length();
    for (label, e) in [
        ("top", bx.extreme_points.top),
        ("bottom", bx.extreme_points.bottom),
        ("left", bx.extreme_points.left),
        ("right", bx.extreme_points.right),
    ] {
        let mut ranked: Vec<(f64, usize)> = (0..n)
            .map(|col| {
                let a = graph.node_position(col, 0);
                let b = graph.node_position(col, m - 1);
                (crate::boxgt::point_segment_distance(e, a, b), col)
            })
            .collect();
        ranked.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        let Some(&(_, col)) = ranked.iter().find(|(_, c)| graph.forced_node[*c].is_none()) else {
            continue;
        };
        let along = (e - graph.base[col]).dot(graph.normal[col]);
        if along.abs() > half + 0.5 * graph.step {
            let msg = format!(
                "{label} extreme point lies {:.2} px beyond column {col}; clamped to the end node",
                along.abs() - half
            );
            tracing::warn!("{msg}");
            graph.warnings.push(msg);
        }
        let node = ((along / graph.step + (m - 1) as f64 / 2.0).round().max(0.0) as usize).min(m - 1);
        graph.forced_node[col] = Some(node);
        for j in 0..m {
            let idx = col * m + j;
            if j == node {
                graph.cost[idx] += config.inclusion_bonus;
            } else {
                graph.cost[idx] += config.exclusion_cost;
                graph.excluded[idx] = true;
            }
        }
    }
}
