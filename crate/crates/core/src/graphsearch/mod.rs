//! Graph-search boundary refinement of one rough component.
//!
//! The image is resampled along columns normal to the rough boundary, each
//! node gets the negated directional gradient magnitude as its cost, and a
//! cyclic dynamic program picks one node per column under a smoothness
//! constraint. Box limits, neighbouring objects' domains and the extreme
//! points enter as large additive costs.

mod columns;
mod contour;
mod domain;
mod solve;

pub use columns::{build_column_graph, trace_outer_boundary, ColumnGraph, CostImage};
pub use contour::{contour_to_mask, is_simple_polygon, point_in_polygon};
pub use domain::{compute_domain_cells, DomainCells};
pub use solve::{solve_closed_path, Contour};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::TiltedBox;
use crate::raster::{pixel_center, Mask};
use crate::segmenter::Component;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphSearchError {
    #[error("rough segmentation has no components")]
    NoComponents,
    #[error("component boundary has only {0} pixels (need at least 8)")]
    DegenerateBoundary(usize),
    #[error("no admissible closed path: {0}")]
    Infeasible(String),
    #[error("optimal contour intersects itself")]
    SelfIntersecting,
    #[error("contour covers no pixel centers")]
    EmptyMask,
    #[error("invalid graph-search config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GsConfig {
    pub n_columns: usize,
    pub nodes_per_column: usize,
    /// `None` derives it from the component area: `0.5·sqrt(area/π)` clamped to `[5, 40]`.
    pub column_half_length: Option<f64>,
    pub smoothness_delta: usize,
    pub exclusion_cost: f64,
    pub inclusion_bonus: f64,
    /// Gaussian pre-smoothing before differentiation; 0 disables it.
    pub gradient_sigma: f64,
    /// Nodes up to this far outside the box still count as inside. Extreme
    /// clicks mark pixel centers, whose pixels reach half a pixel further.
    pub box_margin: f64,
}

impl Default for GsConfig {
    fn default() -> Self {
        Self {
            n_columns: 120,
            nodes_per_column: 61,
            column_half_length: None,
            smoothness_delta: 2,
            exclusion_cost: 1e6,
            inclusion_bonus: -1e6,
            gradient_sigma: 1.0,
            box_margin: 0.5,
        }
    }
}

impl GsConfig {
    pub fn validate(&self) -> Result<(), GraphSearchError> {
        let bad = |m: &str| Err(GraphSearchError::InvalidConfig(m.to_string()));
        if self.n_columns < 8 {
            return bad("n_columns must be at least 8");
        }
        if self.nodes_per_column < 3 || self.nodes_per_column.is_multiple_of(2) {
            return bad("nodes_per_column must be odd and at least 3");
        }
        if self.smoothness_delta < 1 {
            return bad("smoothness_delta must be at least 1");
        }
        if let Some(l) = self.column_half_length {
            if !(l > 0.0) {
                return bad("column_half_length must be positive");
            }
        }
        if !(self.exclusion_cost > 0.0) || !(self.inclusion_bonus < 0.0) {
            return bad("exclusion_cost must be positive and inclusion_bonus negative");
        }
        if self.gradient_sigma < 0.0 || self.box_margin < 0.0 {
            return bad("gradient_sigma and box_margin must be non-negative");
        }
        Ok(())
    }

    pub fn half_length_for_area(&self, area: usize) -> f64 {
        self.column_half_length
            .unwrap_or_else(|| (0.5 * (area as f64 / std::f64::consts::PI).sqrt()).clamp(5.0, 40.0))
    }
}

/// Outcome of a successful refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub mask: Mask,
    pub contour: Contour,
    pub graph: ColumnGraph,
    pub warnings: Vec<String>,
}

/// Refines `component` inside `bx`, restricted to its domain cell.
///
/// The returned mask is clipped to the box footprint and the domain cell and
/// reduced to its largest 8-connected piece.
pub fn refine_component(
    image: &CostImage,
    component: &Component,
    bx: &TiltedBox,
    cells: &DomainCells,
    config: &GsConfig,
) -> Result<Refinement, GraphSearchError> {
    let mut graph = build_column_graph(image, component, bx, cells, config)?;
    let contour = solve_closed_path(&graph)?;
    let (w, h) = image.dims();
    let raw = contour_to_mask(&contour, w, h)?;
    let clipped = Mask::from_fn(w, h, |c, r| {
        *raw.get(c, r) && cells.owner(c, r) == component.id && bx.contains(pixel_center(c, r))
    });
    let seg = crate::segmenter::label_mask(&clipped, 1);
    let mut pieces = seg.components;
    if pieces.is_empty() {
        return Err(GraphSearchError::EmptyMask);
    }
    if pieces.len() > 1 {
        graph
            .warnings
            .push(format!("refined mask split into {} pieces; kept the largest", pieces.len()));
    }
    // largest piece, earliest id on ties
    pieces.sort_by(|a, b| b.area().cmp(&a.area()).then(a.id.cmp(&b.id)));
    let mask = pieces.swap_remove(0).mask;
    let warnings = graph.warnings.clone();
    Ok(Refinement {
        mask,
        contour,
        graph,
        warnings,
    })
}
