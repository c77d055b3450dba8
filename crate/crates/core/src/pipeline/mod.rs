//! Box ground truth → rough segmentation → matching → refinement → fine
//! ground truth, for one image at a time.

mod dataset;
mod matching;

pub use dataset::{
    artifact_paths, run_dataset, write_artifacts, DatasetSummary, ImageOutcome, ARTIFACT_DIRS,
};
pub use matching::{iou_table, match_boxes, MatchConfig, MatchPair, MatchResult};

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{AnnotationError, AnnotationFile};
use crate::boxgt::{box_footprint, rasterize_box_gt, BoxGroundTruth, BoxGtConfig, BoxGtError, LabelClass, LabelMap};
use crate::geometry::TiltedBox;
use crate::graphsearch::{compute_domain_cells, refine_component, ColumnGraph, Contour, CostImage, GsConfig};
use crate::io::IoError;
use crate::raster::{GrayImage, Mask, Raster};
use crate::segmenter::{binarize_and_label, RoughSegmentation, RoughSegmenter, SegmenterError, DEFAULT_BINARIZE_THRESHOLD};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Segmenter(#[from] SegmenterError),
    #[error(transparent)]
    BoxGt(#[from] BoxGtError),
    #[error("image {image}: annotation says {annotated:?} but the image is {actual:?}")]
    DimensionMismatch {
        image: String,
        annotated: (usize, usize),
        actual: (usize, usize),
    },
    #[error("matched box {box_id} (component {component_id}) has no refined or fallback mask")]
    MissingMask { box_id: u32, component_id: u32 },
    #[error("no annotation file for image {0}")]
    MissingAnnotation(String),
    #[error("{path}: {message}")]
    Output { path: std::path::PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Provenance {
    BoxGt,
    GsMask,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FineGroundTruth {
    pub labels: LabelMap,
    pub provenance: Raster<Provenance>,
}

impl FineGroundTruth {
    pub fn object_mask(&self) -> Mask {
        self.labels.map(|&c| c == LabelClass::Object)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub boxgt: BoxGtConfig,
    pub matching: MatchConfig,
    pub gs: GsConfig,
    /// Probability at or above which a pixel is rough foreground.
    pub binarize_threshold: f64,
    pub min_component_area: usize,
    /// Also write per-box column-graph CSVs under `debug/`.
    pub debug_dump: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            boxgt: BoxGtConfig::default(),
            matching: MatchConfig::default(),
            gs: GsConfig::default(),
            binarize_threshold: DEFAULT_BINARIZE_THRESHOLD,
            min_component_area: 1,
            debug_dump: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        self.boxgt.validate()?;
        self.matching.validate()?;
        self.gs
            .validate()
            .map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
        if !(self.binarize_threshold > 0.0 && self.binarize_threshold <= 1.0) {
            return Err(PipelineError::InvalidConfig(format!(
                "binarize_threshold must lie in (0, 1], got {}",
                self.binarize_threshold
            )));
        }
        Ok(())
    }
}

/// Fine ground truth from the box ground truth and the masks of matched boxes.
///
/// `masks` maps component id to its refined (or fallback) mask. Every matched
/// footprint first becomes background, then every mask pixel inside its own
/// footprint becomes object, so object wins where footprints overlap.
pub fn assemble_fine_gt(
    box_gt: &LabelMap,
    matches: &MatchResult,
    masks: &BTreeMap<u32, Mask>,
    boxes: &[(u32, TiltedBox)],
) -> Result<FineGroundTruth, PipelineError> {
    let (w, h) = box_gt.dims();
    let mut labels = box_gt.clone();
    let mut provenance = Raster::filled(w, h, Provenance::BoxGt);
    let mut footprints = Vec::with_capacity(matches.pairs.len());
    for pair in &matches.pairs {
        let mask = masks.get(&pair.component_id).ok_or(PipelineError::MissingMask {
            box_id: pair.box_id,
            component_id: pair.component_id,
        })?;
        let Some((_, bx)) = boxes.iter().find(|(id, _)| *id == pair.box_id) else {
            return Err(PipelineError::MissingMask {
                box_id: pair.box_id,
                component_id: pair.component_id,
            });
        };
        let fp = box_footprint(bx, w, h);
        for (c, r) in fp.pixels() {
            labels.set(c, r, LabelClass::Background);
            provenance.set(c, r, Provenance::GsMask);
        }
        footprints.push((fp, mask));
    }
    for (fp, mask) in footprints {
        for (c, r) in mask.pixels() {
            if *fp.get(c, r) {
                labels.set(c, r, LabelClass::Object);
            }
        }
    }
    Ok(FineGroundTruth { labels, provenance })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxStatus {
    Refined,
    RefinementFallback,
    Filtered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxReport {
    pub box_id: u32,
    pub status: BoxStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub component_id: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iou: Option<f64>,
    /// Highest IoU against any component, for filtered boxes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_iou: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Timings {
    pub boxgt_ms: f64,
    pub segment_ms: f64,
    pub match_ms: f64,
    pub refine_ms: f64,
    pub assemble_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageReport {
    pub image: String,
    pub width: usize,
    pub height: usize,
    pub empty_annotation: bool,
    pub n_components: usize,
    pub boxes: Vec<BoxReport>,
    pub unmatched_components: Vec<u32>,
    pub ignore_pixels_box_gt: usize,
    pub ignore_pixels_fine_gt: usize,
    /// Wall-clock times; kept out of the persisted report so reruns are
    /// byte-identical, and written separately.
    #[serde(skip)]
    pub timings: Timings,
}

impl ImageReport {
    pub fn count(&self, status: BoxStatus) -> usize {
        self.boxes.iter().filter(|b| b.status == status).count()
    }

    pub fn summary_line(&self) -> String {
        format!(
            "{}: {} boxes, {} refined, {} fallback, {} filtered, ignore {} -> {}",
            self.image,
            self.boxes.len(),
            self.count(BoxStatus::Refined),
            self.count(BoxStatus::RefinementFallback),
            self.count(BoxStatus::Filtered),
            self.ignore_pixels_box_gt,
            self.ignore_pixels_fine_gt
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinedObject {
    pub box_id: u32,
    pub component_id: u32,
    pub mask: Mask,
    /// `None` when the rough mask was used as a fallback.
    pub graph: Option<(ColumnGraph, Contour)>,
}

#[derive(Debug, Clone)]
pub struct ImageResult {
    pub id: String,
    /// Boxes derived from the annotation, keyed by object id.
    pub boxes: Vec<(u32, TiltedBox)>,
    pub box_gt: BoxGroundTruth,
    pub rough: RoughSegmentation,
    pub matches: MatchResult,
    pub refined: Vec<RefinedObject>,
    pub fine_gt: FineGroundTruth,
    pub report: ImageReport,
    pub debug_dump: bool,
}

impl ImageResult {
    /// Refined masks labelled with their box ids, 0 elsewhere.
    pub fn refined_labels(&self) -> Raster<u32> {
        let (w, h) = self.rough.dims();
        let mut out = Raster::filled(w, h, 0u32);
        for obj in &self.refined {
            for (c, r) in obj.mask.pixels() {
                out.set(c, r, obj.box_id);
            }
        }
        out
    }
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Runs the whole chain on one image. Per-box failures are recorded in the
/// report; only invalid inputs abort.
pub fn run_image(
    id: &str,
    image: &GrayImage,
    annotation: &AnnotationFile,
    provider: &dyn RoughSegmenter,
    config: &PipelineConfig,
) -> Result<ImageResult, PipelineError> {
    config.validate()?;
    let start = Instant::now();
    let (w, h) = image.dims();
    let annotated = (annotation.width as usize, annotation.height as usize);
    if annotated != (w, h) {
        return Err(PipelineError::DimensionMismatch {
            image: id.to_string(),
            annotated,
            actual: (w, h),
        });
    }
    let boxes = annotation.boxes()?;
    let mut timings = Timings::default();

    let t = Instant::now();
    let plain: Vec<TiltedBox> = boxes.iter().map(|(_, b)| *b).collect();
    let box_gt = rasterize_box_gt(&plain, w, h, &config.boxgt)?;
    timings.boxgt_ms = ms(t);

    let t = Instant::now();
    let prob = provider.segment(id, image)?;
    prob.ensure_dims((w, h))?;
    let rough = binarize_and_label(&prob, config.binarize_threshold, config.min_component_area);
    timings.segment_ms = ms(t);

    let t = Instant::now();
    let matches = match_boxes(&boxes, &rough, &config.matching);
    timings.match_ms = ms(t);

    let t = Instant::now();
    let refined: Vec<(RefinedObject, BoxReport)> = if matches.pairs.is_empty() {
        Vec::new()
    } else {
        let cells = compute_domain_cells(&rough).map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
        let cost_image = CostImage::new(image, config.gs.gradient_sigma);
        matches
            .pairs
            .par_iter()
            .map(|pair| {
                let bx = &boxes.iter().find(|(bid, _)| *bid == pair.box_id).expect("matched box").1;
                let comp = rough.component(pair.component_id).expect("matched component");
                let mut report = BoxReport {
                    box_id: pair.box_id,
                    status: BoxStatus::Refined,
                    component_id: Some(pair.component_id),
                    iou: Some(pair.iou),
                    best_iou: None,
                    error: None,
                    warnings: Vec::new(),
                };
                let obj = match refine_component(&cost_image, comp, bx, &cells, &config.gs) {
                    Ok(r) => {
                        report.warnings = r.warnings;
                        RefinedObject {
                            box_id: pair.box_id,
                            component_id: pair.component_id,
                            mask: r.mask,
                            graph: Some((r.graph, r.contour)),
                        }
                    }
                    Err(e) => {
                        tracing::warn!(image = id, box_id = pair.box_id, "refinement failed: {e}");
                        report.status = BoxStatus::RefinementFallback;
                        report.error = Some(e.to_string());
                        let fp = box_footprint(bx, w, h);
                        RefinedObject {
                            box_id: pair.box_id,
                            component_id: pair.component_id,
                            mask: Mask::from_fn(w, h, |c, r| *comp.mask.get(c, r) && *fp.get(c, r)),
                            graph: None,
                        }
                    }
                };
                (obj, report)
            })
            .collect()
    };
    timings.refine_ms = ms(t);

    let t = Instant::now();
    let masks: BTreeMap<u32, Mask> = refined
        .iter()
        .map(|(o, _)| (o.component_id, o.mask.clone()))
        .collect();
    let fine_gt = assemble_fine_gt(&box_gt.labels, &matches, &masks, &boxes)?;
    timings.assemble_ms = ms(t);

    let table = iou_table(&boxes, &rough);
    let mut box_reports: Vec<BoxReport> = refined.iter().map(|(_, r)| r.clone()).collect();
    for &box_id in &matches.unmatched_boxes {
        let best = table
            .iter()
            .filter(|p| p.box_id == box_id)
            .map(|p| p.iou)
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
        box_reports.push(BoxReport {
            box_id,
            status: BoxStatus::Filtered,
            component_id: None,
            iou: None,
            best_iou: best,
            error: None,
            warnings: Vec::new(),
        });
    }
    box_reports.sort_by_key(|b| b.box_id);
    timings.total_ms = ms(start);

    let report = ImageReport {
        image: id.to_string(),
        width: w,
        height: h,
        empty_annotation: box_gt.empty_annotation,
        n_components: rough.components.len(),
        boxes: box_reports,
        unmatched_components: matches.unmatched_components.clone(),
        ignore_pixels_box_gt: box_gt.labels.count_class(LabelClass::Ignore),
        ignore_pixels_fine_gt: fine_gt.labels.count_class(LabelClass::Ignore),
        timings,
    };
    let refined = refined.into_iter().map(|(o, _)| o).collect();
    Ok(ImageResult {
        id: id.to_string(),
        boxes,
        box_gt,
        rough,
        matches,
        refined,
        fine_gt,
        report,
        debug_dump: config.debug_dump,
    })
}
