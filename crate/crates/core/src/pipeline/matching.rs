use serde::{Deserialize, Serialize};

use crate::geometry::{same_angle_bounding_box, same_angle_iou, TiltedBox};
use crate::segmenter::RoughSegmentation;

use super::PipelineError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub iou_threshold: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self { iou_threshold: 0.5 }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(self.iou_threshold > 0.0 && self.iou_threshold <= 1.0) {
            return Err(PipelineError::InvalidConfig(format!(
                "iou_threshold must lie in (0, 1], got {}",
                self.iou_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub box_id: u32,
    pub component_id: u32,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MatchResult {
    pub pairs: Vec<MatchPair>,
    pub unmatched_boxes: Vec<u32>,
    pub unmatched_components: Vec<u32>,
}

impl MatchResult {
    pub fn pair_for_box(&self, box_id: u32) -> Option<&MatchPair> {
        self.pairs.iter().find(|p| p.box_id == box_id)
    }
}

/// Same-angle IoU between every box and every component's bounding box at
/// that box's angle, as `(box_id, component_id, iou)`.
pub fn iou_table(boxes: &[(u32, TiltedBox)], seg: &RoughSegmentation) -> Vec<MatchPair> {
    let mut out = Vec::with_capacity(boxes.len() * seg.components.len());
    for (box_id, bx) in boxes {
        for comp in &seg.components {
            let Ok(cb) = same_angle_bounding_box(&comp.mask, bx.angle) else {
                continue;
            };
            let iou = same_angle_iou(bx, &cb).expect("constructed at the box angle");
            out.push(MatchPair {
                box_id: *box_id,
                component_id: comp.id,
                iou,
            });
        }
    }
    out
}

/// One-to-one greedy assignment in descending IoU; pairs below the
/// threshold are never formed.
pub fn match_boxes(boxes: &[(u32, TiltedBox)], seg: &RoughSegmentation, config: &MatchConfig) -> MatchResult {
    let mut candidates: Vec<MatchPair> = iou_table(boxes, seg)
        .into_iter()
        .filter(|p| p.iou >= config.iou_threshold)
        .collect();
    candidates.sort_by(|a, b| {
        b.iou
            .total_cmp(&a.iou)
            .then(a.box_id.cmp(&b.box_id))
            .then(a.component_id.cmp(&b.component_id))
    });
    let mut used_boxes = std::collections::BTreeSet::new();
    let mut used_comps = std::collections::BTreeSet::new();
    let mut pairs = Vec::new();
    for c in candidates {
        if used_boxes.contains(&c.box_id) || used_comps.contains(&c.component_id) {
            continue;
        }
        used_boxes.insert(c.box_id);
        used_comps.insert(c.component_id);
        pairs.push(c);
    }
    pairs.sort_by_key(|p| p.box_id);
    MatchResult {
        unmatched_boxes: boxes
            .iter()
            .map(|(id, _)| *id)
            .filter(|id| !used_boxes.contains(id))
            .collect(),
        unmatched_components: seg
            .components
            .iter()
            .map(|c| c.id)
            .filter(|id| !used_comps.contains(id))
            .collect(),
        pairs,
    }
}
