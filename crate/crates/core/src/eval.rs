//! Pixel-level scores.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imageops::{dilate_disk, erode_disk};
use crate::raster::Mask;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("dimension mismatch: {0:?} vs {1:?}")]
    DimensionMismatch((usize, usize), (usize, usize)),
    #[error("cannot aggregate an empty list of scores")]
    EmptyList,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PixelScore {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl PixelScore {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64) -> Self {
        let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
        }
    }
}

fn check_dims(pred: &Mask, gt: &Mask) -> Result<(), EvalError> {
    if !pred.same_dims(gt) {
        return Err(EvalError::DimensionMismatch(pred.dims(), gt.dims()));
    }
    Ok(())
}

pub fn pixel_f1(pred: &Mask, gt: &Mask) -> Result<PixelScore, EvalError> {
    pixel_f1_ignoring(pred, gt, None)
}

/// Counts over object pixels, skipping pixels flagged in `ignore`.
pub fn pixel_f1_ignoring(pred: &Mask, gt: &Mask, ignore: Option<&Mask>) -> Result<PixelScore, EvalError> {
    check_dims(pred, gt)?;
    if let Some(ig) = ignore {
        check_dims(ig, gt)?;
    }
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for (i, (&p, &g)) in pred.as_slice().iter().zip(gt.as_slice()).enumerate() {
        if ignore.is_some_and(|ig| ig.as_slice()[i]) {
            continue;
        }
        match (p, g) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(PixelScore::from_counts(tp, fp, fn_))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MorphologyOptimum {
    pub best_f1: f64,
    /// Positive for dilation, negative for erosion.
    pub step: i32,
}

/// Best F1 over `k ∈ [-max_steps, max_steps]` unit-disk dilations (k > 0)
/// or erosions (k < 0). Ties favour the smallest `|k|`, then erosion.
pub fn dilate_erode_to_max_f1(pred: &Mask, gt: &Mask, max_steps: u8) -> Result<MorphologyOptimum, EvalError> {
    check_dims(pred, gt)?;
    let mut best = MorphologyOptimum {
        best_f1: pixel_f1(pred, gt)?.f1,
        step: 0,
    };
    let mut grown = pred.clone();
    let mut shrunk = pred.clone();
    for k in 1..=max_steps as i32 {
        shrunk = erode_disk(&shrunk, 1);
        grown = dilate_disk(&grown, 1);
        for (step, m) in [(-k, &shrunk), (k, &grown)] {
            let f1 = pixel_f1(m, gt)?.f1;
            if f1 > best.best_f1 {
                best = MorphologyOptimum { best_f1: f1, step };
            }
        }
    }
    Ok(best)
}

/// Micro-average: sums the counts and recomputes the ratios.
pub fn aggregate(scores: &[PixelScore]) -> Result<PixelScore, EvalError> {
    if scores.is_empty() {
        return Err(EvalError::EmptyList);
    }
    let (tp, fp, fn_) = scores
        .iter()
        .fold((0, 0, 0), |(a, b, c), s| (a + s.tp, b + s.fp, c + s.fn_));
    Ok(PixelScore::from_counts(tp, fp, fn_))
}

/// Mean of per-image F1 values.
pub fn macro_f1(scores: &[PixelScore]) -> Result<f64, EvalError> {
    if scores.is_empty() {
        return Err(EvalError::EmptyList);
    }
    Ok(scores.iter().map(|s| s.f1).sum::<f64>() / scores.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::pixel_center;

    fn disk(w: usize, r: f64) -> Mask {
        let c = w as f64 / 2.0;
        Mask::from_fn(w, w, |x, y| {
            let p = pixel_center(x, y);
            (p.x - c).hypot(p.y - c) <= r
        })
    }

    #[test]
    fn identical_and_disjoint() {
        let a = disk(32, 8.0);
        assert_eq!(pixel_f1(&a, &a).unwrap().f1, 1.0);
        let empty = Mask::filled(32, 32, false);
        assert_eq!(pixel_f1(&empty, &a).unwrap().f1, 0.0);
        let shifted = Mask::from_fn(32, 32, |c, r| c < 4 && r < 4);
        let other = Mask::from_fn(32, 32, |c, r| c > 20 && r > 20);
        assert_eq!(pixel_f1(&shifted, &other).unwrap().f1, 0.0);
    }

    #[test]
    fn dimension_mismatch() {
        let a = Mask::filled(3, 3, true);
        let b = Mask::filled(4, 3, true);
        assert!(matches!(pixel_f1(&a, &b), Err(EvalError::DimensionMismatch(..))));
    }

    #[test]
    fn dilated_disk_ratio() {
        let gt = disk(64, 20.0);
        let pred = dilate_disk(&gt, 1);
        let a = gt.count() as f64;
        let ad = pred.count() as f64;
        let s = pixel_f1(&pred, &gt).unwrap();
        assert!((s.f1 - 2.0 * a / (a + ad)).abs() < 1e-12);
    }

    #[test]
    fn ignore_pixels_are_skipped() {
        let gt = Mask::from_fn(4, 1, |c, _| c < 2);
        let pred = Mask::from_fn(4, 1, |c, _| c < 3);
        let ignore = Mask::from_fn(4, 1, |c, _| c == 2);
        assert_eq!(pixel_f1_ignoring(&pred, &gt, Some(&ignore)).unwrap().f1, 1.0);
        assert!(pixel_f1(&pred, &gt).unwrap().f1 < 1.0);
    }

    #[test]
    fn morphology_search() {
        let gt = disk(64, 20.0);
        let r = dilate_erode_to_max_f1(&gt, &gt, 3).unwrap();
        assert_eq!((r.step, r.best_f1), (0, 1.0));
        let pred = erode_disk(&erode_disk(&gt, 1), 1);
        let r = dilate_erode_to_max_f1(&pred, &gt, 3).unwrap();
        assert_eq!(r.step, 2);
        assert_eq!(r.best_f1, 1.0);
    }

    #[test]
    fn aggregation() {
        let s = PixelScore::from_counts(10, 2, 3);
        assert_eq!(aggregate(&[s]).unwrap(), s);
        // one perfect image, one with an empty prediction
        let perfect = PixelScore::from_counts(50, 0, 0);
        let empty = PixelScore::from_counts(0, 0, 30);
        let agg = aggregate(&[perfect, empty]).unwrap();
        assert!((agg.f1 - 2.0 * 50.0 / (2.0 * 50.0 + 30.0)).abs() < 1e-12);
        assert!(matches!(aggregate(&[]), Err(EvalError::EmptyList)));
        assert!((macro_f1(&[perfect, empty]).unwrap() - 0.5).abs() < 1e-12);
    }
}
