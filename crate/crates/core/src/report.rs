//! Directory-level evaluation: pairs prediction and ground-truth files by
//! image id and scores them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::eval::{aggregate, macro_f1, pixel_f1_ignoring, EvalError, PixelScore};
use crate::io::{image_id, list_images, load_instance_labels, IoError};
use crate::raster::Raster;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("no image files in {0}")]
    Empty(PathBuf),
    #[error("file sets differ: only in pred {only_pred:?}, only in gt {only_gt:?}")]
    Unmatched {
        only_pred: Vec<String>,
        only_gt: Vec<String>,
    },
    #[error("image {id}: {source}")]
    Image {
        id: String,
        #[source]
        source: EvalError,
    },
    #[error("{path}: {source}")]
    Fs {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Foreground is any nonzero value, minus the values listed here.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Ground-truth value excluded from all counts.
    pub gt_ignore: Option<u32>,
    /// Prediction value treated as background.
    pub pred_ignore: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageScore {
    pub id: String,
    pub score: PixelScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub pred_dir: PathBuf,
    pub gt_dir: PathBuf,
    pub options: EvalOptions,
    pub images: Vec<ImageScore>,
    /// Counts summed over all images.
    pub micro: PixelScore,
    /// Unweighted mean of per-image F1.
    pub macro_f1: f64,
    pub config_hash: String,
    pub input_hash: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash over `(name, content hash)` lines of the files, in the given order.
pub fn content_hash(files: &[(String, PathBuf)]) -> Result<String, ReportError> {
    let mut h = Sha256::new();
    for (name, path) in files {
        let bytes = std::fs::read(path).map_err(|source| ReportError::Fs {
            path: path.clone(),
            source,
        })?;
        h.update(format!("{name}\0{}\n", sha256_hex(&bytes)).as_bytes());
    }
    Ok(hex::encode(h.finalize()))
}

fn by_id(dir: &Path) -> Result<BTreeMap<String, PathBuf>, ReportError> {
    let files = list_images(dir)?;
    if files.is_empty() {
        return Err(ReportError::Empty(dir.to_path_buf()));
    }
    Ok(files.into_iter().map(|p| (image_id(&p), p)).collect())
}

fn score_pair(pred: &Raster<u32>, gt: &Raster<u32>, options: &EvalOptions) -> Result<PixelScore, EvalError> {
    let p = pred.map(|&v| v != 0 && Some(v) != options.pred_ignore);
    let g = gt.map(|&v| v != 0 && Some(v) != options.gt_ignore);
    let ignore = options.gt_ignore.map(|ig| gt.map(|&v| v == ig));
    pixel_f1_ignoring(&p, &g, ignore.as_ref())
}

pub fn evaluate_dirs(pred_dir: &Path, gt_dir: &Path, options: &EvalOptions) -> Result<EvalReport, ReportError> {
    let pred = by_id(pred_dir)?;
    let gt = by_id(gt_dir)?;
    let only_pred: Vec<String> = pred.keys().filter(|k| !gt.contains_key(*k)).cloned().collect();
    let only_gt: Vec<String> = gt.keys().filter(|k| !pred.contains_key(*k)).cloned().collect();
    if !only_pred.is_empty() || !only_gt.is_empty() {
        return Err(ReportError::Unmatched { only_pred, only_gt });
    }

    let mut images = Vec::with_capacity(pred.len());
    let mut hashed = Vec::with_capacity(2 * pred.len());
    for (id, pred_path) in &pred {
        let gt_path = &gt[id];
        let p = load_instance_labels(pred_path)?;
        let g = load_instance_labels(gt_path)?;
        let score = score_pair(&p, &g, options).map_err(|source| ReportError::Image {
            id: id.clone(),
            source,
        })?;
        images.push(ImageScore { id: id.clone(), score });
        hashed.push((format!("pred/{id}"), pred_path.clone()));
        hashed.push((format!("gt/{id}"), gt_path.clone()));
    }
    let scores: Vec<PixelScore> = images.iter().map(|s| s.score).collect();
    Ok(EvalReport {
        pred_dir: pred_dir.to_path_buf(),
        gt_dir: gt_dir.to_path_buf(),
        micro: aggregate(&scores)?,
        macro_f1: macro_f1(&scores)?,
        config_hash: sha256_hex(&serde_json::to_vec(options).expect("options serialize")),
        input_hash: content_hash(&hashed)?,
        options: options.clone(),
        images,
    })
}

pub fn format_table(report: &EvalReport) -> String {
    let width = report.images.iter().map(|s| s.id.len()).max().unwrap_or(0).max(9);
    let mut out = format!(
        "{:<width$}  {:>10}  {:>10}  {:>10}  {:>9}  {:>6}  {:>6}\n",
        "image", "tp", "fp", "fn", "precision", "recall", "f1"
    );
    let row = |name: &str, s: &PixelScore| {
        format!(
            "{:<width$}  {:>10}  {:>10}  {:>10}  {:>9.4}  {:>6.4}  {:>6.4}\n",
            name, s.tp, s.fp, s.fn_, s.precision, s.recall, s.f1
        )
    };
    for s in &report.images {
        out += &row(&s.id, &s.score);
    }
    out += &row("micro avg", &report.micro);
    out += &format!("{:<width$}  {:>58.4}\n", "macro f1", report.macro_f1);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::save_instance_labels;

    fn write(dir: &Path, id: &str, data: Vec<u32>) {
        save_instance_labels(&Raster::from_vec(3, 2, data), &dir.join(format!("{id}.png"))).unwrap();
    }

    #[test]
    fn identical_dirs_score_one() {
        let d = tempfile::tempdir().unwrap();
        write(d.path(), "a", vec![0, 1, 1, 0, 2, 0]);
        write(d.path(), "b", vec![0, 0, 0, 3, 3, 3]);
        let r = evaluate_dirs(d.path(), d.path(), &EvalOptions::default()).unwrap();
        assert_eq!(r.micro.f1, 1.0);
        assert_eq!(r.macro_f1, 1.0);
        assert_eq!(r.images.len(), 2);
        assert!(format_table(&r).contains("micro avg"));
    }

    #[test]
    fn mismatched_sets_and_empty_dirs() {
        let p = tempfile::tempdir().unwrap();
        let g = tempfile::tempdir().unwrap();
        assert!(matches!(
            evaluate_dirs(p.path(), g.path(), &EvalOptions::default()),
            Err(ReportError::Empty(_))
        ));
        write(p.path(), "a", vec![0; 6]);
        write(g.path(), "b", vec![0; 6]);
        let err = evaluate_dirs(p.path(), g.path(), &EvalOptions::default()).unwrap_err();
        assert!(matches!(err, ReportError::Unmatched { .. }));
    }

    #[test]
    fn ignore_values() {
        let p = tempfile::tempdir().unwrap();
        let g = tempfile::tempdir().unwrap();
        write(p.path(), "a", vec![1, 1, 255, 0, 0, 0]);
        write(g.path(), "a", vec![1, 255, 0, 0, 0, 0]);
        let opts = EvalOptions {
            gt_ignore: Some(255),
            pred_ignore: Some(255),
        };
        let r = evaluate_dirs(p.path(), g.path(), &opts).unwrap();
        assert_eq!((r.micro.tp, r.micro.fp, r.micro.fn_), (1, 0, 0));
    }

    #[test]
    fn hashes_are_stable() {
        let d = tempfile::tempdir().unwrap();
        write(d.path(), "a", vec![0, 1, 1, 0, 2, 0]);
        let r1 = evaluate_dirs(d.path(), d.path(), &EvalOptions::default()).unwrap();
        let r2 = evaluate_dirs(d.path(), d.path(), &EvalOptions::default()).unwrap();
        assert_eq!(r1.input_hash, r2.input_hash);
        assert_eq!(r1.input_hash.len(), 64);
        write(d.path(), "a", vec![0, 1, 1, 0, 2, 1]);
        let r3 = evaluate_dirs(d.path(), d.path(), &EvalOptions::default()).unwrap();
        assert_ne!(r1.input_hash, r3.input_hash);
    }
}
