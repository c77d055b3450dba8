use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotation::AnnotationFile;
use crate::io::{ensure_dir, image_id, list_images, load_gray, save_instance_labels, save_label_map};
use crate::segmenter::RoughSegmenter;

use super::{run_image, ImageReport, ImageResult, PipelineConfig, PipelineError};

/// Subdirectories written for every image.
pub const ARTIFACT_DIRS: [&str; 5] = ["boxgt", "rough", "refined", "finegt", "report"];

pub fn artifact_paths(out: &Path, id: &str) -> [PathBuf; 5] {
    [
        out.join("boxgt").join(format!("{id}.png")),
        out.join("rough").join(format!("{id}.png")),
        out.join("refined").join(format!("{id}.png")),
        out.join("finegt").join(format!("{id}.png")),
        out.join("report").join(format!("{id}.json")),
    ]
}

fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    std::fs::write(path, text).map_err(|e| PipelineError::Output {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Persists one image's artifacts. Timings go to `timings/<id>.json`, apart
/// from the deterministic outputs.
pub fn write_artifacts(out: &Path, result: &ImageResult) -> Result<(), PipelineError> {
    for d in ARTIFACT_DIRS.iter().chain(["timings"].iter()) {
        ensure_dir(&out.join(d))?;
    }
    let [boxgt, rough, refined, finegt, report] = artifact_paths(out, &result.id);
    save_label_map(&result.box_gt.labels, &boxgt)?;
    save_instance_labels(&result.rough.label_map(), &rough)?;
    save_instance_labels(&result.refined_labels(), &refined)?;
    save_label_map(&result.fine_gt.labels, &finegt)?;
    let json = serde_json::to_string_pretty(&result.report).expect("report serializes") + "\n";
    write_text(&report, &json)?;
    let timings = serde_json::to_string_pretty(&result.report.timings).expect("timings serialize") + "\n";
    write_text(&out.join("timings").join(format!("{}.json", result.id)), &timings)?;

    if result.debug_dump {
        let dir = out.join("debug").join(&result.id);
        ensure_dir(&dir)?;
        for obj in &result.refined {
            let Some((graph, contour)) = &obj.graph else {
                continue;
            };
            let path = dir.join(format!("box_{}.csv", obj.box_id));
            let mut buf = Vec::new();
            graph
                .write_debug_csv(Some(contour), &mut buf)
                .expect("writing to memory");
            std::fs::write(&path, buf).map_err(|e| PipelineError::Output {
                path: path.clone(),
                message: e.to_string(),
            })?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageOutcome {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<ImageReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub images: Vec<ImageOutcome>,
}

impl DatasetSummary {
    pub fn n_failed(&self) -> usize {
        self.images.iter().filter(|o| o.error.is_some()).count()
    }

    pub fn all_failed(&self) -> bool {
        !self.images.is_empty() && self.n_failed() == self.images.len()
    }
}

fn process_one(
    path: &Path,
    annotations_dir: &Path,
    out_dir: &Path,
    provider: &dyn RoughSegmenter,
    config: &PipelineConfig,
) -> Result<ImageReport, PipelineError> {
    let id = image_id(path);
    let ann_path = annotations_dir.join(format!("{id}.json"));
    if !ann_path.is_file() {
        return Err(PipelineError::MissingAnnotation(id));
    }
    let annotation = AnnotationFile::load(&ann_path)?;
    let image = load_gray(path)?;
    let result = run_image(&id, &image, &annotation, provider, config)?;
    write_artifacts(out_dir, &result)?;
    Ok(result.report)
}

/// Runs every image in `images_dir` on a pool of `jobs` threads. Failures are
/// isolated per image.
pub fn run_dataset(
    images_dir: &Path,
    annotations_dir: &Path,
    out_dir: &Path,
    provider: &dyn RoughSegmenter,
    config: &PipelineConfig,
    jobs: usize,
) -> Result<DatasetSummary, PipelineError> {
    config.validate()?;
    let images = list_images(images_dir)?;
    ensure_dir(out_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
    let images: Vec<ImageOutcome> = pool.install(|| {
        images
            .par_iter()
            .map(|path| {
                let id = image_id(path);
                match process_one(path, annotations_dir, out_dir, provider, config) {
                    Ok(report) => {
                        tracing::info!("{}", report.summary_line());
                        ImageOutcome {
                            id,
                            report: Some(report),
                            error: None,
                        }
                    }
                    Err(e) => {
                        tracing::error!(image = %id, "{e}");
                        ImageOutcome {
                            id,
                            report: None,
                            error: Some(e.to_string()),
                        }
                    }
                }
            })
            .collect()
    });
    Ok(DatasetSummary { images })
}

