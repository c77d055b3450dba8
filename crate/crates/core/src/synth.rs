//! Synthetic star-shaped objects with exact ground truth and simulated
//! six-click annotations.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{AnnotatedObject, AnnotationFile};
use crate::geometry::{box_from_clicks, orientation_angle, same_angle_bounding_box, ClickSequence, Point2};
use crate::io::{self, IoError};
use crate::raster::{pixel_center, GrayImage, Mask, Raster};

pub const BACKGROUND_INTENSITY: f64 = 0.25;
pub const OBJECT_INTENSITY: f64 = 0.75;
const PLACEMENT_RETRIES: usize = 1000;
const JITTER_RETRIES: usize = 50;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("could not place object {object} after {PLACEMENT_RETRIES} attempts")]
    PlacementFailed { object: usize },
    #[error("invalid synth config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{0}")]
    Write(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub image_size: usize,
    pub n_objects: usize,
    pub radius_range: (f64, f64),
    pub harmonic_count: usize,
    /// Upper bound on the summed harmonic amplitudes (relative to the radius).
    pub harmonic_amplitude: f64,
    /// Width of the logistic intensity step at the boundary, in pixels.
    pub edge_sharpness: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    /// Minimum gap between the outer envelopes of two objects.
    pub min_separation: f64,
    /// Uniform click jitter half-width in pixels; 0 disables it.
    pub click_jitter: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            image_size: 256,
            n_objects: 4,
            radius_range: (14.0, 28.0),
            harmonic_count: 3,
            harmonic_amplitude: 0.25,
            edge_sharpness: 0.7,
            noise_sigma: 0.04,
            seed: 0,
            min_separation: 4.0,
            click_jitter: 0.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidConfig(m.into()));
        if self.image_size < 16 {
            return bad("image_size must be at least 16");
        }
        let (lo, hi) = self.radius_range;
        if !(lo > 0.0 && hi >= lo) {
            return bad("radius_range must satisfy 0 < min <= max");
        }
        if !(0.0..0.35).contains(&self.harmonic_amplitude) {
            return bad("harmonic_amplitude must lie in [0, 0.35)");
        }
        if self.edge_sharpness < 0.0 || self.noise_sigma < 0.0 || self.click_jitter < 0.0 {
            return bad("edge_sharpness, noise_sigma and click_jitter must be non-negative");
        }
        if self.min_separation < 4.0 {
            return bad("min_separation must be at least 4");
        }
        Ok(())
    }

    /// Config for the `index`-th image of a dataset.
    pub fn for_image(&self, index: u64) -> Self {
        Self {
            seed: derive_seed(self.seed, index),
            ..*self
        }
    }
}

/// SplitMix64 step over `(seed, index)`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Boundary radius `r(φ) = R·(1 + Σ aⱼ cos(jφ + φⱼ))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarShape {
    pub center: Point2,
    pub radius: f64,
    /// `(amplitude, phase)` for harmonics `j = 1, 2, …`.
    pub harmonics: Vec<(f64, f64)>,
}

impl StarShape {
    pub fn radius_at(&self, phi: f64) -> f64 {
        let wobble: f64 = self
            .harmonics
            .iter()
            .enumerate()
            .map(|(j, &(a, ph))| a * ((j + 1) as f64 * phi + ph).cos())
            .sum();
        self.radius * (1.0 + wobble)
    }

    pub fn max_radius(&self) -> f64 {
        self.radius * (1.0 + self.harmonics.iter().map(|h| h.0).sum::<f64>())
    }

    /// Radial signed distance: negative inside.
    pub fn radial_offset(&self, p: Point2) -> f64 {
        let d = p - self.center;
        d.norm() - self.radius_at(d.y.atan2(d.x))
    }

    pub fn contains(&self, p: Point2) -> bool {
        self.radial_offset(p) <= 0.0
    }
}

#[derive(Debug, Clone)]
pub struct SynthImage {
    pub image: GrayImage,
    pub shapes: Vec<StarShape>,
    /// One mask per object, in object-id order.
    pub gt_masks: Vec<Mask>,
    pub annotation: AnnotationFile,
}

impl SynthImage {
    /// Object ids (1-based) as a label raster.
    pub fn gt_labels(&self) -> Raster<u32> {
        let (w, h) = self.image.dims();
        let mut labels = Raster::filled(w, h, 0u32);
        for (i, m) in self.gt_masks.iter().enumerate() {
            for (c, r) in m.pixels() {
                labels.set(c, r, i as u32 + 1);
            }
        }
        labels
    }

    pub fn gt_union(&self) -> Mask {
        let (w, h) = self.image.dims();
        let mut u = Mask::filled(w, h, false);
        for m in &self.gt_masks {
            u.union_with(m);
        }
        u
    }
}

pub fn generate(config: &SynthConfig, image_id: &str) -> Result<SynthImage, SynthError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let size = config.image_size;
    let margin = 4.0 + 2.0 * config.edge_sharpness;

    let mut shapes: Vec<StarShape> = Vec::with_capacity(config.n_objects);
    for object in 0..config.n_objects {
        let radius = rng.random_range(config.radius_range.0..=config.radius_range.1);
        let per = if config.harmonic_count == 0 {
            0.0
        } else {
            config.harmonic_amplitude / config.harmonic_count as f64
        };
        let harmonics: Vec<(f64, f64)> = (0..config.harmonic_count)
            .map(|_| (rng.random_range(0.0..=per), rng.random_range(0.0..TAU)))
            .collect();
        let mut shape = StarShape {
            center: Point2::default(),
            radius,
            harmonics,
        };
        let reach = shape.max_radius() + margin;
        if 2.0 * reach >= size as f64 {
            return Err(SynthError::PlacementFailed { object });
        }
        let mut placed = false;
        for _ in 0..PLACEMENT_RETRIES {
            let c = Point2::new(
                rng.random_range(reach..size as f64 - reach),
                rng.random_range(reach..size as f64 - reach),
            );
            if shapes
                .iter()
                .all(|s| s.center.dist(c) >= s.max_radius() + shape.max_radius() + config.min_separation)
            {
                shape.center = c;
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(SynthError::PlacementFailed { object });
        }
        shapes.push(shape);
    }

    let gt_masks: Vec<Mask> = shapes
        .iter()
        .map(|s| Mask::from_fn(size, size, |c, r| s.contains(pixel_center(c, r))))
        .collect();

    let noise = Normal::new(0.0, config.noise_sigma.max(f64::MIN_POSITIVE)).expect("valid sigma");
    let mut image = GrayImage::filled(size, size, 0.0);
    for row in 0..size {
        for col in 0..size {
            let p = pixel_center(col, row);
            let mut coverage: f64 = 0.0;
            for s in &shapes {
                if p.dist(s.center) > s.max_radius() + 10.0 * config.edge_sharpness + 2.0 {
                    continue;
                }
                let d = s.radial_offset(p);
                let v = if config.edge_sharpness > 0.0 {
                    1.0 / (1.0 + (d / config.edge_sharpness).exp())
                } else if d <= 0.0 {
                    1.0
                } else {
                    0.0
                };
                coverage = coverage.max(v);
            }
            let mut v = BACKGROUND_INTENSITY + (OBJECT_INTENSITY - BACKGROUND_INTENSITY) * coverage;
            if config.noise_sigma > 0.0 {
                v += noise.sample(&mut rng);
            }
            image.set(col, row, v.clamp(0.0, 1.0));
        }
    }

    let mut annotation = AnnotationFile::new(image_id, size as u32, size as u32);
    for (i, (shape, mask)) in shapes.iter().zip(&gt_masks).enumerate() {
        let clicks = simulate_clicks(shape, mask, &mut rng, config.click_jitter);
        let object = AnnotatedObject::from_clicks(i as u32 + 1, &clicks)
            .expect("clicks from a non-empty mask derive a box");
        annotation.objects.push(object);
    }

    Ok(SynthImage {
        image,
        shapes,
        gt_masks,
        annotation,
    })
}

/// Orientation clicks at center ± 2 px along a random direction; extreme
/// clicks at the mask's extreme pixel centers in that frame.
fn simulate_clicks(shape: &StarShape, mask: &Mask, rng: &mut ChaCha8Rng, jitter: f64) -> ClickSequence {
    let alpha = rng.random_range(-FRAC_PI_2..FRAC_PI_2);
    let dir = Point2::new(alpha.cos(), alpha.sin());
    let orientation_clicks = [shape.center - dir * 2.0, shape.center + dir * 2.0];
    let angle = orientation_angle(orientation_clicks[0], orientation_clicks[1]).expect("distinct clicks");
    let bbox = same_angle_bounding_box(mask, angle).expect("non-empty ground truth");
    let exact = ClickSequence {
        orientation_clicks,
        extreme_points: bbox.extreme_points,
    };
    if jitter <= 0.0 {
        return exact;
    }
    let mut shake = |p: Point2| Point2::new(p.x + rng.random_range(-jitter..=jitter), p.y + rng.random_range(-jitter..=jitter));
    for _ in 0..JITTER_RETRIES {
        let mut c = exact;
        c.orientation_clicks = c.orientation_clicks.map(&mut shake);
        let e = &mut c.extreme_points;
        e.top = shake(e.top);
        e.bottom = shake(e.bottom);
        e.left = shake(e.left);
        e.right = shake(e.right);
        if box_from_clicks(&c).is_ok() {
            return c;
        }
    }
    exact
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub generator: String,
    pub config: SynthConfig,
    pub images: Vec<SynthManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthManifestEntry {
    pub id: String,
    pub seed: u64,
}

pub fn image_name(index: usize) -> String {
    format!("synth_{index:04}")
}

/// Writes `images/`, `gt/`, `annotations/` and `manifest.json` under `out`.
pub fn write_dataset(out: &Path, config: &SynthConfig, n_images: usize) -> Result<SynthManifest, SynthError> {
    config.validate()?;
    for sub in ["images", "gt", "annotations"] {
        io::ensure_dir(&out.join(sub))?;
    }
    let generated: Vec<Result<(String, u64, SynthImage), SynthError>> = {
        use rayon::prelude::*;
        (0..n_images)
            .into_par_iter()
            .map(|i| {
                let id = image_name(i);
                let cfg = config.for_image(i as u64);
                generate(&cfg, &id).map(|img| (id, cfg.seed, img))
            })
            .collect()
    };
    let mut entries = Vec::with_capacity(n_images);
    for item in generated {
        let (id, seed, img) = item?;
        io::save_gray8(&img.image, &out.join("images").join(format!("{id}.png")))?;
        io::save_instance_labels(&img.gt_labels(), &out.join("gt").join(format!("{id}.png")))?;
        img.annotation
            .save(&out.join("annotations").join(format!("{id}.json")))
            .map_err(|e| SynthError::Write(e.to_string()))?;
        entries.push(SynthManifestEntry { id, seed });
    }
    let manifest = SynthManifest {
        generator: format!("tiltseg-synth {}", env!("CARGO_PKG_VERSION")),
        config: *config,
        images: entries,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    std::fs::write(out.join("manifest.json"), text).map_err(|e| SynthError::Write(e.to_string()))?;
    Ok(manifest)
}
