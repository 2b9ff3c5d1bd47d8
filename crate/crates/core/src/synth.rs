//! Planted synthetic benchmark for the gaze-assisted classification pipeline.
//!
//! Each image holds a dense grid of descriptors. A 3×3 block of grid
//! positions around a random object centre carries a noisy copy of its
//! class prototype. Every other position is random noise, except that
//! positions at least three grid steps from the object may hold clutter
//! copied from a random class prototype. Subjects fixate the object, so
//! windows around fixations see the discriminative block and noise, while
//! image-wide pooling also sees the clutter.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::descriptors::LocalDescriptor;
use crate::error::Result;
use crate::gaze::{
    BoundingBox, Condition, Dataset, Fixation, ImageAnnotation, ScanPath, ANIMAL_CLASSES,
};
use crate::pool::ClassificationImage;
use crate::scalar::{l2_norm, Scalar};

#[derive(Clone, Debug)]
pub struct PlantedConfig {
    pub classes: usize,
    pub images_per_class: usize,
    pub width: u32,
    pub height: u32,
    pub stride: u32,
    pub dimension: usize,
    pub subjects: usize,
    pub fixations_per_subject: usize,
    /// Fraction of far background positions holding a random class prototype.
    pub clutter_rate: f64,
    /// Std of Gaussian noise added to planted prototypes.
    pub noise: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            classes: 6,
            images_per_class: 60,
            width: 96,
            height: 96,
            stride: 8,
            dimension: 16,
            subjects: 2,
            fixations_per_subject: 4,
            clutter_rate: 0.2,
            noise: 0.15,
            seed: 7,
        }
    }
}

pub struct PlantedBenchmark<T = f64> {
    /// Preprocessed fixations already attached.
    pub images: Vec<ClassificationImage<T>>,
    /// Raw scan paths (including the initial centre fixation) and annotations.
    pub dataset: Dataset<T>,
}

fn class_name(i: usize) -> String {
    ANIMAL_CLASSES
        .get(i)
        .map_or_else(|| format!("class{i}"), |s| s.to_string())
}

// Box-Muller; rand_distr has no release compatible with rand 0.8 here.
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn gaussian_unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| normal(rng)).collect();
    let n = l2_norm(&v);
    v.into_iter().map(|x| x / n).collect()
}

fn noisy(rng: &mut ChaCha8Rng, base: &[f64], sd: f64) -> Vec<f64> {
    let v: Vec<f64> = base
        .iter()
        .map(|&b| b + sd * normal(rng))
        .collect();
    let n = l2_norm(&v);
    v.into_iter().map(|x| x / n).collect()
}

pub fn planted_benchmark<T: Scalar>(cfg: &PlantedConfig) -> Result<PlantedBenchmark<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let prototypes: Vec<Vec<f64>> = (0..cfg.classes)
        .map(|_| gaussian_unit(&mut rng, cfg.dimension))
        .collect();
    let half_patch = cfg.stride as f64;
    let cols = ((cfg.width as f64 - 2.0 * half_patch) / cfg.stride as f64) as usize + 1;
    let rows = ((cfg.height as f64 - 2.0 * half_patch) / cfg.stride as f64) as usize + 1;
    let center = |i: usize| half_patch + (i as f64) * cfg.stride as f64;
    let targets: BTreeSet<String> = (0..cfg.classes).map(class_name).collect();

    let mut images = Vec::new();
    let mut annotations = BTreeMap::new();
    let mut scanpaths = Vec::new();

    for class in 0..cfg.classes {
        for k in 0..cfg.images_per_class {
            let image_id = format!("{}_{k:03}", class_name(class));
            let (oc, orow) = (rng.gen_range(1..cols - 1), rng.gen_range(1..rows - 1));
            let (ox, oy) = (center(oc), center(orow));

            let mut descriptors = Vec::with_capacity(cols * rows);
            for r in 0..rows {
                for c in 0..cols {
                    let ring = c.abs_diff(oc).max(r.abs_diff(orow));
                    let v = if ring <= 1 {
                        noisy(&mut rng, &prototypes[class], cfg.noise)
                    } else if ring >= 3 && rng.gen_bool(cfg.clutter_rate) {
                        let other = rng.gen_range(0..cfg.classes);
                        noisy(&mut rng, &prototypes[other], cfg.noise)
                    } else {
                        gaussian_unit(&mut rng, cfg.dimension)
                    };
                    descriptors.push(LocalDescriptor {
                        center_x: T::lit(center(c)),
                        center_y: T::lit(center(r)),
                        vector: v.into_iter().map(T::lit).collect(),
                    });
                }
            }

            let span = cfg.stride as f64 * 1.5;
            annotations.insert(
                image_id.clone(),
                ImageAnnotation {
                    image_id: image_id.clone(),
                    width: cfg.width,
                    height: cfg.height,
                    objects: vec![BoundingBox {
                        class_label: class_name(class),
                        xmin: T::lit((ox - span).floor().max(0.0)),
                        ymin: T::lit((oy - span).floor().max(0.0)),
                        xmax: T::lit((ox + span).ceil().min(cfg.width as f64)),
                        ymax: T::lit((oy + span).ceil().min(cfg.height as f64)),
                    }],
                    target_classes: targets.clone(),
                },
            );

            let mut fixations: BTreeMap<Condition, Vec<Fixation<T>>> = BTreeMap::new();
            for condition in Condition::ALL {
                let base_duration = match condition {
                    Condition::FreeViewing => 0.30_f64,
                    Condition::VisualSearch => 0.24,
                };
                for s in 0..cfg.subjects {
                    let mut onset = 0.0_f64;
                    let mut raw = Vec::new();
                    for i in 0..=cfg.fixations_per_subject {
                        // the first fixation sits at the screen centre and is
                        // dropped by preprocessing
                        let (x, y) = if i == 0 {
                            (cfg.width as f64 / 2.0, cfg.height as f64 / 2.0)
                        } else {
                            (
                                (ox + rng.gen_range(-4.0..4.0)).clamp(0.0, cfg.width as f64 - 1.0),
                                (oy + rng.gen_range(-4.0..4.0)).clamp(0.0, cfg.height as f64 - 1.0),
                            )
                        };
                        let duration =
                            ((base_duration + rng.gen_range(-0.08..0.08)) * 1000.0).round() / 1000.0;
                        raw.push(Fixation {
                            x: T::lit((x * 10.0).round() / 10.0),
                            y: T::lit((y * 10.0).round() / 10.0),
                            onset: T::lit(onset),
                            duration: T::lit(duration),
                            index: i as u32,
                        });
                        onset = ((onset + duration + 0.03) * 1000.0).round() / 1000.0;
                    }
                    fixations
                        .entry(condition)
                        .or_default()
                        .extend(raw.iter().skip(1).copied());
                    scanpaths.push(ScanPath::new(
                        image_id.clone(),
                        format!("s{s}"),
                        condition,
                        raw,
                    ));
                }
            }

            images.push(ClassificationImage {
                image_id,
                label: class_name(class),
                width: cfg.width,
                height: cfg.height,
                descriptors,
                fixations,
            });
        }
    }

    Ok(PlantedBenchmark {
        images,
        dataset: Dataset::new(annotations, scanpaths)?,
    })
}
