use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{
    build_representation, build_union_representation, fixation_regions, pyramid_regions,
    train_svm, CodedDescriptor, Pooling, PooledVector, SvmConfig, TrainedModel,
};
use crate::descriptors::LocalDescriptor;
use crate::error::{Error, Result};
use crate::gaze::{Condition, Fixation};
use crate::scalar::{mean, sample_std, Scalar};
use crate::sparse::{learn_dictionary, Dictionary, Encoder, SparseCodingConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Strategy {
    #[serde(rename = "pyramid-max")]
    PyramidMax,
    #[serde(rename = "pyramid-avg")]
    PyramidAvg,
    #[serde(rename = "fix-max")]
    FixationMax,
    #[serde(rename = "fix-avg")]
    FixationAvg,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::PyramidMax,
        Strategy::PyramidAvg,
        Strategy::FixationMax,
        Strategy::FixationAvg,
    ];

    pub fn pooling(self) -> Pooling {
        match self {
            Strategy::PyramidMax | Strategy::FixationMax => Pooling::Max,
            Strategy::PyramidAvg | Strategy::FixationAvg => Pooling::Average,
        }
    }

    pub fn uses_fixations(self) -> bool {
        matches!(self, Strategy::FixationMax | Strategy::FixationAvg)
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::PyramidMax => "pyramid-max",
            Strategy::PyramidAvg => "pyramid-avg",
            Strategy::FixationMax => "fix-max",
            Strategy::FixationAvg => "fix-avg",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown strategy {s:?}"))
    }
}

/// A labelled image: its local descriptors and the preprocessed fixations
/// of every subject, per condition.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassificationImage<T = f64> {
    pub image_id: String,
    pub label: String,
    pub width: u32,
    pub height: u32,
    pub descriptors: Vec<LocalDescriptor<T>>,
    pub fixations: BTreeMap<Condition, Vec<Fixation<T>>>,
}

impl<T: Scalar> ClassificationImage<T> {
    /// Union of fixations over subjects for `condition`, or both conditions.
    pub fn fixations_for(&self, condition: Option<Condition>) -> Vec<Fixation<T>> {
        self.fixations
            .iter()
            .filter(|(c, _)| condition.map_or(true, |want| **c == want))
            .flat_map(|(_, f)| f.iter().copied())
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig<T = f64> {
    pub strategy: Strategy,
    /// Fixation source for fixation strategies; `None` takes both conditions.
    pub condition: Option<Condition>,
    pub repetitions: usize,
    pub seed: u64,
    pub train_fraction: f64,
    pub pyramid_levels: Vec<usize>,
    pub window_px: T,
    /// Multiplies `window_px`, e.g. to convert display to image pixels.
    pub window_scale: T,
    pub dictionary_size: usize,
    /// Cap on training descriptors sampled for dictionary learning.
    pub dictionary_samples: usize,
    pub coding: SparseCodingConfig<T>,
    pub svm: SvmConfig<T>,
    /// Pool a whole-image region for images without fixations instead of failing.
    pub fallback_pyramid: bool,
    /// Use this dictionary in every repetition instead of learning one.
    pub dictionary: Option<Dictionary<T>>,
}

impl<T: Scalar> Default for ExperimentConfig<T> {
    fn default() -> Self {
        ExperimentConfig {
            strategy: Strategy::PyramidMax,
            condition: None,
            repetitions: 5,
            seed: 0,
            train_fraction: 0.5,
            pyramid_levels: super::DEFAULT_PYRAMID_LEVELS.to_vec(),
            window_px: T::lit(super::DEFAULT_WINDOW_PX),
            window_scale: T::one(),
            dictionary_size: 256,
            dictionary_samples: 50_000,
            coding: SparseCodingConfig::default(),
            svm: SvmConfig::default(),
            fallback_pyramid: false,
            dictionary: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub strategy: Strategy,
    pub condition: Option<Condition>,
    pub repetitions: usize,
    /// Class → (mean, std) of the fraction of its test images classified correctly.
    pub per_class_accuracy: BTreeMap<String, (f64, f64)>,
    /// Unweighted mean of per-class accuracies, (mean, std) over repetitions.
    pub average_accuracy: (f64, f64),
    /// Fraction of all test images classified correctly, (mean, std).
    pub pooled_accuracy: (f64, f64),
    pub per_repetition_average: Vec<f64>,
}

/// Seeded stratified split: per class (sorted), a shuffled `train_fraction`
/// of the images (at least one each side) goes to training.
pub fn stratified_split<T: Scalar>(
    images: &[ClassificationImage<T>],
    train_fraction: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, img) in images.iter().enumerate() {
        by_class.entry(img.label.as_str()).or_default().push(i);
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (label, mut idx) in by_class {
        if idx.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "class {label} needs at least two images for a train/test split"
            )));
        }
        idx.shuffle(rng);
        let k = ((idx.len() as f64 * train_fraction).round() as usize).clamp(1, idx.len() - 1);
        train.extend_from_slice(&idx[..k]);
        test.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

fn check_coverage<T: Scalar>(
    images: &[ClassificationImage<T>],
    strategy: Strategy,
    condition: Option<Condition>,
    fallback_pyramid: bool,
) -> Result<()> {
    if !strategy.uses_fixations() || fallback_pyramid {
        return Ok(());
    }
    let missing: Vec<String> = images
        .iter()
        .filter(|img| img.fixations_for(condition).is_empty())
        .map(|img| img.image_id.clone())
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::Coverage(missing))
    }
}

/// Pooled representation of one image's codes under `strategy`.
pub fn represent<T: Scalar>(
    img: &ClassificationImage<T>,
    codes: &[CodedDescriptor<T>],
    l: usize,
    strategy: Strategy,
    condition: Option<Condition>,
    cfg: &ExperimentConfig<T>,
) -> Result<PooledVector<T>> {
    let (w, h) = (T::lit(img.width as f64), T::lit(img.height as f64));
    let pooling = strategy.pooling();
    if !strategy.uses_fixations() {
        let regions = pyramid_regions(w, h, &cfg.pyramid_levels);
        return Ok(build_representation(codes, l, &regions, pooling));
    }
    let fixations = img.fixations_for(condition);
    if fixations.is_empty() {
        if !cfg.fallback_pyramid {
            return Err(Error::Coverage(vec![img.image_id.clone()]));
        }
        let whole = pyramid_regions(w, h, &[1]);
        return Ok(build_representation(codes, l, &whole, pooling));
    }
    let windows = fixation_regions(&fixations, cfg.window_px * cfg.window_scale, w, h)?;
    Ok(build_union_representation(codes, l, &windows, pooling))
}

/// Sparse codes of every descriptor of `img`, anchored at descriptor centres.
pub fn encode_image<T: Scalar>(
    encoder: &Encoder<'_, T>,
    img: &ClassificationImage<T>,
) -> Result<Vec<CodedDescriptor<T>>> {
    img.descriptors
        .iter()
        .map(|d| {
            encoder.encode(&d.vector).map(|c| CodedDescriptor {
                x: d.center_x,
                y: d.center_y,
                code: c.vector,
            })
        })
        .collect()
}

/// The configured dictionary, or one learned from a seeded subsample of the
/// descriptors of `train`.
fn dictionary_for<T: Scalar>(
    images: &[ClassificationImage<T>],
    train: &[usize],
    cfg: &ExperimentConfig<T>,
    rng: &mut ChaCha8Rng,
    seed: u64,
) -> Result<Dictionary<T>> {
    if let Some(d) = &cfg.dictionary {
        return Ok(d.clone());
    }
    let pool: Vec<&[T]> = train
        .iter()
        .flat_map(|&i| images[i].descriptors.iter().map(|d| d.vector.as_slice()))
        .collect();
    let picked: Vec<&[T]> = if pool.len() > cfg.dictionary_samples {
        let mut idx = sample(rng, pool.len(), cfg.dictionary_samples).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| pool[i]).collect()
    } else {
        pool
    };
    let coding = SparseCodingConfig {
        seed,
        ..cfg.coding
    };
    Ok(learn_dictionary(&picked, cfg.dictionary_size, &coding)?.dictionary)
}

fn sorted_labels<T>(images: &[ClassificationImage<T>]) -> Vec<String> {
    images
        .iter()
        .map(|i| i.label.clone())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Trains on every image with `cfg.strategy`: returns the dictionary used
/// and the classifier.
pub fn fit<T: Scalar>(
    images: &[ClassificationImage<T>],
    cfg: &ExperimentConfig<T>,
) -> Result<(Dictionary<T>, TrainedModel<T>)> {
    if images.is_empty() {
        return Err(Error::EmptyInput("no images to classify"));
    }
    check_coverage(images, cfg.strategy, cfg.condition, cfg.fallback_pyramid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let all: Vec<usize> = (0..images.len()).collect();
    let dict = dictionary_for(images, &all, cfg, &mut rng, cfg.seed)?;
    let encoder = Encoder::new(&dict, &cfg.coding)?;
    let l = dict.codewords();
    let vectors: Vec<PooledVector<T>> = images
        .par_iter()
        .map(|img| represent(img, &encode_image(&encoder, img)?, l, cfg.strategy, cfg.condition, cfg))
        .collect::<Result<_>>()?;
    let samples: Vec<(&[T], &str)> = vectors
        .iter()
        .zip(images)
        .map(|(v, img)| (v.vector.as_slice(), img.label.as_str()))
        .collect();
    let svm_cfg = SvmConfig {
        seed: cfg.seed,
        ..cfg.svm
    };
    let model = train_svm(&samples, &svm_cfg)?;
    Ok((dict, model))
}

/// Repeats split → dictionary → coding → pooling → SVM → per-class accuracy
/// `repetitions` times for `cfg.strategy` and reports mean ± std.
pub fn run_experiment<T: Scalar>(
    images: &[ClassificationImage<T>],
    cfg: &ExperimentConfig<T>,
) -> Result<EvalReport> {
    let mut reports = run_experiments(images, &[(cfg.strategy, cfg.condition)], cfg)?;
    Ok(reports.remove(0))
}

/// Like [`run_experiment`] for several (strategy, fixation condition)
/// variants at once. Every variant sees the same splits, dictionaries and
/// codes, so a variant's report equals its stand-alone run.
pub fn run_experiments<T: Scalar>(
    images: &[ClassificationImage<T>],
    variants: &[(Strategy, Option<Condition>)],
    cfg: &ExperimentConfig<T>,
) -> Result<Vec<EvalReport>> {
    if cfg.repetitions == 0 {
        return Err(Error::InvalidParameter("repetitions must be positive".into()));
    }
    if images.is_empty() {
        return Err(Error::EmptyInput("no images to classify"));
    }
    if variants.is_empty() {
        return Err(Error::EmptyInput("no strategies to evaluate"));
    }
    for &(strategy, condition) in variants {
        check_coverage(images, strategy, condition, cfg.fallback_pyramid)?;
    }

    let classes = sorted_labels(images);
    struct Tally {
        per_class: BTreeMap<String, Vec<f64>>,
        averages: Vec<f64>,
        pooled: Vec<f64>,
    }
    let mut tallies: Vec<Tally> = variants
        .iter()
        .map(|_| Tally {
            per_class: classes.iter().map(|c| (c.clone(), Vec::new())).collect(),
            averages: Vec::new(),
            pooled: Vec::new(),
        })
        .collect();

    for rep in 0..cfg.repetitions {
        let rep_seed = cfg
            .seed
            .wrapping_add((rep as u64).wrapping_mul(0x2545_f491_4f6c_dd1d));
        let mut rng = ChaCha8Rng::seed_from_u64(rep_seed);
        let (train, test) = stratified_split(images, cfg.train_fraction, &mut rng)?;
        let dict = dictionary_for(images, &train, cfg, &mut rng, rep_seed)?;
        let encoder = Encoder::new(&dict, &cfg.coding)?;
        let l = dict.codewords();
        let codes: Vec<Vec<CodedDescriptor<T>>> = images
            .par_iter()
            .map(|img| encode_image(&encoder, img))
            .collect::<Result<_>>()?;

        for (&(strategy, condition), tally) in variants.iter().zip(&mut tallies) {
            let vectors: Vec<PooledVector<T>> = images
                .par_iter()
                .zip(&codes)
                .map(|(img, c)| represent(img, c, l, strategy, condition, cfg))
                .collect::<Result<_>>()?;
            let svm_cfg = SvmConfig {
                seed: rep_seed,
                ..cfg.svm
            };
            let samples: Vec<(&[T], &str)> = train
                .iter()
                .map(|&i| (vectors[i].vector.as_slice(), images[i].label.as_str()))
                .collect();
            let model = train_svm(&samples, &svm_cfg)?;

            let mut hits: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
            for &i in &test {
                let entry = hits.entry(images[i].label.as_str()).or_default();
                entry.1 += 1;
                if model.predict(&vectors[i].vector)? == images[i].label {
                    entry.0 += 1;
                }
            }
            let mut rep_acc = Vec::new();
            for (class, (ok, total)) in &hits {
                let acc = *ok as f64 / *total as f64;
                tally.per_class.get_mut(*class).unwrap().push(acc);
                rep_acc.push(acc);
            }
            tally.averages.push(mean(&rep_acc));
            let (ok, total) = hits
                .values()
                .fold((0, 0), |(a, b), (ok, t)| (a + ok, b + t));
            tally.pooled.push(ok as f64 / total as f64);
        }
    }

    let summary = |v: &[f64]| (mean(v), sample_std(v));
    Ok(variants
        .iter()
        .zip(tallies)
        .map(|(&(strategy, condition), t)| EvalReport {
            strategy,
            condition: if strategy.uses_fixations() { condition } else { None },
            repetitions: cfg.repetitions,
            per_class_accuracy: t
                .per_class
                .iter()
                .map(|(c, v)| (c.clone(), summary(v)))
                .collect(),
            average_accuracy: summary(&t.averages),
            pooled_accuracy: summary(&t.pooled),
            per_repetition_average: t.averages,
        })
        .collect())
}

/// One row per report: strategy, condition, per-class `mean±std`, then avg.
pub fn write_table_csv<W: Write>(reports: &[EvalReport], mut out: W) -> Result<()> {
    let io = |e| Error::io("<report>", e);
    let classes: Vec<&String> = reports
        .iter()
        .flat_map(|r| r.per_class_accuracy.keys())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut header = vec!["strategy".to_string(), "condition".to_string()];
    header.extend(classes.iter().map(|c| c.to_string()));
    header.push("avg".into());
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    let cell = |(m, s): (f64, f64)| format!("{m:.3}±{s:.3}");
    for r in reports {
        let mut row = vec![
            r.strategy.to_string(),
            r.condition.map_or("none".to_string(), |c| c.to_string()),
        ];
        for c in &classes {
            row.push(r.per_class_accuracy.get(*c).map_or(String::new(), |&v| cell(v)));
        }
        row.push(cell(r.average_accuracy));
        writeln!(out, "{}", row.join(",")).map_err(io)?;
    }
    Ok(())
}
