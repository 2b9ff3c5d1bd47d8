//! Eye-movement analytics over free-viewing and visual-search recordings,
//! plus gaze-assisted sparse-coding image classification.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! `*F64` / `*F32` aliases below pin the common types.

pub mod descriptors;
pub mod error;
pub mod gaze;
pub mod geometry;
pub mod multimatch;
pub mod pool;
pub mod rqa;
pub mod scalar;
pub mod sparse;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use gaze::{
    BoundingBox, Condition, Dataset, Fixation, ImageAnnotation, ScanPath, ANIMAL_CLASSES,
};
pub use geometry::{density_map, DensityMap, ViewingGeometry};
pub use multimatch::{compare, MultiMatchConfig, MultiMatchScore};
pub use rqa::{analyze, RqaConfig, RqaMeasures};
pub use scalar::Scalar;
pub use sparse::{encode, learn_dictionary, Dictionary, Encoder, SparseCodingConfig};
pub use stats::{welch_t_test, ScanPathStats, TTestResult};

pub type FixationF64 = Fixation<f64>;
pub type FixationF32 = Fixation<f32>;
pub type ScanPathF64 = ScanPath<f64>;
pub type ScanPathF32 = ScanPath<f32>;
pub type DatasetF64 = Dataset<f64>;
pub type DatasetF32 = Dataset<f32>;
pub type DensityMapF64 = DensityMap<f64>;
pub type DensityMapF32 = DensityMap<f32>;
pub type DictionaryF64 = Dictionary<f64>;
pub type DictionaryF32 = Dictionary<f32>;
pub type MultiMatchScoreF64 = MultiMatchScore<f64>;
pub type MultiMatchScoreF32 = MultiMatchScore<f32>;
pub type RqaMeasuresF64 = RqaMeasures<f64>;
pub type RqaMeasuresF32 = RqaMeasures<f32>;
pub type TrainedModelF64 = pool::TrainedModel<f64>;
pub type TrainedModelF32 = pool::TrainedModel<f32>;
