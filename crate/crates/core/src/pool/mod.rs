//! Pooling of sparse codes over image regions, linear one-vs-rest SVMs, and
//! the repeated train/test evaluation harness.
//!
//! Regions are either spatial-pyramid cells (half-open, `[min, max)`) or
//! square windows around fixations (closed, `[min, max]`, clipped to the
//! pixel-centre range of the image).

mod experiment;
mod svm;

pub use experiment::{
    encode_image, fit, represent, run_experiment, run_experiments, stratified_split,
    write_table_csv, ClassificationImage, EvalReport, ExperimentConfig, Strategy,
};
pub use svm::{train_svm, SvmConfig, TrainedModel};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaze::Fixation;
use crate::scalar::{l2_norm, Scalar};

pub const DEFAULT_PYRAMID_LEVELS: [usize; 3] = [1, 2, 4];
pub const DEFAULT_WINDOW_PX: f64 = 30.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionOrigin {
    PyramidCell,
    FixationWindow,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoolingRegion<T = f64> {
    pub xmin: T,
    pub ymin: T,
    pub xmax: T,
    pub ymax: T,
    pub origin: RegionOrigin,
}

impl<T: Scalar> PoolingRegion<T> {
    pub fn contains(&self, x: T, y: T) -> bool {
        match self.origin {
            RegionOrigin::PyramidCell => {
                x >= self.xmin && x < self.xmax && y >= self.ymin && y < self.ymax
            }
            RegionOrigin::FixationWindow => {
                x >= self.xmin && x <= self.xmax && y >= self.ymin && y <= self.ymax
            }
        }
    }

    pub fn width(&self) -> T {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> T {
        self.ymax - self.ymin
    }

    /// Integer pixel centres covered along x and y.
    pub fn pixel_extent(&self) -> (usize, usize) {
        let count = |lo: T, hi: T| {
            let (lo, hi) = (lo.ceil(), hi.floor());
            if hi < lo {
                0
            } else {
                (hi - lo).to_usize().unwrap_or(0) + 1
            }
        };
        match self.origin {
            RegionOrigin::FixationWindow => (count(self.xmin, self.xmax), count(self.ymin, self.ymax)),
            RegionOrigin::PyramidCell => (
                count(self.xmin, self.xmax - T::epsilon()),
                count(self.ymin, self.ymax - T::epsilon()),
            ),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pooling {
    Max,
    Average,
}

/// A sparse code anchored at its descriptor centre.
#[derive(Clone, Debug, PartialEq)]
pub struct CodedDescriptor<T = f64> {
    pub x: T,
    pub y: T,
    pub code: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PooledVector<T = f64> {
    pub vector: Vec<T>,
    pub region_count: usize,
}

/// k×k uniform grids for each level k.
pub fn pyramid_regions<T: Scalar>(width: T, height: T, levels: &[usize]) -> Vec<PoolingRegion<T>> {
    let mut out = Vec::new();
    for &k in levels {
        let kt = T::from_count(k);
        for row in 0..k {
            for col in 0..k {
                let edge = |i: usize, len: T| T::from_count(i) * len / kt;
                out.push(PoolingRegion {
                    xmin: edge(col, width),
                    xmax: edge(col + 1, width),
                    ymin: edge(row, height),
                    ymax: edge(row + 1, height),
                    origin: RegionOrigin::PyramidCell,
                });
            }
        }
    }
    out
}

/// A `window`-sided square centred on each fixation, clipped to the pixel
/// centres [0, width−1] × [0, height−1].
pub fn fixation_regions<T: Scalar>(
    fixations: &[Fixation<T>],
    window: T,
    width: T,
    height: T,
) -> Result<Vec<PoolingRegion<T>>> {
    if !(window > T::zero()) {
        return Err(Error::InvalidParameter(format!("window {window} must be positive")));
    }
    if fixations.is_empty() {
        return Err(Error::EmptyInput("no fixations to place pooling windows on"));
    }
    let half = window / T::lit(2.0);
    let (xmax, ymax) = (width - T::one(), height - T::one());
    Ok(fixations
        .iter()
        .map(|f| PoolingRegion {
            xmin: (f.x - half).max(T::zero()),
            xmax: (f.x + half).min(xmax),
            ymin: (f.y - half).max(T::zero()),
            ymax: (f.y + half).min(ymax),
            origin: RegionOrigin::FixationWindow,
        })
        .collect())
}

fn accumulate<'a, T: Scalar>(
    codes: impl Iterator<Item = &'a CodedDescriptor<T>>,
    l: usize,
    strategy: Pooling,
) -> Vec<T> {
    let mut acc = vec![T::zero(); l];
    let mut m = 0usize;
    for c in codes {
        m += 1;
        for (a, &v) in acc.iter_mut().zip(&c.code) {
            match strategy {
                Pooling::Max => *a = a.max(v.abs()),
                Pooling::Average => *a += v,
            }
        }
    }
    if strategy == Pooling::Average && m > 0 {
        let mt = T::from_count(m);
        acc.iter_mut().for_each(|a| *a /= mt);
    }
    acc
}

/// Pools the codes whose centres fall in `region`: element-wise max of
/// absolute values, or the mean. No codes gives the zero vector.
pub fn pool<T: Scalar>(
    codes: &[CodedDescriptor<T>],
    l: usize,
    region: &PoolingRegion<T>,
    strategy: Pooling,
) -> Vec<T> {
    accumulate(
        codes.iter().filter(|c| region.contains(c.x, c.y)),
        l,
        strategy,
    )
}

fn normalized<T: Scalar>(mut v: Vec<T>) -> Vec<T> {
    let n = l2_norm(&v);
    if n > T::zero() {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

/// Concatenates `pool` over `regions` in order and L2-normalizes the result.
pub fn build_representation<T: Scalar>(
    codes: &[CodedDescriptor<T>],
    l: usize,
    regions: &[PoolingRegion<T>],
    strategy: Pooling,
) -> PooledVector<T> {
    let vector = regions
        .iter()
        .flat_map(|r| pool(codes, l, r, strategy))
        .collect();
    PooledVector {
        vector: normalized(vector),
        region_count: regions.len(),
    }
}

/// Pools every code lying in at least one window as a single region, then
/// L2-normalizes. Gives an `l`-dimensional vector whatever the fixation count.
pub fn build_union_representation<T: Scalar>(
    codes: &[CodedDescriptor<T>],
    l: usize,
    windows: &[PoolingRegion<T>],
    strategy: Pooling,
) -> PooledVector<T> {
    let vector = accumulate(
        codes
            .iter()
            .filter(|c| windows.iter().any(|w| w.contains(c.x, c.y))),
        l,
        strategy,
    );
    PooledVector {
        vector: normalized(vector),
        region_count: 1,
    }
}
