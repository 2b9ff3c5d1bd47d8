//! Recurrence quantification of a single scan path.
//!
//! Two fixations recur when they lie within `radius` pixels of each other.
//! Counts use the upper triangle of the recurrence matrix; the main diagonal
//! never counts. With R recurrent pairs among n fixations:
//!
//! * recurrence  = 100 · 2R / (n(n−1))
//! * determinism = 100 · (recurrent points on diagonal lines ≥ L) / R
//! * laminarity  = 100 · (points on horizontal lines ≥ L + points on vertical lines ≥ L) / 2R
//! * CROM        = 100 · Σ_{i<j} (j−i)·r_ij / ((n−1)·R)
//!
//! Lines are maximal runs of recurrent cells. All measures are 0 when R = 0.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaze::ScanPath;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RqaConfig<T = f64> {
    /// Recurrence distance threshold in pixels.
    pub radius: T,
    /// Minimum line length.
    pub min_line_length: usize,
}

impl<T: Scalar> RqaConfig<T> {
    pub fn new(radius: T, min_line_length: usize) -> Result<Self> {
        let cfg = RqaConfig {
            radius,
            min_line_length,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > T::zero()) || self.min_line_length < 2 {
            return Err(Error::InvalidParameter(format!(
                "rqa radius must be > 0 and min line length >= 2, got {} and {}",
                self.radius, self.min_line_length
            )));
        }
        Ok(())
    }
}

/// Symmetric n×n recurrence matrix with a false main diagonal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecurrenceMatrix {
    n: usize,
    cells: Vec<bool>,
}

impl RecurrenceMatrix {
    /// Builds a matrix from explicit upper-triangle pairs (i < j).
    pub fn from_pairs(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut m = RecurrenceMatrix {
            n,
            cells: vec![false; n * n],
        };
        for (i, j) in pairs {
            if i != j {
                m.cells[i * n + j] = true;
                m.cells[j * n + i] = true;
            }
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.cells[i * self.n + j]
    }

    /// Recurrent pairs above the diagonal.
    pub fn recurrent_pairs(&self) -> usize {
        (0..self.n)
            .flat_map(|i| (i + 1..self.n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.get(i, j))
            .count()
    }
}

pub fn recurrence_matrix<T: Scalar>(sp: &ScanPath<T>, cfg: &RqaConfig<T>) -> Result<RecurrenceMatrix> {
    cfg.validate()?;
    let n = sp.fixations.len();
    if n < 2 {
        return Err(Error::TooShort {
            id: sp.label(),
            len: n,
            need: 2,
        });
    }
    let f = &sp.fixations;
    let pairs = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|&(i, j)| (f[i].x - f[j].x).hypot(f[i].y - f[j].y) <= cfg.radius);
    Ok(RecurrenceMatrix::from_pairs(n, pairs))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RqaMeasures<T = f64> {
    pub recurrence: T,
    pub determinism: T,
    pub laminarity: T,
    pub crom: T,
}

/// Adds the lengths of runs of `true` that are at least `min_len` long.
fn long_run_cells(cells: impl Iterator<Item = bool>, min_len: usize) -> usize {
    let mut total = 0;
    let mut run = 0;
    for c in cells {
        if c {
            run += 1;
        } else {
            if run >= min_len {
                total += run;
            }
            run = 0;
        }
    }
    if run >= min_len {
        total += run;
    }
    total
}

pub fn rqa_measures<T: Scalar>(m: &RecurrenceMatrix, cfg: &RqaConfig<T>) -> RqaMeasures<T> {
    let n = m.n;
    let l = cfg.min_line_length;
    let r = m.recurrent_pairs();
    if r == 0 || n < 2 {
        return RqaMeasures {
            recurrence: T::zero(),
            determinism: T::zero(),
            laminarity: T::zero(),
            crom: T::zero(),
        };
    }

    let diagonal: usize = (1..n)
        .map(|k| long_run_cells((0..n - k).map(|i| m.get(i, i + k)), l))
        .sum();
    let horizontal: usize = (0..n)
        .map(|i| long_run_cells((i + 1..n).map(|j| m.get(i, j)), l))
        .sum();
    let vertical: usize = (0..n)
        .map(|j| long_run_cells((0..j).map(|i| m.get(i, j)), l))
        .sum();
    let lag_sum: usize = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|&(i, j)| m.get(i, j))
        .map(|(i, j)| j - i)
        .sum();

    let hundred = T::lit(100.0);
    let rf = T::from_count(r);
    RqaMeasures {
        recurrence: hundred * T::from_count(2 * r) / T::from_count(n * (n - 1)),
        determinism: hundred * T::from_count(diagonal) / rf,
        laminarity: hundred * T::from_count(horizontal + vertical) / (T::lit(2.0) * rf),
        crom: hundred * T::from_count(lag_sum) / (T::from_count(n - 1) * rf),
    }
}

/// Convenience: matrix and measures for one path.
pub fn analyze<T: Scalar>(sp: &ScanPath<T>, cfg: &RqaConfig<T>) -> Result<RqaMeasures<T>> {
    Ok(rqa_measures(&recurrence_matrix(sp, cfg)?, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaze::{Condition, Fixation};

    fn path(points: &[(f64, f64)]) -> ScanPath<f64> {
        let fixations = points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| Fixation::new(x, y, i as f64 * 0.3, 0.25))
            .collect();
        ScanPath::new("img", "s", Condition::VisualSearch, fixations)
    }

    fn cfg() -> RqaConfig<f64> {
        RqaConfig::new(10.0, 2).unwrap()
    }

    #[test]
    fn identical_fixations_fill_matrix() {
        let m = recurrence_matrix(&path(&[(5., 5.); 4]), &cfg()).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(m.get(i, j), i != j);
            }
        }
    }

    #[test]
    fn far_fixations_give_empty_matrix_and_zero_measures() {
        let sp = path(&[(0., 0.), (100., 0.), (0., 100.), (100., 100.)]);
        let m = recurrence_matrix(&sp, &cfg()).unwrap();
        assert_eq!(m.recurrent_pairs(), 0);
        let r = rqa_measures(&m, &cfg());
        assert_eq!([r.recurrence, r.determinism, r.laminarity, r.crom], [0.0; 4]);
    }

    #[test]
    fn one_close_pair_is_symmetric() {
        let sp = path(&[(0., 0.), (100., 0.), (3., 4.)]);
        let m = recurrence_matrix(&sp, &cfg()).unwrap();
        let trues: Vec<_> = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .filter(|&(i, j)| m.get(i, j))
            .collect();
        assert_eq!(trues, vec![(0, 2), (2, 0)]);
    }

    #[test]
    fn sweep_revisit_is_fully_deterministic() {
        // A B C A B C: recurrences (0,3),(1,4),(2,5) form one diagonal line.
        let sp = path(&[(0., 0.), (100., 0.), (200., 0.), (0., 0.), (100., 0.), (200., 0.)]);
        let r = analyze(&sp, &cfg()).unwrap();
        assert_eq!(r.determinism, 100.0);
        assert_eq!(r.laminarity, 0.0);
        assert!((r.recurrence - 20.0).abs() < 1e-12);
        assert!((r.crom - 60.0).abs() < 1e-12);
    }

    #[test]
    fn identical_fixations_hand_values() {
        // n = 4: six recurrent pairs. Diagonal offsets 1,2,3 have runs of
        // 3,2,1, so five cells sit on lines >= 2. Rows and columns likewise.
        let r = analyze(&path(&[(5., 5.); 4]), &cfg()).unwrap();
        assert_eq!(r.recurrence, 100.0);
        assert!((r.determinism - 500.0 / 6.0).abs() < 1e-12);
        assert!((r.laminarity - 1000.0 / 12.0).abs() < 1e-12);
        // lags: 1·3 + 2·2 + 3·1 = 10 over (n−1)·R = 18
        assert!((r.crom - 1000.0 / 18.0).abs() < 1e-12);
    }

    #[test]
    fn too_short_and_bad_config() {
        assert!(matches!(
            recurrence_matrix(&path(&[(0., 0.)]), &cfg()),
            Err(Error::TooShort { len: 1, .. })
        ));
        assert!(RqaConfig::new(0.0, 2).is_err());
        assert!(RqaConfig::new(1.0, 1).is_err());
    }
}
