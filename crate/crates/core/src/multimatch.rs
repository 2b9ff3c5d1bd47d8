//! Vector-based scan-path similarity along five dimensions: saccade shape,
//! length and direction, aligned fixation position, and fixation duration.
//!
//! Paths become saccade vectors, are optionally simplified, aligned by a
//! least-cost monotone path over the pairwise vector-difference matrix, and
//! scored per dimension on the aligned pairs.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaze::ScanPath;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SaccadeVector<T = f64> {
    pub start_x: T,
    pub start_y: T,
    pub dx: T,
    pub dy: T,
    /// Duration of the fixation the saccade leaves from.
    pub duration: T,
}

impl<T: Scalar> SaccadeVector<T> {
    pub fn amplitude(&self) -> T {
        self.dx.hypot(self.dy)
    }

    pub fn angle(&self) -> T {
        self.dy.atan2(self.dx)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MultiMatchScore<T = f64> {
    pub shape: T,
    pub length: T,
    pub direction: T,
    pub position: T,
    pub duration: T,
}

impl<T: Scalar> MultiMatchScore<T> {
    pub fn as_array(&self) -> [T; 5] {
        [self.shape, self.length, self.direction, self.position, self.duration]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MultiMatchConfig<T = f64> {
    pub amplitude_threshold: T,
    /// Degrees.
    pub direction_threshold: T,
    pub screen_diagonal: T,
    pub simplification_enabled: bool,
}

impl<T: Scalar> MultiMatchConfig<T> {
    /// Amplitude threshold 10% of the diagonal, direction threshold 45°,
    /// simplification on.
    pub fn for_screen(width: T, height: T) -> Self {
        let diagonal = width.hypot(height);
        MultiMatchConfig {
            amplitude_threshold: diagonal * T::lit(0.1),
            direction_threshold: T::lit(45.0),
            screen_diagonal: diagonal,
            simplification_enabled: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.amplitude_threshold >= T::zero()
            && self.direction_threshold >= T::zero()
            && self.screen_diagonal > T::zero()
        {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "multimatch thresholds must be >= 0 and diagonal > 0: {self:?}"
            )))
        }
    }
}

pub fn to_vectors<T: Scalar>(sp: &ScanPath<T>) -> Result<Vec<SaccadeVector<T>>> {
    if sp.fixations.len() < 2 {
        return Err(Error::TooShort {
            id: sp.label(),
            len: sp.fixations.len(),
            need: 2,
        });
    }
    Ok(sp
        .fixations
        .windows(2)
        .map(|w| SaccadeVector {
            start_x: w[0].x,
            start_y: w[0].y,
            dx: w[1].x - w[0].x,
            dy: w[1].y - w[0].y,
            duration: w[0].duration,
        })
        .collect())
}

/// Absolute angle between two vectors, in [0, π].
fn angular_difference<T: Scalar>(a: T, b: T) -> T {
    let pi = T::lit(std::f64::consts::PI);
    let mut d = (a - b).abs();
    if d > pi {
        d = T::lit(2.0) * pi - d;
    }
    d.max(T::zero()).min(pi)
}

/// Repeatedly merges the leftmost adjacent pair that is either short
/// (combined amplitude below the amplitude threshold) or nearly collinear
/// (angle below the direction threshold), until no pair qualifies.
pub fn simplify<T: Scalar>(
    vectors: &[SaccadeVector<T>],
    cfg: &MultiMatchConfig<T>,
) -> Vec<SaccadeVector<T>> {
    let mut vs = vectors.to_vec();
    let dir_threshold = cfg.direction_threshold.to_radians();
    loop {
        let pair = (0..vs.len().saturating_sub(1)).find(|&i| {
            let (u, v) = (&vs[i], &vs[i + 1]);
            let combined = (u.dx + v.dx).hypot(u.dy + v.dy);
            combined < cfg.amplitude_threshold
                || angular_difference(u.angle(), v.angle()) < dir_threshold
        });
        let Some(i) = pair else { break };
        let next = vs.remove(i + 1);
        let u = &mut vs[i];
        u.dx += next.dx;
        u.dy += next.dy;
        u.duration += next.duration;
    }
    vs
}

fn difference<T: Scalar>(u: &SaccadeVector<T>, v: &SaccadeVector<T>) -> T {
    (u.dx - v.dx).hypot(u.dy - v.dy)
}

/// Least-cost monotone alignment from (0,0) to (|a|−1,|b|−1), where each
/// visited cell (i,j) costs |a_i − b_j|. Ties prefer the diagonal step.
pub fn align<T: Scalar>(a: &[SaccadeVector<T>], b: &[SaccadeVector<T>]) -> Vec<(usize, usize)> {
    assert!(!a.is_empty() && !b.is_empty(), "align needs non-empty inputs");
    let (n, m) = (a.len(), b.len());
    let mut acc = vec![T::zero(); n * m];
    let at = |i: usize, j: usize| i * m + j;

    for i in 0..n {
        for j in 0..m {
            let cost = difference(&a[i], &b[j]);
            let prev = match (i, j) {
                (0, 0) => T::zero(),
                (0, _) => acc[at(0, j - 1)],
                (_, 0) => acc[at(i - 1, 0)],
                _ => acc[at(i - 1, j - 1)]
                    .min(acc[at(i - 1, j)])
                    .min(acc[at(i, j - 1)]),
            };
            acc[at(i, j)] = prev + cost;
        }
    }

    let mut path = vec![(n - 1, m - 1)];
    let (mut i, mut j) = (n - 1, m - 1);
    while (i, j) != (0, 0) {
        (i, j) = match (i, j) {
            (0, _) => (0, j - 1),
            (_, 0) => (i - 1, 0),
            _ => {
                let diag = acc[at(i - 1, j - 1)];
                let up = acc[at(i - 1, j)];
                let left = acc[at(i, j - 1)];
                if diag <= up && diag <= left {
                    (i - 1, j - 1)
                } else if up < left {
                    (i - 1, j)
                } else if left < up {
                    (i, j - 1)
                } else {
                    // exact tie between the two axis moves; pick by the
                    // smaller cell cost so that align(b, a) mirrors align(a, b)
                    let cu = difference(&a[i - 1], &b[j]);
                    let cl = difference(&a[i], &b[j - 1]);
                    if cu <= cl {
                        (i - 1, j)
                    } else {
                        (i, j - 1)
                    }
                }
            }
        };
        path.push((i, j));
    }
    path.reverse();
    path
}

/// Five-dimension similarity of two paths, each score in [0, 1].
pub fn compare<T: Scalar>(
    a: &ScanPath<T>,
    b: &ScanPath<T>,
    cfg: &MultiMatchConfig<T>,
) -> Result<MultiMatchScore<T>> {
    cfg.validate()?;
    let mut va = to_vectors(a)?;
    let mut vb = to_vectors(b)?;
    if cfg.simplification_enabled {
        va = simplify(&va, cfg);
        vb = simplify(&vb, cfg);
    }
    Ok(score_aligned(&va, &vb, &align(&va, &vb), cfg.screen_diagonal))
}

fn score_aligned<T: Scalar>(
    a: &[SaccadeVector<T>],
    b: &[SaccadeVector<T>],
    pairs: &[(usize, usize)],
    diagonal: T,
) -> MultiMatchScore<T> {
    let pi = T::lit(std::f64::consts::PI);
    let two = T::lit(2.0);
    let mut acc = [T::zero(); 5];
    for &(i, j) in pairs {
        let (u, v) = (&a[i], &b[j]);
        acc[0] += difference(u, v) / (two * diagonal);
        acc[1] += (u.amplitude() - v.amplitude()).abs() / diagonal;
        acc[2] += angular_difference(u.angle(), v.angle()) / pi;
        acc[3] += (u.start_x - v.start_x).hypot(u.start_y - v.start_y) / diagonal;
        let longest = u.duration.max(v.duration);
        if longest > T::zero() {
            acc[4] += (u.duration - v.duration).abs() / longest;
        }
    }
    let n = T::from_count(pairs.len());
    let sim = |x: T| (T::one() - x / n).max(T::zero()).min(T::one());
    MultiMatchScore {
        shape: sim(acc[0]),
        length: sim(acc[1]),
        direction: sim(acc[2]),
        position: sim(acc[3]),
        duration: sim(acc[4]),
    }
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
        ScanPath::new("img", "s", Condition::FreeViewing, fixations)
    }

    fn vec_(dx: f64, dy: f64) -> SaccadeVector<f64> {
        SaccadeVector {
            start_x: 0.0,
            start_y: 0.0,
            dx,
            dy,
            duration: 0.2,
        }
    }

    fn no_simplify(diagonal: f64) -> MultiMatchConfig<f64> {
        MultiMatchConfig {
            amplitude_threshold: 0.0,
            direction_threshold: 0.0,
            screen_diagonal: diagonal,
            simplification_enabled: false,
        }
    }

    #[test]
    fn vectors_from_fixations() {
        let vs = to_vectors(&path(&[(0., 0.), (3., 4.)])).unwrap();
        assert_eq!(vs.len(), 1);
        assert_eq!((vs[0].dx, vs[0].dy), (3.0, 4.0));
        assert_eq!(vs[0].amplitude(), 5.0);

        let vs = to_vectors(&path(&[(0., 0.), (2., 1.), (4., 2.), (6., 3.)])).unwrap();
        assert!(vs.windows(2).all(|w| (w[0].dx, w[0].dy) == (w[1].dx, w[1].dy)));
        assert!(matches!(
            to_vectors(&path(&[(0., 0.)])),
            Err(Error::TooShort { len: 1, .. })
        ));
    }

    #[test]
    fn zero_thresholds_keep_input() {
        let vs = to_vectors(&path(&[(0., 0.), (10., 0.), (20., 0.), (20., 30.)])).unwrap();
        let cfg = MultiMatchConfig {
            simplification_enabled: true,
            ..no_simplify(100.0)
        };
        assert_eq!(simplify(&vs, &cfg), vs);
        assert_eq!(simplify(&vs[..1], &MultiMatchConfig::for_screen(100.0, 100.0)), vs[..1]);
    }

    #[test]
    fn short_pair_is_merged() {
        // threshold 10: vectors (2,1) and (-1,3) each shorter than 5, sum (1,4)
        // of length 4.12 < 10, so they merge into one vector with summed duration.
        let vs = vec![vec_(2.0, 1.0), vec_(-1.0, 3.0)];
        let cfg = MultiMatchConfig {
            amplitude_threshold: 10.0,
            direction_threshold: 0.0,
            screen_diagonal: 100.0,
            simplification_enabled: true,
        };
        let out = simplify(&vs, &cfg);
        assert_eq!(out.len(), 1);
        assert_eq!((out[0].dx, out[0].dy), (1.0, 4.0));
        assert!((out[0].duration - 0.4).abs() < 1e-15);
    }

    #[test]
    fn collinear_pair_is_merged_by_direction() {
        let vs = vec![vec_(50.0, 0.0), vec_(60.0, 5.0), vec_(0.0, 80.0)];
        let cfg = MultiMatchConfig {
            amplitude_threshold: 0.0,
            direction_threshold: 45.0,
            screen_diagonal: 1000.0,
            simplification_enabled: true,
        };
        let out = simplify(&vs, &cfg);
        assert_eq!(out.len(), 2);
        assert_eq!((out[0].dx, out[0].dy), (110.0, 5.0));
    }

    #[test]
    fn align_identical_is_diagonal() {
        let vs = vec![vec_(1.0, 0.0), vec_(0.0, 5.0), vec_(-3.0, 2.0)];
        assert_eq!(align(&vs, &vs), vec![(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn align_single_against_three() {
        let a = vec![vec_(1.0, 0.0)];
        let b = vec![vec_(1.0, 0.0), vec_(4.0, 0.0), vec_(9.0, 0.0)];
        assert_eq!(align(&a, &b), vec![(0, 0), (0, 1), (0, 2)]);
        assert_eq!(align(&b, &a), vec![(0, 0), (1, 0), (2, 0)]);
    }

    #[test]
    fn align_two_by_two_matches_enumeration() {
        // Monotone paths on a 2x2 lattice: diag, right-down, down-right.
        let a = vec![vec_(0.0, 0.0), vec_(10.0, 0.0)];
        let b = vec![vec_(10.0, 0.0), vec_(10.0, 1.0)];
        // costs: c00=0, c01=10.05, c10=0, c11=1
        // diag: 0+1=1; via (0,1): 0+10.05+1; via (1,0): 0+0+1=1 -> tie with diag,
        // diagonal preferred.
        assert_eq!(align(&a, &b), vec![(0, 0), (1, 1)]);
        let b = vec![vec_(0.0, 0.0), vec_(0.0, 0.0)];
        let a = vec![vec_(0.0, 0.0), vec_(0.0, 20.0)];
        // c00=0 c01=0 c10=20 c11=20; every path costs 20 except via (1,0): 40.
        assert_eq!(align(&a, &b), vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn self_similarity_is_one() {
        let p = path(&[(10., 10.), (200., 40.), (150., 300.), (20., 250.)]);
        let s = compare(&p, &p, &MultiMatchConfig::for_screen(640.0, 480.0)).unwrap();
        assert_eq!(s.as_array(), [1.0; 5]);
    }

    #[test]
    fn opposite_corners_only_position_differs() {
        let a = path(&[(0., 0.), (30., 40.)]);
        let b = path(&[(570., 440.), (600., 480.)]);
        let cfg = no_simplify(1000.0);
        let s = compare(&a, &b, &cfg).unwrap();
        assert_eq!([s.shape, s.length, s.direction, s.duration], [1.0; 4]);
        // start points (0,0) vs (570,440): distance 720.07, / 1000
        let expected = 1.0 - (570f64.powi(2) + 440f64.powi(2)).sqrt() / 1000.0;
        assert!((s.position - expected).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_saccades_half_direction() {
        let a = path(&[(0., 0.), (1., 0.)]);
        let b = path(&[(0., 0.), (0., 1.)]);
        let s = compare(&a, &b, &no_simplify(100.0)).unwrap();
        assert!((s.direction - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_durations_count_as_equal() {
        let mut a = path(&[(0., 0.), (1., 0.)]);
        a.fixations[0].duration = 0.0;
        let s = compare(&a, &a.clone(), &no_simplify(100.0)).unwrap();
        assert_eq!(s.duration, 1.0);
    }
}
