//! Sparse coding with a learned dictionary.
//!
//! Solves
//!
//! ```text
//!   min_{D,C}  ‖X − C D‖²_F + λ1 ‖C‖₁   s.t.  D_j D_jᵀ ≤ 1  for every row j
//! ```
//!
//! by alternating between lasso coding of every sample with D fixed (cyclic
//! coordinate descent with soft-thresholding) and an exact block update of
//! each dictionary row with C fixed (least squares, then projection onto the
//! unit ball). Both steps are exact or descent steps, so the objective never
//! increases across alternations.

use std::io::Write;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};

/// Codewords as rows: `l` atoms of dimension `d`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dictionary<T = f64> {
    l: usize,
    d: usize,
    rows: Vec<T>,
}

impl<T: Scalar> Dictionary<T> {
    /// Builds a dictionary, rejecting rows with squared norm above 1 + 1e-9.
    pub fn new(l: usize, d: usize, rows: Vec<T>) -> Result<Self> {
        if l == 0 || d == 0 {
            return Err(Error::InvalidParameter("dictionary must be non-empty".into()));
        }
        if rows.len() != l * d {
            return Err(Error::DimensionMismatch {
                expected: l * d,
                got: rows.len(),
            });
        }
        let dict = Dictionary { l, d, rows };
        let bound = T::one() + T::lit(1e-9);
        if let Some(j) = (0..l).find(|&j| !(dot(dict.row(j), dict.row(j)) <= bound)) {
            return Err(Error::InvalidParameter(format!(
                "dictionary row {j} violates the unit-norm bound"
            )));
        }
        Ok(dict)
    }

    pub fn codewords(&self) -> usize {
        self.l
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn row(&self, j: usize) -> &[T] {
        &self.rows[j * self.d..(j + 1) * self.d]
    }

    pub fn rows(&self) -> &[T] {
        &self.rows
    }

    /// Gram matrix D Dᵀ, row-major l×l.
    pub fn gram(&self) -> Vec<T> {
        let l = self.l;
        let mut g = vec![T::zero(); l * l];
        for i in 0..l {
            for j in i..l {
                let v = dot(self.row(i), self.row(j));
                g[i * l + j] = v;
                g[j * l + i] = v;
            }
        }
        g
    }

    /// c D, the reconstruction of one code.
    pub fn reconstruct(&self, code: &[T]) -> Vec<T> {
        let mut x = vec![T::zero(); self.d];
        for (j, &c) in code.iter().enumerate() {
            if c != T::zero() {
                for (xi, &dj) in x.iter_mut().zip(self.row(j)) {
                    *xi += c * dj;
                }
            }
        }
        x
    }

    /// `GDIC` binary: magic, u32 l, u32 d, l×d f32 little-endian.
    pub fn write_gdic<W: Write>(&self, mut out: W) -> Result<()> {
        let mut buf = Vec::with_capacity(12 + self.rows.len() * 4);
        buf.extend_from_slice(b"GDIC");
        buf.extend_from_slice(&(self.l as u32).to_le_bytes());
        buf.extend_from_slice(&(self.d as u32).to_le_bytes());
        for &v in &self.rows {
            buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
        out.write_all(&buf).map_err(|e| Error::io("<dictionary>", e))
    }

    /// Reads a `GDIC` buffer. Rows that exceed the norm bound only through
    /// f32 rounding are rescaled; real violations are rejected.
    pub fn read_gdic(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..4] != b"GDIC" {
            return Err(Error::Format("missing GDIC header".into()));
        }
        let l = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let d = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let body = &bytes[12..];
        if body.len() != l * d * 4 {
            return Err(Error::Format(format!(
                "GDIC body has {} bytes, expected {}",
                body.len(),
                l * d * 4
            )));
        }
        let mut rows: Vec<T> = body
            .chunks_exact(4)
            .map(|c| T::lit(f32::from_le_bytes(c.try_into().unwrap()) as f64))
            .collect();
        for row in rows.chunks_mut(d.max(1)) {
            let sq = dot(row, row);
            if sq > T::one() && sq <= T::one() + T::lit(1e-5) {
                let s = sq.sqrt();
                row.iter_mut().for_each(|v| *v /= s);
            }
        }
        Dictionary::new(l, d, rows)
    }
}

/// One row of the code matrix C.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseCode<T = f64> {
    pub vector: Vec<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseCodingConfig<T = f64> {
    pub lambda1: T,
    pub max_outer_iters: usize,
    /// Coordinate descent stops once the largest coordinate change and the
    /// duality gap are both below this. Dictionary learning also stops when
    /// the relative objective improvement falls below it.
    pub encode_tolerance: T,
    /// Cap on coordinate-descent sweeps per sample.
    pub max_sweeps: usize,
    pub seed: u64,
}

impl<T: Scalar> Default for SparseCodingConfig<T> {
    fn default() -> Self {
        SparseCodingConfig {
            lambda1: T::lit(0.15),
            max_outer_iters: 10,
            encode_tolerance: T::lit(1e-6),
            max_sweeps: 1000,
            seed: 0,
        }
    }
}

impl<T: Scalar> SparseCodingConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda1 >= T::zero()) || !(self.encode_tolerance > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "lambda1 must be >= 0 and tolerance > 0, got {} and {}",
                self.lambda1, self.encode_tolerance
            )));
        }
        Ok(())
    }
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_dense<T: Scalar>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if !(a[pivot][col].abs() > T::lit(1e-12)) {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                let v = a[col][k];
                a[row][k] -= f * v;
            }
            let v = b[col];
            b[row] -= f * v;
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let s: T = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

fn sign<T: Scalar>(v: T) -> i8 {
    (v > T::zero()) as i8 - (v < T::zero()) as i8
}

#[inline]
pub fn soft_threshold<T: Scalar>(v: T, t: T) -> T {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        T::zero()
    }
}

/// ‖x − cD‖² + λ1‖c‖₁ for one sample.
pub fn lasso_objective<T: Scalar>(x: &[T], code: &[T], dict: &Dictionary<T>, lambda1: T) -> T {
    let rec = dict.reconstruct(code);
    let resid: T = x.iter().zip(&rec).map(|(&a, &b)| (a - b) * (a - b)).sum();
    resid + lambda1 * code.iter().map(|c| c.abs()).sum::<T>()
}

/// Precomputed quantities shared by every sample coded against one dictionary.
pub struct Encoder<'a, T> {
    dict: &'a Dictionary<T>,
    gram: Vec<T>,
    cfg: SparseCodingConfig<T>,
}

impl<'a, T: Scalar> Encoder<'a, T> {
    pub fn new(dict: &'a Dictionary<T>, cfg: &SparseCodingConfig<T>) -> Result<Self> {
        cfg.validate()?;
        Ok(Encoder {
            dict,
            gram: dict.gram(),
            cfg: *cfg,
        })
    }

    pub fn encode(&self, x: &[T]) -> Result<SparseCode<T>> {
        self.encode_from(x, vec![T::zero(); self.dict.l])
    }

    /// Coordinate descent started from `code` (warm start).
    pub fn encode_from(&self, x: &[T], mut code: Vec<T>) -> Result<SparseCode<T>> {
        let (l, d) = (self.dict.l, self.dict.d);
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: x.len(),
            });
        }
        if code.len() != l {
            return Err(Error::DimensionMismatch {
                expected: l,
                got: code.len(),
            });
        }
        let half_lambda = self.cfg.lambda1 / T::lit(2.0);
        let g = &self.gram;
        let b: Vec<T> = (0..l).map(|j| dot(self.dict.row(j), x)).collect();
        // r = b − G c, kept current as coordinates move
        let residual = |code: &[T]| -> Vec<T> {
            let mut r = b.clone();
            for (k, &ck) in code.iter().enumerate() {
                if ck != T::zero() {
                    for j in 0..l {
                        r[j] -= g[j * l + k] * ck;
                    }
                }
            }
            r
        };
        let mut r = residual(&code);

        for _ in 0..self.cfg.max_sweeps.max(1) {
            let mut max_change = T::zero();
            let mut signs_changed = false;
            for j in 0..l {
                let gjj = g[j * l + j];
                let new = if gjj > T::zero() {
                    soft_threshold(r[j] + gjj * code[j], half_lambda) / gjj
                } else {
                    T::zero()
                };
                let delta = new - code[j];
                if delta != T::zero() {
                    for (i, ri) in r.iter_mut().enumerate() {
                        *ri -= g[i * l + j] * delta;
                    }
                    signs_changed |= sign(new) != sign(code[j]);
                    code[j] = new;
                    max_change = max_change.max(delta.abs());
                }
            }
            if max_change < self.cfg.encode_tolerance && self.duality_gap(x, &code) <= self.cfg.encode_tolerance {
                break;
            }
            // with the sign pattern settled, jump to its restricted optimum
            // instead of zig-zagging between correlated atoms
            if !signs_changed && self.active_set_step(&b, &mut code) {
                r = residual(&code);
            }
        }
        Ok(SparseCode { vector: code })
    }

    /// Moves the support coordinates toward the minimizer of the objective
    /// restricted to the current sign pattern, stopping where the first
    /// coordinate would cross zero. The objective is a convex quadratic on
    /// that segment, so it never increases.
    fn active_set_step(&self, b: &[T], code: &mut [T]) -> bool {
        let l = self.dict.l;
        let half_lambda = self.cfg.lambda1 / T::lit(2.0);
        let support: Vec<usize> = (0..l).filter(|&j| code[j] != T::zero()).collect();
        if support.is_empty() {
            return false;
        }
        let a: Vec<Vec<T>> = support
            .iter()
            .map(|&i| support.iter().map(|&j| self.gram[i * l + j]).collect())
            .collect();
        let rhs: Vec<T> = support
            .iter()
            .map(|&j| b[j] - half_lambda * code[j].signum())
            .collect();
        let Some(target) = solve_dense(a, rhs) else {
            return false;
        };
        let mut step = T::one();
        for (&j, &t) in support.iter().zip(&target) {
            if t.signum() != code[j].signum() {
                step = step.min(code[j] / (code[j] - t));
            }
        }
        for (&j, &t) in support.iter().zip(&target) {
            let v = code[j] + step * (t - code[j]);
            code[j] = if v.signum() == code[j].signum() { v } else { T::zero() };
        }
        true
    }

    /// Upper bound on how far `code` is from the lasso optimum. Small
    /// coordinate steps alone can stall far from it on nearly collinear
    /// atoms. The dual point is the residual scaled into the feasible set.
    fn duality_gap(&self, x: &[T], code: &[T]) -> T {
        let half_lambda = self.cfg.lambda1 / T::lit(2.0);
        if half_lambda == T::zero() {
            return T::zero();
        }
        let rec = self.dict.reconstruct(code);
        let resid: Vec<T> = x.iter().zip(&rec).map(|(&a, &b)| a - b).collect();
        let corr = (0..self.dict.l)
            .map(|j| dot(self.dict.row(j), &resid).abs())
            .fold(T::zero(), T::max);
        let s = if corr > half_lambda { half_lambda / corr } else { T::one() };
        let primal = dot(&resid, &resid) + self.cfg.lambda1 * code.iter().map(|c| c.abs()).sum::<T>();
        let dual = dot(x, x)
            - x.iter().zip(&resid).map(|(&a, &r)| (a - s * r) * (a - s * r)).sum::<T>();
        primal - dual
    }

    /// Codes every sample; the output order matches the input.
    pub fn encode_all<V: AsRef<[T]> + Sync>(&self, xs: &[V]) -> Result<Vec<SparseCode<T>>> {
        xs.par_iter().map(|x| self.encode(x.as_ref())).collect()
    }
}

/// Approximate lasso solution for one descriptor against `dict`.
pub fn encode<T: Scalar>(
    x: &[T],
    dict: &Dictionary<T>,
    cfg: &SparseCodingConfig<T>,
) -> Result<SparseCode<T>> {
    Encoder::new(dict, cfg)?.encode(x)
}

#[derive(Clone, Debug)]
pub struct LearnedDictionary<T = f64> {
    pub dictionary: Dictionary<T>,
    pub codes: Vec<SparseCode<T>>,
    /// Full objective after each alternation.
    pub objective_history: Vec<T>,
    pub iterations: usize,
}

/// ‖X − CD‖²_F + λ1‖C‖₁.
pub fn dictionary_objective<T: Scalar, V: AsRef<[T]>>(
    xs: &[V],
    codes: &[SparseCode<T>],
    dict: &Dictionary<T>,
    lambda1: T,
) -> T {
    xs.iter()
        .zip(codes)
        .map(|(x, c)| lasso_objective(x.as_ref(), &c.vector, dict, lambda1))
        .sum()
}

fn project_to_unit_ball<T: Scalar>(row: &mut [T]) {
    let norm = dot(row, row).sqrt();
    if norm > T::one() {
        row.iter_mut().for_each(|v| *v /= norm);
    }
}

/// Learns `l` codewords from `xs` by alternating minimization.
///
/// Initialization draws `l` distinct samples (seeded) and projects them onto
/// the unit ball. Stops after `max_outer_iters` alternations or when the
/// relative objective improvement falls below `encode_tolerance`.
pub fn learn_dictionary<T: Scalar, V: AsRef<[T]> + Sync>(
    xs: &[V],
    l: usize,
    cfg: &SparseCodingConfig<T>,
) -> Result<LearnedDictionary<T>> {
    cfg.validate()?;
    if l == 0 {
        return Err(Error::InvalidParameter("dictionary size must be positive".into()));
    }
    if xs.len() < l {
        return Err(Error::InvalidParameter(format!(
            "need at least {l} samples to learn {l} codewords, got {}",
            xs.len()
        )));
    }
    let d = xs[0].as_ref().len();
    if let Some(bad) = xs.iter().find(|x| x.as_ref().len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: bad.as_ref().len(),
        });
    }
    if xs.iter().all(|x| x.as_ref().iter().all(|&v| v == T::zero())) {
        return Err(Error::Degenerate("every training sample is zero".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::with_capacity(l * d);
    for i in sample(&mut rng, xs.len(), l).into_iter() {
        let mut row = xs[i].as_ref().to_vec();
        project_to_unit_ball(&mut row);
        rows.extend(row);
    }
    let mut dict = Dictionary { l, d, rows };
    let mut codes: Vec<SparseCode<T>> = (0..xs.len())
        .map(|_| SparseCode {
            vector: vec![T::zero(); l],
        })
        .collect();
    let mut history = Vec::new();
    let mut previous = dictionary_objective(xs, &codes, &dict, cfg.lambda1);

    for _ in 0..cfg.max_outer_iters {
        let encoder = Encoder::new(&dict, cfg)?;
        codes = xs
            .par_iter()
            .zip(codes.into_par_iter())
            .map(|(x, c)| encoder.encode_from(x.as_ref(), c.vector))
            .collect::<Result<_>>()?;
        update_rows(&mut dict, xs, &codes);

        let objective = dictionary_objective(xs, &codes, &dict, cfg.lambda1);
        history.push(objective);
        let improvement = (previous - objective) / previous.abs().max(T::min_positive_value());
        previous = objective;
        if improvement < cfg.encode_tolerance {
            break;
        }
    }

    Ok(LearnedDictionary {
        iterations: history.len(),
        dictionary: dict,
        codes,
        objective_history: history,
    })
}

/// Exact minimization over each row in turn with the others fixed:
/// D_j ← Π( D_j + (Cᵀ(X − CD))_j / (CᵀC)_jj ). Unused atoms stay put.
fn update_rows<T: Scalar, V: AsRef<[T]>>(dict: &mut Dictionary<T>, xs: &[V], codes: &[SparseCode<T>]) {
    let (l, d) = (dict.l, dict.d);
    // A = CᵀC (l×l), B = CᵀX (l×d)
    let mut a = vec![T::zero(); l * l];
    let mut b = vec![T::zero(); l * d];
    for (x, c) in xs.iter().zip(codes) {
        let x = x.as_ref();
        let nz: Vec<(usize, T)> = c
            .vector
            .iter()
            .copied()
            .enumerate()
            .filter(|&(_, v)| v != T::zero())
            .collect();
        for &(i, ci) in &nz {
            for &(j, cj) in &nz {
                a[i * l + j] += ci * cj;
            }
            for (bk, &xk) in b[i * d..(i + 1) * d].iter_mut().zip(x) {
                *bk += ci * xk;
            }
        }
    }
    for j in 0..l {
        let ajj = a[j * l + j];
        if !(ajj > T::zero()) {
            continue;
        }
        // gradient residual: B_j − Σ_k A_jk D_k
        let mut u: Vec<T> = b[j * d..(j + 1) * d].to_vec();
        for k in 0..l {
            let ajk = a[j * l + k];
            if ajk != T::zero() {
                for (ui, &dk) in u.iter_mut().zip(dict.row(k)) {
                    *ui -= ajk * dk;
                }
            }
        }
        let row = &mut dict.rows[j * d..(j + 1) * d];
        for (r, ui) in row.iter_mut().zip(&u) {
            *r += *ui / ajj;
        }
        project_to_unit_ball(row);
    }
}

/// Sidecar metadata written next to a `GDIC` file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DictionaryMeta {
    pub lambda1: f64,
    pub seed: u64,
    pub iterations: usize,
    pub codewords: usize,
    pub dimension: usize,
    pub training_samples: usize,
    pub objective_history: Vec<f64>,
}
