use std::collections::BTreeSet;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig<T = f64> {
    pub c_reg: T,
    pub epochs: usize,
    pub seed: u64,
}

impl<T: Scalar> Default for SvmConfig<T> {
    fn default() -> Self {
        SvmConfig {
            c_reg: T::one(),
            epochs: 50,
            seed: 0,
        }
    }
}

/// One-vs-rest linear classifier. Each weight vector carries its bias as the
/// last entry.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel<T = f64> {
    pub class_labels: Vec<String>,
    pub weights: Vec<Vec<T>>,
    pub training_config: SvmConfig<T>,
}

impl<T: Scalar> TrainedModel<T> {
    pub fn input_dimension(&self) -> usize {
        self.weights[0].len() - 1
    }

    pub fn scores(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.input_dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dimension(),
                got: x.len(),
            });
        }
        Ok(self.weights.iter().map(|w| affine(w, x)).collect())
    }

    /// Highest-scoring class; ties go to the earlier class.
    pub fn predict(&self, x: &[T]) -> Result<&str> {
        let scores = self.scores(x)?;
        let mut best = 0;
        for (i, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = i;
            }
        }
        Ok(&self.class_labels[best])
    }

    /// `GSVM`: magic, u32 classes, u32 weight length (input dim + 1), then
    /// the weight vectors as little-endian f32 in class order.
    pub fn write_gsvm<W: Write>(&self, mut out: W) -> Result<()> {
        let dim = self.weights[0].len();
        let mut buf = Vec::with_capacity(12 + self.weights.len() * dim * 4);
        buf.extend_from_slice(b"GSVM");
        buf.extend_from_slice(&(self.weights.len() as u32).to_le_bytes());
        buf.extend_from_slice(&(dim as u32).to_le_bytes());
        for w in &self.weights {
            for &v in w {
                buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
            }
        }
        out.write_all(&buf).map_err(|e| Error::io("<model>", e))
    }

    pub fn read_gsvm(bytes: &[u8], class_labels: Vec<String>, cfg: SvmConfig<T>) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..4] != b"GSVM" {
            return Err(Error::Format("missing GSVM header".into()));
        }
        let classes = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        if classes != class_labels.len() || dim < 1 || bytes.len() != 12 + classes * dim * 4 {
            return Err(Error::Format(format!(
                "GSVM header ({classes} classes, dim {dim}) does not match {} labels / {} bytes",
                class_labels.len(),
                bytes.len()
            )));
        }
        let values: Vec<T> = bytes[12..]
            .chunks_exact(4)
            .map(|c| T::lit(f32::from_le_bytes(c.try_into().unwrap()) as f64))
            .collect();
        Ok(TrainedModel {
            class_labels,
            weights: values.chunks(dim).map(<[T]>::to_vec).collect(),
            training_config: cfg,
        })
    }
}

fn affine<T: Scalar>(w: &[T], x: &[T]) -> T {
    let (bias, w) = w.split_last().unwrap();
    w.iter().zip(x).map(|(&a, &b)| a * b).sum::<T>() + *bias
}

/// Trains one hinge-loss classifier per class (sorted label order) with the
/// Pegasos stochastic subgradient method: λ = 1 / (c_reg · n), step 1/(λt),
/// bias as a constant feature, a fresh seeded shuffle each epoch.
pub fn train_svm<T: Scalar>(
    samples: &[(&[T], &str)],
    cfg: &SvmConfig<T>,
) -> Result<TrainedModel<T>> {
    if !(cfg.c_reg > T::zero()) || cfg.epochs == 0 {
        return Err(Error::InvalidParameter(format!(
            "svm needs c_reg > 0 and epochs > 0, got {} and {}",
            cfg.c_reg, cfg.epochs
        )));
    }
    let labels: Vec<String> = samples
        .iter()
        .map(|(_, l)| l.to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if labels.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "svm needs at least two classes, got {}",
            labels.len()
        )));
    }
    let dim = samples[0].0.len();
    if let Some((x, _)) = samples.iter().find(|(x, _)| x.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: x.len(),
        });
    }

    let weights = labels
        .par_iter()
        .enumerate()
        .map(|(ci, label)| {
            let ys: Vec<T> = samples
                .iter()
                .map(|(_, l)| if *l == label { T::one() } else { -T::one() })
                .collect();
            let seed = cfg.seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(ci as u64 + 1));
            pegasos(samples, &ys, cfg, seed)
        })
        .collect();

    Ok(TrainedModel {
        class_labels: labels,
        weights,
        training_config: *cfg,
    })
}

fn pegasos<T: Scalar>(samples: &[(&[T], &str)], ys: &[T], cfg: &SvmConfig<T>, seed: u64) -> Vec<T> {
    let n = samples.len();
    let dim = samples[0].0.len();
    let lambda = T::one() / (cfg.c_reg * T::from_count(n));
    let mut w = vec![T::zero(); dim + 1];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = 0usize;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = T::one() / (lambda * T::from_count(t));
            let (x, y) = (samples[i].0, ys[i]);
            let margin = y * affine(&w, x);
            let shrink = T::one() - eta * lambda;
            w.iter_mut().for_each(|v| *v *= shrink);
            if margin < T::one() {
                let step = eta * y;
                for (wk, &xk) in w.iter_mut().zip(x) {
                    *wk += step * xk;
                }
                *w.last_mut().unwrap() += step;
            }
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn clouds(seed: u64) -> Vec<(Vec<f64>, String)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for i in 0..200 {
            let (cx, label) = if i % 2 == 0 { (2.0, "a") } else { (-2.0, "b") };
            let x = vec![cx + rng.gen_range(-1.0..1.0), rng.gen_range(-3.0..3.0)];
            out.push((x, label.to_string()));
        }
        out
    }

    fn view(data: &[(Vec<f64>, String)]) -> Vec<(&[f64], &str)> {
        data.iter().map(|(x, l)| (x.as_slice(), l.as_str())).collect()
    }

    #[test]
    fn separable_clouds_fit_perfectly() {
        // witness hyperplane x0 = 0 separates the clouds with margin 1
        let data = clouds(1);
        assert!(data.iter().all(|(x, l)| (x[0] > 0.0) == (l == "a")));
        let model = train_svm(&view(&data), &SvmConfig::default()).unwrap();
        let correct = data
            .iter()
            .filter(|(x, l)| model.predict(x).unwrap() == l)
            .count();
        assert_eq!(correct, data.len());
    }

    #[test]
    fn same_seed_same_model() {
        let data = clouds(2);
        let a = train_svm(&view(&data), &SvmConfig::default()).unwrap();
        let b = train_svm(&view(&data), &SvmConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn relabelling_permutes_predictions() {
        let data = clouds(3);
        let swapped: Vec<_> = data
            .iter()
            .map(|(x, l)| (x.clone(), if l == "a" { "b" } else { "a" }.to_string()))
            .collect();
        let m1 = train_svm(&view(&data), &SvmConfig::default()).unwrap();
        let m2 = train_svm(&view(&swapped), &SvmConfig::default()).unwrap();
        for (x, _) in &data {
            let p1 = m1.predict(x).unwrap();
            let p2 = m2.predict(x).unwrap();
            assert_ne!(p1, p2);
        }
    }

    #[test]
    fn single_class_rejected() {
        let x = [1.0, 2.0];
        assert!(train_svm(&[(&x[..], "a"), (&x[..], "a")], &SvmConfig::default()).is_err());
    }

    #[test]
    fn gsvm_layout() {
        let data = clouds(4);
        let model = train_svm(&view(&data), &SvmConfig::default()).unwrap();
        let mut buf = Vec::new();
        model.write_gsvm(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"GSVM");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 3);
        let back = TrainedModel::<f64>::read_gsvm(&buf, model.class_labels.clone(), model.training_config).unwrap();
        for (x, l) in &data {
            assert_eq!(back.predict(x).unwrap(), l);
        }
    }
}
