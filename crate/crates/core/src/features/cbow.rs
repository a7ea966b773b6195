use std::collections::HashMap;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::WordVectors;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CbowConfig {
    pub dim: usize,
    /// Context radius on each side of the target.
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    /// Starting learning rate, decayed linearly to 1e-4 of itself.
    pub lr: f64,
    pub min_count: usize,
    pub seed: u64,
}

impl Default for CbowConfig {
    fn default() -> Self {
        Self {
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            lr: 0.05,
            min_count: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CbowOutput {
    pub vectors: WordVectors,
    /// Mean negative-sampling loss per prediction, one value per epoch.
    pub epoch_losses: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// CBOW with negative sampling over stemmed sentences. Vocabulary order is
/// first occurrence, so equal inputs and seed give identical vectors.
///
/// The exported vector of a word is the mean of its input and output
/// embeddings.
pub fn train_cbow(sentences: &[Vec<String>], cfg: &CbowConfig) -> Result<CbowOutput> {
    if cfg.dim == 0 || cfg.window == 0 {
        return Err(Error::Invalid("cbow dim and window must be positive".into()));
    }
    let mut counts: Vec<(String, usize)> = Vec::new();
    let mut pos: HashMap<&str, usize> = HashMap::new();
    for s in sentences {
        for w in s {
            match pos.get(w.as_str()) {
                Some(&i) => counts[i].1 += 1,
                None => {
                    pos.insert(w, counts.len());
                    counts.push((w.clone(), 1));
                }
            }
        }
    }
    counts.retain(|(_, c)| *c >= cfg.min_count);
    if counts.is_empty() {
        return Err(Error::Invalid("cannot train word vectors on an empty corpus".into()));
    }
    let index: HashMap<&str, usize> = counts.iter().enumerate().map(|(i, (w, _))| (w.as_str(), i)).collect();
    let encoded: Vec<Vec<usize>> = sentences
        .iter()
        .map(|s| s.iter().filter_map(|w| index.get(w.as_str()).copied()).collect())
        .collect();

    // Unigram^0.75 noise distribution as a cumulative table.
    let mut cdf: Vec<f64> = counts.iter().map(|(_, c)| (*c as f64).powf(0.75)).collect();
    let mut acc = 0.0;
    for p in cdf.iter_mut() {
        acc += *p;
        *p = acc;
    }
    let total = acc;

    let (v, d) = (counts.len(), cfg.dim);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut w_in: Vec<f64> = (0..v * d).map(|_| (rng.random::<f64>() - 0.5) / d as f64).collect();
    let mut w_out = vec![0.0; v * d];

    let steps_total = (cfg.epochs * encoded.iter().map(Vec::len).sum::<usize>()).max(1);
    let mut step = 0usize;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut h = vec![0.0; d];
    let mut grad_h = vec![0.0; d];
    let mut ctx = Vec::new();

    for _ in 0..cfg.epochs {
        let mut loss_sum = 0.0;
        let mut n_pred = 0usize;
        for sent in &encoded {
            for t in 0..sent.len() {
                let lr = cfg.lr * (1.0 - step as f64 / steps_total as f64).max(1e-4);
                step += 1;
                ctx.clear();
                let lo = t.saturating_sub(cfg.window);
                let hi = (t + cfg.window + 1).min(sent.len());
                ctx.extend((lo..hi).filter(|&j| j != t).map(|j| sent[j]));
                if ctx.is_empty() {
                    continue;
                }
                h.fill(0.0);
                for &c in &ctx {
                    for (hk, wk) in h.iter_mut().zip(&w_in[c * d..(c + 1) * d]) {
                        *hk += wk;
                    }
                }
                let inv = 1.0 / ctx.len() as f64;
                h.iter_mut().for_each(|x| *x *= inv);
                grad_h.fill(0.0);

                let target = sent[t];
                for k in 0..=cfg.negatives {
                    let (word, label) = if k == 0 {
                        (target, 1.0)
                    } else {
                        let r = rng.random::<f64>() * total;
                        let w = cdf.partition_point(|&c| c <= r).min(v - 1);
                        if w == target {
                            continue;
                        }
                        (w, 0.0)
                    };
                    let out = &mut w_out[word * d..(word + 1) * d];
                    let score: f64 = out.iter().zip(&h).map(|(a, b)| a * b).sum();
                    let p = sigmoid(score);
                    loss_sum -= if label > 0.0 {
                        p.max(1e-12).ln()
                    } else {
                        (1.0 - p).max(1e-12).ln()
                    };
                    let g = lr * (label - p);
                    for ((gh, o), hk) in grad_h.iter_mut().zip(out.iter_mut()).zip(&h) {
                        *gh += g * *o;
                        *o += g * hk;
                    }
                }
                n_pred += 1;
                for &c in &ctx {
                    for (wk, gk) in w_in[c * d..(c + 1) * d].iter_mut().zip(&grad_h) {
                        *wk += gk * inv;
                    }
                }
            }
        }
        epoch_losses.push(if n_pred > 0 { loss_sum / n_pred as f64 } else { 0.0 });
    }

    let words = counts.into_iter().map(|(w, _)| w).collect();
    let merged: Vec<f64> = w_in.iter().zip(&w_out).map(|(a, b)| 0.5 * (a + b)).collect();
    let matrix = Array2::from_shape_vec((v, d), merged).expect("v×d buffer");
    Ok(CbowOutput {
        vectors: WordVectors::new(words, matrix)?,
        epoch_losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Vec<Vec<String>> {
        vec![vec!["a".into(), "b".into(), "c".into()], vec!["c".into(), "d".into()]]
    }

    #[test]
    fn dimension_is_respected() {
        let out = train_cbow(
            &toy(),
            &CbowConfig {
                dim: 100,
                epochs: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(out.vectors.dim(), 100);
        assert_eq!(out.vectors.len(), 4);
        assert!(out
            .vectors
            .words()
            .iter()
            .all(|w| out.vectors.get(w).unwrap().len() == 100));
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(train_cbow(&[], &CbowConfig::default()).is_err());
        assert!(train_cbow(&[vec![]], &CbowConfig::default()).is_err());
    }

    #[test]
    fn seeded_runs_are_identical() {
        let cfg = CbowConfig {
            dim: 8,
            epochs: 3,
            seed: 9,
            ..Default::default()
        };
        let a = train_cbow(&toy(), &cfg).unwrap();
        let b = train_cbow(&toy(), &cfg).unwrap();
        assert_eq!(a.vectors, b.vectors);
        assert_eq!(a.epoch_losses, b.epoch_losses);
    }
}
