use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::corpus::Article;
use crate::error::{Error, Result};

pub const DEFAULT_MAX_FEATURES: usize = 1000;

/// Raw term frequency with smoothed idf over the most frequent stems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfModel {
    vocab: Vec<String>,
    idf: Vec<f64>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl TfidfModel {
    pub fn new(vocab: Vec<String>, idf: Vec<f64>) -> Result<Self> {
        if vocab.len() != idf.len() {
            return Err(Error::Invalid(format!(
                "tf-idf vocab has {} entries but idf has {}",
                vocab.len(),
                idf.len()
            )));
        }
        if idf.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Invalid("tf-idf weights must be finite and non-negative".into()));
        }
        let index = vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Ok(Self { vocab, idf, index })
    }

    /// Keeps the `max_features` stems with the highest document frequency,
    /// ties broken lexicographically. `idf = ln((1+N)/(1+df)) + 1`.
    pub fn fit<'a>(articles: impl IntoIterator<Item = &'a Article>, max_features: usize) -> Self {
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        let mut n = 0usize;
        for a in articles {
            n += 1;
            let mut seen: Vec<&str> = a.sentences.iter().flatten().map(String::as_str).collect();
            seen.sort_unstable();
            seen.dedup();
            for s in seen {
                *df.entry(s).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = df.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        ranked.truncate(max_features);
        let vocab: Vec<String> = ranked.iter().map(|(w, _)| w.to_string()).collect();
        let idf = ranked
            .iter()
            .map(|&(_, d)| ((1.0 + n as f64) / (1.0 + d as f64)).ln() + 1.0)
            .collect();
        Self::new(vocab, idf).expect("fitted weights are valid")
    }

    pub fn dim(&self) -> usize {
        self.vocab.len()
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    /// L2-normalized vector; all zeros when no stem is in the vocabulary.
    pub fn transform(&self, article: &Article) -> Array1<f64> {
        let mut v = Array1::zeros(self.dim());
        let len: usize = article.sentences.iter().map(Vec::len).sum();
        if len == 0 {
            return v;
        }
        for s in article.sentences.iter().flatten() {
            if let Some(&i) = self.index.get(s) {
                v[i] += 1.0;
            }
        }
        for (x, idf) in v.iter_mut().zip(&self.idf) {
            *x = *x / len as f64 * idf;
        }
        let norm = v.dot(&v).sqrt();
        if norm > 0.0 {
            v /= norm;
        }
        v
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string(self).expect("serializable");
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: TfidfModel = serde_json::from_str(&raw).map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
        Self::new(m.vocab, m.idf)
    }
}
