use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

/// Dense word embeddings keyed by stem. Unknown stems map to zero vectors at
/// the call sites that need one.
#[derive(Debug, Clone, PartialEq)]
pub struct WordVectors {
    words: Vec<String>,
    index: HashMap<String, usize>,
    matrix: Array2<f64>,
}

impl WordVectors {
    pub fn new(words: Vec<String>, matrix: Array2<f64>) -> Result<Self> {
        if words.len() != matrix.nrows() {
            return Err(Error::Invalid(format!(
                "{} words but {} vector rows",
                words.len(),
                matrix.nrows()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("word vectors contain non-finite values".into()));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::Invalid(format!("duplicate word {w:?}")));
            }
        }
        Ok(Self { words, index, matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn get(&self, word: &str) -> Option<ArrayView1<'_, f64>> {
        self.index.get(word).map(|&i| self.matrix.row(i))
    }

    /// Writes the `count dim` header followed by one `word v1 … vD` line per row.
    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.len(), self.dim())?;
        for (word, row) in self.words.iter().zip(self.matrix.rows()) {
            write!(w, "{word}")?;
            for v in row {
                write!(w, " {v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }
}

pub fn load_word_vectors(path: impl AsRef<Path>) -> Result<WordVectors> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let (wv, warnings) = read_word_vectors(std::io::BufReader::new(file), path)?;
    for w in warnings {
        log::warn!("{}: {w}", path.display());
    }
    Ok(wv)
}

/// Parses the text format. A repeated word keeps its last row and yields a
/// warning.
pub fn read_word_vectors<R: BufRead>(reader: R, path: &Path) -> Result<(WordVectors, Vec<String>)> {
    let mut lines = reader.lines().enumerate();
    let (count, dim) = loop {
        let Some((i, line)) = lines.next() else {
            return Err(Error::parse(path, 1, "missing `count dim` header"));
        };
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let parsed = match parts.as_slice() {
            [c, d] => c.parse::<usize>().ok().zip(d.parse::<usize>().ok()),
            _ => None,
        };
        break parsed.ok_or_else(|| Error::parse(path, i + 1, "header must be `count dim`"))?;
    };

    let mut words: Vec<String> = Vec::with_capacity(count);
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut data: Vec<f64> = Vec::with_capacity(count * dim);
    let mut rows = 0usize;
    let mut warnings = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        rows += 1;
        let mut parts = line.split_whitespace();
        let word = parts.next().expect("non-empty line").to_string();
        let values = parts
            .map(|p| p.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(path, i + 1, format!("bad number: {e}")))?;
        if values.len() != dim {
            return Err(Error::parse(
                path,
                i + 1,
                format!("expected {dim} values, found {}", values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse(path, i + 1, "non-finite value"));
        }
        match index.get(&word) {
            Some(&r) => {
                warnings.push(format!("line {}: duplicate word {word:?}, keeping last", i + 1));
                data[r * dim..(r + 1) * dim].copy_from_slice(&values);
            }
            None => {
                index.insert(word.clone(), words.len());
                words.push(word);
                data.extend(values);
            }
        }
    }
    if rows != count {
        return Err(Error::parse(
            path,
            1,
            format!("header declares {count} rows, file has {rows}"),
        ));
    }
    let matrix = Array2::from_shape_vec((words.len(), dim), data).expect("row-major data");
    Ok((WordVectors::new(words, matrix)?, warnings))
}
