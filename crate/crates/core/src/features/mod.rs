//! Word vectors, CBOW training, TF-IDF article features and sentence vectors.

mod cbow;
mod tfidf;
mod wordvec;

pub use cbow::{train_cbow, CbowConfig, CbowOutput};
pub use tfidf::{TfidfModel, DEFAULT_MAX_FEATURES};
pub use wordvec::{load_word_vectors, read_word_vectors, WordVectors};

use ndarray::Array1;

/// Mean of the in-vocabulary stem vectors; zero when none are known.
pub fn sentence_vector<S: AsRef<str>>(sentence: &[S], wv: &WordVectors) -> Array1<f64> {
    let mut sum = Array1::zeros(wv.dim());
    let mut n = 0usize;
    for s in sentence {
        if let Some(v) = wv.get(s.as_ref()) {
            sum += &v;
            n += 1;
        }
    }
    if n > 0 {
        sum /= n as f64;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn wv() -> WordVectors {
        WordVectors::new(
            vec!["visit".into(), "summit".into()],
            array![[1.0, 2.0, -1.0], [3.0, 0.0, 5.0]],
        )
        .unwrap()
    }

    #[test]
    fn oov_sentence_is_zero() {
        assert_eq!(sentence_vector(&["qqq", "zzz"], &wv()), array![0.0, 0.0, 0.0]);
        assert_eq!(sentence_vector::<&str>(&[], &wv()), array![0.0, 0.0, 0.0]);
    }

    #[test]
    fn single_and_pair_means() {
        assert_eq!(sentence_vector(&["summit"], &wv()), array![3.0, 0.0, 5.0]);
        assert_eq!(
            sentence_vector(&["visit", "oov", "summit"], &wv()),
            array![2.0, 1.0, 2.0]
        );
    }

    #[test]
    fn permutation_invariant() {
        let a = sentence_vector(&["visit", "summit", "visit"], &wv());
        let b = sentence_vector(&["summit", "visit", "visit"], &wv());
        assert!((a - b).iter().all(|d| d.abs() < 1e-15));
    }
}
