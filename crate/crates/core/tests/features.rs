use celetrip::features::{train_cbow, CbowConfig, WordVectors};
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// "alpha" and "beta" only ever appear together; everything else is noise.
fn pair_corpus(seed: u64) -> Vec<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<String> = (0..40).map(|i| format!("noise{i}")).collect();
    (0..400)
        .map(|i| {
            let mut s: Vec<String> = noise.choose_multiple(&mut rng, 4).cloned().collect();
            if i % 4 == 0 {
                s.insert(2, "alpha".into());
                s.insert(3, "beta".into());
            }
            s
        })
        .collect()
}

fn cosine(wv: &WordVectors, a: &str, b: &str) -> f64 {
    let (x, y) = (wv.get(a).unwrap(), wv.get(b).unwrap());
    x.dot(&y) / (x.dot(&x).sqrt() * y.dot(&y).sqrt())
}

#[test]
fn co_occurring_pair_is_closer_than_noise() {
    let cfg = CbowConfig {
        dim: 20,
        window: 2,
        epochs: 30,
        seed: 3,
        ..Default::default()
    };
    let wv = train_cbow(&pair_corpus(1), &cfg).unwrap().vectors;
    let pair = cosine(&wv, "alpha", "beta");
    for i in 0..40 {
        let other = format!("noise{i}");
        let c = cosine(&wv, "alpha", &other);
        assert!(pair > c, "cos(alpha, beta) = {pair} vs cos(alpha, {other}) = {c}");
    }
}

#[test]
fn loss_decreases_in_five_epoch_blocks() {
    let cfg = CbowConfig {
        dim: 20,
        window: 2,
        epochs: 20,
        seed: 5,
        ..Default::default()
    };
    let losses = train_cbow(&pair_corpus(2), &cfg).unwrap().epoch_losses;
    let blocks: Vec<f64> = losses.chunks(5).map(|c| c.iter().sum::<f64>() / 5.0).collect();
    for w in blocks.windows(2) {
        assert!(w[1] < w[0], "block averages {blocks:?}");
    }
}
