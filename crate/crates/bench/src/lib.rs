//! Shared fixtures for the criterion benches.

use procaware::corpus::{synthesize_corpus, Corpus, SynthSpec};
use procaware::embed::{embed_corpus, EmbeddingTable};
use procaware::linalg;
use procaware::trainer::TrainConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn unit_vectors(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let n = linalg::norm(&v);
            v.into_iter().map(|x| x / n).collect()
        })
        .collect()
}

/// The 8 × 6 seed-7 synthetic corpus with its embedding table at the
/// default config.
pub fn seed7() -> (Corpus, EmbeddingTable, TrainConfig) {
    let c = synthesize_corpus(&SynthSpec::new(8, 6, 16, 0.05, 7)).unwrap().corpus;
    let cfg = TrainConfig {
        lr: 1e-3,
        ..TrainConfig::default()
    };
    let table = embed_corpus(&cfg.embedder(), &c).unwrap();
    (c, table, cfg)
}
