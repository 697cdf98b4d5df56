//! Fixture builders shared by the benchmarks.

use qscan_core::lm::{train_ngram, NgramModel, TokenId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` words drawn from a Zipf-like distribution over `vocab` types, so the
/// n-gram tables have a realistic long tail.
pub fn zipf_words(n: usize, vocab: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = (1..=vocab).map(|r| 1.0 / r as f64).collect();
    let mut cdf = Vec::with_capacity(vocab);
    let mut acc = 0.0;
    for w in &weights {
        acc += w;
        cdf.push(acc);
    }
    (0..n)
        .map(|_| {
            let u = rng.random::<f64>() * acc;
            let i = cdf.partition_point(|&c| c < u).min(vocab - 1);
            format!("w{i}")
        })
        .collect()
}

/// Trigram model over a synthetic corpus.
pub fn fixture_model(n_tokens: usize, vocab: usize) -> NgramModel {
    train_ngram(zipf_words(n_tokens, vocab, 1), 3, 0.1).expect("fixture model")
}

/// Documents of `len` words each, as raw text.
pub fn fixture_docs(n_docs: usize, len: usize, vocab: usize, seed: u64) -> Vec<String> {
    let words = zipf_words(n_docs * len, vocab, seed);
    words.chunks(len).map(|c| c.join(" ")).collect()
}

/// Token ids of `doc` under `model`.
pub fn encode(model: &NgramModel, doc: &str) -> Vec<TokenId> {
    model.vocabulary().encode_text(doc)
}
