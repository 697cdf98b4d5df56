use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm::{LanguageModel, TokenId};

/// Default top-k bucket bounds: 10, 100, 1000 and the whole vocabulary.
pub fn default_bucket_bounds(vocab_size: usize) -> Vec<usize> {
    vec![10, 100, 1000, vocab_size]
}

/// Document-level histogram of token ranks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankHistogramFeature {
    pub bucket_bounds: Vec<usize>,
    /// Fraction of tokens per bucket. Bucket `i` holds ranks in
    /// `(bounds[i-1], bounds[i]]`.
    pub values: Vec<f64>,
    pub token_count: usize,
}

pub fn validate_bucket_bounds(bounds: &[usize], vocab_size: usize) -> Result<()> {
    if bounds.is_empty() {
        return Err(Error::InvalidArgument("bucket bounds are empty".into()));
    }
    if bounds[0] == 0 || bounds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(format!(
            "bucket bounds must be positive and strictly ascending: {bounds:?}"
        )));
    }
    if *bounds.last().unwrap() != vocab_size {
        return Err(Error::InvalidArgument(format!(
            "last bucket bound {} must equal the vocabulary size {vocab_size}",
            bounds.last().unwrap()
        )));
    }
    Ok(())
}

/// Bins a list of 1-based ranks.
pub fn rank_histogram(ranks: impl IntoIterator<Item = usize>, bounds: &[usize]) -> Result<RankHistogramFeature> {
    let mut counts = vec![0u64; bounds.len()];
    let mut n = 0usize;
    for r in ranks {
        let bucket = bounds.partition_point(|&b| b < r);
        if bucket == bounds.len() {
            return Err(Error::InvalidArgument(format!(
                "rank {r} exceeds the last bucket bound"
            )));
        }
        counts[bucket] += 1;
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyInput("document has no tokens".into()));
    }
    Ok(RankHistogramFeature {
        bucket_bounds: bounds.to_vec(),
        values: counts.iter().map(|&c| c as f64 / n as f64).collect(),
        token_count: n,
    })
}

/// Ranks every token of a document under `model` given its left context
/// (the first token under the empty context) and bins the ranks.
pub fn gltr_featurize<M: LanguageModel + ?Sized>(
    doc_tokens: &[TokenId],
    model: &M,
    bucket_bounds: &[usize],
) -> Result<RankHistogramFeature> {
    if doc_tokens.is_empty() {
        return Err(Error::EmptyInput("document has no tokens".into()));
    }
    validate_bucket_bounds(bucket_bounds, model.vocab_size())?;
    let keep = model.max_context();
    let ranks = doc_tokens.iter().enumerate().map(|(i, &t)| {
        let ctx = &doc_tokens[i.saturating_sub(keep)..i];
        model.token_rank(ctx, t)
    });
    rank_histogram(ranks, bucket_bounds)
}
