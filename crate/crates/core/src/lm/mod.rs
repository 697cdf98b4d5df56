//! Language-model backends.
//!
//! [`LanguageModel`] is the pluggable interface: a backend only has to produce
//! a dense next-token distribution for a left context. Token ranks and the
//! probability-ordered token stream used by top-k / top-p sampling have
//! default implementations derived from that distribution; backends with a
//! cheaper exact route (such as [`NgramModel`]) override them.
//!
//! Ordering convention everywhere: probability descending, then token id
//! ascending. Ranks are 1-based in that order.

mod ngram;
mod sampling;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ngram::{train_ngram, NgramModel, DEFAULT_ALPHA, DEFAULT_ORDER};
pub use sampling::{sample_next, sample_sequence, SamplingStrategy};

pub type TokenId = u32;

/// Token string used for out-of-vocabulary tokens.
pub const UNK_TOKEN: &str = "<unk>";

/// Ordered set of distinct token strings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
    unk_id: TokenId,
}

impl Vocabulary {
    /// Builds a vocabulary from distinct tokens. `unk_id` must index the
    /// unknown token.
    pub fn new(tokens: Vec<String>, unk_id: TokenId) -> Result<Self> {
        if (unk_id as usize) >= tokens.len() {
            return Err(Error::InvalidArgument(format!(
                "unk id {unk_id} out of range for {} tokens",
                tokens.len()
            )));
        }
        if tokens.len() > TokenId::MAX as usize {
            return Err(Error::InvalidArgument("vocabulary too large".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as TokenId).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate token {t:?}")));
            }
        }
        Ok(Vocabulary { tokens, index, unk_id })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn unk_id(&self) -> TokenId {
        self.unk_id
    }

    /// Id of `token`, or the unknown id.
    pub fn id(&self, token: &str) -> TokenId {
        self.index.get(token).copied().unwrap_or(self.unk_id)
    }

    pub fn get(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<TokenId> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    /// Tokenizes text with [`crate::text::lm_tokens`] and maps it to ids.
    pub fn encode_text(&self, text: &str) -> Vec<TokenId> {
        self.encode(&crate::text::lm_tokens(text))
    }

    pub fn decode(&self, ids: &[TokenId]) -> Vec<&str> {
        ids.iter().map(|&i| self.token(i)).collect()
    }
}

/// Dense probability vector over the vocabulary, indexed by token id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextTokenDistribution {
    pub probabilities: Vec<f64>,
}

impl NextTokenDistribution {
    pub fn new(probabilities: Vec<f64>) -> Self {
        NextTokenDistribution { probabilities }
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn prob(&self, token: TokenId) -> f64 {
        self.probabilities[token as usize]
    }

    /// 1-based rank of `token`: one plus the number of tokens that sort
    /// strictly before it (higher probability, or equal probability and
    /// smaller id).
    pub fn rank_of(&self, token: TokenId) -> usize {
        let pt = self.prob(token);
        let before = self
            .probabilities
            .iter()
            .enumerate()
            .filter(|&(u, &pu)| pu > pt || (pu == pt && (u as TokenId) < token))
            .count();
        before + 1
    }

    /// All token ids ordered by probability descending, id ascending.
    pub fn sorted_ids(&self) -> Vec<TokenId> {
        let mut ids: Vec<TokenId> = (0..self.probabilities.len() as TokenId).collect();
        ids.sort_by(|&a, &b| {
            self.probabilities[b as usize]
                .total_cmp(&self.probabilities[a as usize])
                .then(a.cmp(&b))
        });
        ids
    }

    pub fn sum(&self) -> f64 {
        self.probabilities.iter().sum()
    }
}

/// Stream of `(token, probability)` pairs in rank order.
pub type RankedTokens<'a> = Box<dyn Iterator<Item = (TokenId, f64)> + 'a>;

/// A next-token predictor conditioned on left context.
pub trait LanguageModel: Send + Sync {
    fn vocab_size(&self) -> usize;

    /// Full next-token distribution after `context`.
    fn next_distribution(&self, context: &[TokenId]) -> NextTokenDistribution;

    /// Number of trailing context tokens the model actually conditions on.
    /// Callers may pass shorter slices without changing results.
    fn max_context(&self) -> usize {
        usize::MAX
    }

    /// 1-based rank of `token` after `context`.
    fn token_rank(&self, context: &[TokenId], token: TokenId) -> usize {
        self.next_distribution(context).rank_of(token)
    }

    /// Tokens in rank order with their probabilities.
    fn ranked_tokens<'a>(&'a self, context: &[TokenId]) -> RankedTokens<'a> {
        let dist = self.next_distribution(context);
        let ids = dist.sorted_ids();
        Box::new(ids.into_iter().map(move |id| (id, dist.probabilities[id as usize])))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_ties_break_by_id() {
        let d = NextTokenDistribution::new(vec![1.0 / 3.0; 3]);
        assert_eq!(d.rank_of(0), 1);
        assert_eq!(d.rank_of(2), 3);
        let d = NextTokenDistribution::new(vec![0.1, 0.7, 0.2]);
        assert_eq!(d.rank_of(2), 2);
        assert_eq!(d.sorted_ids(), vec![1, 2, 0]);
    }

    #[test]
    fn vocabulary_rejects_duplicates_and_maps_unknowns() {
        assert!(Vocabulary::new(vec!["a".into(), "a".into()], 0).is_err());
        assert!(Vocabulary::new(vec!["a".into()], 1).is_err());
        let v = Vocabulary::new(vec![UNK_TOKEN.into(), "a".into(), "b".into()], 0).unwrap();
        assert_eq!(v.encode(&["b", "zzz", "a"]), vec![2, 0, 1]);
    }
}
