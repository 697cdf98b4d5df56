use std::collections::HashMap;

use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use super::logistic::SparseVector;
use crate::error::{Error, Result};
use crate::text::word_tokens;

pub const DEFAULT_VOCAB_SIZE: usize = 5000;

/// Terms with their inverse document frequencies.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "TfidfParts", into = "TfidfParts")]
pub struct TfidfVocabulary {
    terms: Vec<String>,
    idf: Vec<f64>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct TfidfParts {
    terms: Vec<String>,
    idf: Vec<f64>,
}

impl TryFrom<TfidfParts> for TfidfVocabulary {
    type Error = Error;

    fn try_from(p: TfidfParts) -> Result<Self> {
        TfidfVocabulary::new(p.terms, p.idf)
    }
}

impl From<TfidfVocabulary> for TfidfParts {
    fn from(v: TfidfVocabulary) -> Self {
        TfidfParts {
            terms: v.terms,
            idf: v.idf,
        }
    }
}

impl PartialEq for TfidfVocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.terms == other.terms && self.idf == other.idf
    }
}

impl TfidfVocabulary {
    pub fn new(terms: Vec<String>, idf: Vec<f64>) -> Result<Self> {
        if terms.len() != idf.len() {
            return Err(Error::DimensionMismatch {
                expected: terms.len(),
                actual: idf.len(),
            });
        }
        if idf.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::InvalidArgument("idf entries must be positive".into()));
        }
        let mut index = HashMap::with_capacity(terms.len());
        for (i, t) in terms.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate term {t:?}")));
            }
        }
        Ok(TfidfVocabulary { terms, idf, index })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }
}

/// Selects the `vocab_size` terms with the highest document frequency
/// (ties in lexicographic order) and computes `ln((1+N)/(1+df)) + 1`.
pub fn fit_tfidf<I, S>(docs: I, vocab_size: usize) -> Result<TfidfVocabulary>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut df: FxHashMap<String, u64> = FxHashMap::default();
    let mut seen: FxHashSet<String> = FxHashSet::default();
    let mut n = 0u64;
    for doc in docs {
        n += 1;
        seen.clear();
        for tok in word_tokens(doc.as_ref()) {
            if !seen.contains(&tok) {
                *df.entry(tok.clone()).or_insert(0) += 1;
                seen.insert(tok);
            }
        }
    }
    if n == 0 {
        return Err(Error::EmptyInput("no documents to fit a vocabulary on".into()));
    }
    let mut ranked: Vec<(String, u64)> = df.into_iter().collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(vocab_size);
    let idf = ranked
        .iter()
        .map(|(_, d)| ((1.0 + n as f64) / (1.0 + *d as f64)).ln() + 1.0)
        .collect();
    TfidfVocabulary::new(ranked.into_iter().map(|(t, _)| t).collect(), idf)
}

/// Raw term count times idf, L2-normalized. Out-of-vocabulary terms are
/// ignored; a document without vocabulary terms maps to the zero vector.
pub fn tfidf_vector(vocab: &TfidfVocabulary, text: &str) -> SparseVector {
    let mut tf: FxHashMap<usize, u64> = FxHashMap::default();
    for tok in word_tokens(text) {
        if let Some(i) = vocab.index_of(&tok) {
            *tf.entry(i).or_insert(0) += 1;
        }
    }
    let mut entries: Vec<(usize, f64)> = tf.into_iter().map(|(i, c)| (i, c as f64 * vocab.idf[i])).collect();
    entries.sort_unstable_by_key(|e| e.0);
    let norm = entries.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
    if norm > 0.0 {
        for e in &mut entries {
            e.1 /= norm;
        }
    }
    SparseVector {
        dim: vocab.len(),
        entries,
    }
}
