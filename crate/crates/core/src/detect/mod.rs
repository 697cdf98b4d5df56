//! Detectors: GLTR rank histograms, logistic regression, the TF-IDF spam
//! baseline and externally computed scores.

mod gltr;
mod logistic;
mod tfidf;

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::read_score_table;
use crate::error::{Error, Result};
use crate::lm::{LanguageModel, NgramModel};

pub use gltr::{default_bucket_bounds, gltr_featurize, rank_histogram, validate_bucket_bounds, RankHistogramFeature};
pub use logistic::{
    fit_logistic, fit_logistic_traced, score_logistic, sigmoid, FeatureRow, FeatureScale, LogisticConfig, LogisticFit,
    LogisticModel, SparseVector,
};
pub use tfidf::{fit_tfidf, tfidf_vector, TfidfVocabulary, DEFAULT_VOCAB_SIZE};

pub const DETECTOR_FORMAT_VERSION: u32 = 1;

/// Language-quality score of the spam baseline: the model's probability of
/// not-spam (label 1 = not-spam).
pub fn spam_lq_score(model: &LogisticModel, vocab: &TfidfVocabulary, text: &str) -> Result<f64> {
    score_logistic(model, &tfidf_vector(vocab, text))
}

/// Loads a score table produced by an external detector.
pub fn load_external_scores(path: &Path) -> Result<HashMap<String, f64>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path.display().to_string();
    let rows = read_score_table(std::io::BufReader::new(f), &name)?;
    let mut out = HashMap::with_capacity(rows.len());
    for (i, row) in rows.into_iter().enumerate() {
        let line = i as u64 + 2;
        if out.insert(row.doc_id.clone(), row.score).is_some() {
            return Err(Error::record(&name, line, format!("duplicate doc_id {:?}", row.doc_id)));
        }
    }
    Ok(out)
}

/// Identifies the language model a GLTR detector was trained against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmSignature {
    pub order: usize,
    pub alpha: f64,
    pub vocab_size: usize,
    pub total_tokens: u64,
}

impl LmSignature {
    pub fn of(model: &NgramModel) -> Self {
        LmSignature {
            order: model.order(),
            alpha: model.alpha(),
            vocab_size: model.vocab_size(),
            total_tokens: model.total_tokens(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DetectorKind {
    /// Scores P(machine-written) from the GLTR rank histogram.
    Gltr {
        bucket_bounds: Vec<usize>,
        lm: LmSignature,
        model: LogisticModel,
    },
    /// Spam baseline. The model predicts not-spam; the score column holds
    /// P(spam) = 1 - P(not-spam).
    Spam {
        vocab: TfidfVocabulary,
        model: LogisticModel,
    },
}

/// A trained detector as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorFile {
    pub detector_id: String,
    pub version: u32,
    #[serde(flatten)]
    pub kind: DetectorKind,
}

impl DetectorFile {
    pub fn new(detector_id: impl Into<String>, kind: DetectorKind) -> Self {
        DetectorFile {
            detector_id: detector_id.into(),
            version: DETECTOR_FORMAT_VERSION,
            kind,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let d: DetectorFile = serde_json::from_str(s).map_err(|e| Error::ModelFormat(e.to_string()))?;
        if d.version != DETECTOR_FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported detector version {}",
                d.version
            )));
        }
        match &d.kind {
            DetectorKind::Gltr {
                bucket_bounds,
                lm,
                model,
            } => {
                model.validate()?;
                validate_bucket_bounds(bucket_bounds, lm.vocab_size)?;
                if model.feature_dim != bucket_bounds.len() {
                    return Err(Error::ModelFormat("weight count differs from bucket count".into()));
                }
            }
            DetectorKind::Spam { vocab, model } => {
                model.validate()?;
                if model.feature_dim != vocab.len() {
                    return Err(Error::ModelFormat("weight count differs from vocabulary size".into()));
                }
            }
        }
        Ok(d)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("detector serializes")
    }

    pub fn needs_lm(&self) -> bool {
        matches!(self.kind, DetectorKind::Gltr { .. })
    }

    /// Pairs the detector with its language model (required for GLTR).
    pub fn bind<'a>(&'a self, lm: Option<&'a NgramModel>) -> Result<Scorer<'a>> {
        if let DetectorKind::Gltr { lm: sig, .. } = &self.kind {
            let lm = lm.ok_or_else(|| Error::InvalidArgument("GLTR detector needs a language model".into()))?;
            if LmSignature::of(lm) != *sig {
                return Err(Error::InvalidArgument(
                    "language model does not match the one the detector was trained with".into(),
                ));
            }
            return Ok(Scorer {
                detector: self,
                lm: Some(lm),
            });
        }
        Ok(Scorer {
            detector: self,
            lm: None,
        })
    }
}

/// A detector ready to score text.
#[derive(Clone, Copy)]
pub struct Scorer<'a> {
    detector: &'a DetectorFile,
    lm: Option<&'a NgramModel>,
}

impl Scorer<'_> {
    pub fn detector_id(&self) -> &str {
        &self.detector.detector_id
    }

    /// Score-column value for a document text.
    pub fn score(&self, text: &str) -> Result<f64> {
        match &self.detector.kind {
            DetectorKind::Gltr {
                bucket_bounds, model, ..
            } => {
                let lm = self.lm.expect("bound with a model");
                let tokens = lm.vocabulary().encode_text(text);
                let f = gltr_featurize(&tokens, lm, bucket_bounds)?;
                score_logistic(model, &f.values)
            }
            DetectorKind::Spam { vocab, model } => Ok(1.0 - spam_lq_score(model, vocab, text)?),
        }
    }
}
