//! Language-quality scoring of web documents with machine-text detectors.
//!
//! The crate covers the full pipeline: streaming corpus ingestion
//! ([`corpus`]), a pluggable language-model interface with an n-gram
//! backend ([`lm`]), GLTR rank-histogram and TF-IDF detectors
//! ([`detect`]), statistics ([`stats`]), the human-evaluation protocol
//! ([`evalproto`]) and corpus analytics ([`analytics`]).

pub mod analytics;
pub mod corpus;
pub mod detect;
pub mod error;
pub mod evalproto;
pub mod lm;
pub mod parallel;
pub mod stats;
pub mod text;

pub use corpus::{CorpusFormat, Document, ErrorPolicy, IngestOptions, IngestStats, ScoredDocument};
pub use detect::{DetectorFile, DetectorKind, LogisticConfig, LogisticModel, RankHistogramFeature, TfidfVocabulary};
pub use error::{Error, Result};
pub use evalproto::{BucketName, BucketSpec, EvalReport, LqRating, Rating, SheetRow};
pub use lm::{LanguageModel, NextTokenDistribution, NgramModel, SamplingStrategy, TokenId, Vocabulary};
pub use stats::{BootstrapConfig, BootstrapInterval};
