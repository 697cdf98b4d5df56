//! Command grammar. Every argument struct serializes into the sidecar so a
//! run can be reproduced from its metadata alone.

use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use qscan_core::corpus::DEFAULT_TRUNCATE_AT;
use qscan_core::{CorpusFormat, ErrorPolicy, IngestOptions, LogisticConfig};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "qscan", version, about = "Language-quality scoring for text corpora")]
pub struct Cli {
    /// TOML file of default flag values; flags given on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Normalize a corpus into JSONL documents.
    Ingest(IngestArgs),
    /// Train or sample the n-gram language model.
    #[command(subcommand)]
    Lm(LmCommand),
    /// Train a detector.
    #[command(subcommand)]
    Train(TrainCommand),
    /// Score every document of a corpus with a detector.
    Score(ScoreArgs),
    /// Human-evaluation protocol and detector accuracy.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Corpus analytics over scored documents.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
}

#[derive(Subcommand, Debug)]
pub enum LmCommand {
    /// Fit a model on a text, JSONL or text-dir corpus.
    Train(LmTrainArgs),
    /// Generate documents by top-k or top-p sampling.
    Sample(LmSampleArgs),
}

#[derive(Subcommand, Debug)]
pub enum TrainCommand {
    /// Rank-histogram detector (human = 0, machine = 1).
    Gltr(TrainGltrArgs),
    /// TF-IDF spam baseline (spam = 0, not-spam = 1).
    Spam(TrainSpamArgs),
}

#[derive(Subcommand, Debug)]
pub enum EvalCommand {
    /// Draw the blind rating sheet from a score table.
    Sheet(EvalSheetArgs),
    /// Correlation and agreement between raters and detector buckets.
    Lq(EvalLqArgs),
    /// Thresholded accuracy against labels.
    Accuracy(EvalAccuracyArgs),
}

#[derive(Subcommand, Debug)]
pub enum AnalyzeCommand {
    /// Per-month share of documents above score thresholds.
    Temporal(TemporalArgs),
    /// Score-range shares per document-length bin.
    Length(LengthArgs),
    /// Score histogram per topic.
    Topic(TopicArgs),
    /// Most frequent terms within score ranges.
    Terms(TermsArgs),
    /// Score histograms inside and outside a domain set.
    Domain(DomainArgs),
    /// Document-length percentiles of an unscored corpus.
    Percentiles(PercentilesArgs),
}

#[derive(ValueEnum, Serialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum FormatArg {
    Jsonl,
    TextDir,
}

impl FormatArg {
    /// Directories are text-dir corpora, anything else JSONL.
    pub fn infer(path: &Path) -> FormatArg {
        if path.is_dir() {
            FormatArg::TextDir
        } else {
            FormatArg::Jsonl
        }
    }

    pub fn corpus_format(self) -> CorpusFormat {
        match self {
            FormatArg::Jsonl => CorpusFormat::Jsonl,
            FormatArg::TextDir => CorpusFormat::TextDir,
        }
    }
}

#[derive(ValueEnum, Serialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum OnError {
    Skip,
    Abort,
}

/// How corpus records are read and filtered.
#[derive(Args, Serialize, Debug, Clone)]
pub struct ReadOpts {
    /// Corpus layout; inferred from the path when omitted.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Keep only the first N characters of each text.
    #[arg(long, default_value_t = DEFAULT_TRUNCATE_AT)]
    pub truncate_at: usize,
    /// Drop documents shorter than N characters before truncation.
    #[arg(long, default_value_t = 0)]
    pub min_chars: u64,
    /// Skip or abort on malformed records.
    #[arg(long, value_enum, default_value_t = OnError::Skip)]
    pub on_error: OnError,
}

impl ReadOpts {
    pub fn options(&self) -> IngestOptions {
        IngestOptions {
            truncate_at: self.truncate_at,
            min_chars: self.min_chars,
            on_error: match self.on_error {
                OnError::Skip => ErrorPolicy::Skip,
                OnError::Abort => ErrorPolicy::Abort,
            },
        }
    }

    /// Fixes the format for `path` so the echoed config is explicit.
    pub fn resolve_format(&mut self, path: &Path) -> CorpusFormat {
        let f = *self.format.get_or_insert_with(|| FormatArg::infer(path));
        f.corpus_format()
    }
}

/// Gradient-descent settings; unset values take the trainer's defaults.
#[derive(Args, Serialize, Debug, Clone, Default)]
pub struct OptimOpts {
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Standardize features before fitting.
    #[arg(long)]
    pub standardize: Option<bool>,
}

impl OptimOpts {
    pub fn resolve(&mut self, defaults: LogisticConfig) -> LogisticConfig {
        let cfg = LogisticConfig {
            lr: *self.lr.get_or_insert(defaults.lr),
            l2: *self.l2.get_or_insert(defaults.l2),
            max_iters: *self.max_iters.get_or_insert(defaults.max_iters),
            tol: *self.tol.get_or_insert(defaults.tol),
            standardize: *self.standardize.get_or_insert(defaults.standardize),
        };
        cfg
    }
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub read: ReadOpts,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Serialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum LmFormat {
    /// Plain text, tokenized line by line.
    Text,
    Jsonl,
    TextDir,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct LmTrainArgs {
    /// Training text: a plain-text file, a JSONL corpus or a text directory.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Inferred from the path when omitted (`.jsonl` or a directory).
    #[arg(long, value_enum)]
    pub format: Option<LmFormat>,
    #[arg(long, default_value_t = qscan_core::lm::DEFAULT_ORDER)]
    pub order: usize,
    #[arg(long, default_value_t = qscan_core::lm::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct LmSampleArgs {
    #[arg(long)]
    pub lm: PathBuf,
    /// Number of documents to generate.
    #[arg(long)]
    pub n_docs: usize,
    /// Tokens per document.
    #[arg(long)]
    pub length: usize,
    /// Top-k truncation (the default strategy, k = 40).
    #[arg(long, conflicts_with = "top_p")]
    pub top_k: Option<usize>,
    /// Nucleus truncation.
    #[arg(long)]
    pub top_p: Option<f64>,
    /// Document i is drawn from stream i of this seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Text every document continues from; not included in the output.
    #[arg(long)]
    pub prompt: Option<String>,
    #[arg(long, default_value = "sample")]
    pub id_prefix: String,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct TrainGltrArgs {
    #[arg(long)]
    pub lm: PathBuf,
    /// Human-written training corpus.
    #[arg(long)]
    pub human: PathBuf,
    /// Machine-written training corpus.
    #[arg(long)]
    pub machine: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub read: ReadOpts,
    /// Upper rank bounds of all but the last bucket; the last ends at |V|.
    #[arg(long, action = ArgAction::Set, value_delimiter = ',', default_value = "10,100,1000")]
    pub bucket_bounds: Vec<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub optim: OptimOpts,
    #[arg(long, default_value = "gltr")]
    pub detector_id: String,
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct TrainSpamArgs {
    /// Not-spam training corpus.
    #[arg(long)]
    pub ham: PathBuf,
    /// Spam training corpus.
    #[arg(long)]
    pub spam: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub read: ReadOpts,
    #[arg(long, default_value_t = qscan_core::detect::DEFAULT_VOCAB_SIZE)]
    pub vocab_size: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub optim: OptimOpts,
    #[arg(long, default_value = "spam")]
    pub detector_id: String,
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct ScoreArgs {
    /// Detector file written by `train`.
    #[arg(long)]
    pub detector: PathBuf,
    /// Language model, required by GLTR detectors.
    #[arg(long)]
    pub lm: Option<PathBuf>,
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub read: ReadOpts,
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct BootstrapOpts {
    #[arg(long, default_value_t = 10_000)]
    pub resamples: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct EvalSheetArgs {
    #[arg(long)]
    pub scores: PathBuf,
    /// Buckets as `name:lo:hi` percentile ranges.
    #[arg(long, action = ArgAction::Set, value_delimiter = ',', default_value = "bottom:0:0.5,middle:50:50.5,top:99.5:100")]
    pub buckets: Vec<String>,
    #[arg(long, default_value_t = qscan_core::evalproto::DEFAULT_PER_BUCKET)]
    pub per_bucket: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sheet with the bucket column, kept by the evaluator.
    #[arg(long)]
    pub out: PathBuf,
    /// Rater-facing sheet without buckets.
    #[arg(long)]
    pub blind_out: Option<PathBuf>,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct EvalLqArgs {
    /// `doc_id,rater_id,rating` table.
    #[arg(long)]
    pub ratings: PathBuf,
    /// Sheet written by `eval sheet`.
    #[arg(long, required_unless_present = "scores")]
    pub sheet: Option<PathBuf>,
    /// Score table; rated documents are placed in buckets recomputed from it.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[arg(long, action = ArgAction::Set, value_delimiter = ',', default_value = "bottom:0:0.5,middle:50:50.5,top:99.5:100")]
    pub buckets: Vec<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub bootstrap: BootstrapOpts,
    /// Report path; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct EvalAccuracyArgs {
    #[arg(long)]
    pub scores: PathBuf,
    /// `doc_id,label` table with labels 0 or 1.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A scored corpus for the analyses.
#[derive(Args, Serialize, Debug, Clone)]
pub struct ScoredInput {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub read: ReadOpts,
    /// Score table joined to the corpus by document id.
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct TemporalArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: ScoredInput,
    #[arg(long, action = ArgAction::Set, value_delimiter = ',', default_value = "0.5,0.8,0.9,0.95,0.99,0.999")]
    pub thresholds: Vec<f64>,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct LengthArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: ScoredInput,
    /// Score ranges as `lo:hi`.
    #[arg(long, action = ArgAction::Set, value_delimiter = ',', default_value = "0:0.5,0.5:0.8,0.8:0.9,0.9:0.99,0.99:1")]
    pub ranges: Vec<String>,
    /// Lower edges of the length bins; the last bin is open-ended.
    #[arg(long, action = ArgAction::Set, value_delimiter = ',')]
    pub bins: Option<Vec<u64>>,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct TopicArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: ScoredInput,
    #[arg(long, default_value_t = qscan_core::analytics::DEFAULT_HIST_BINS)]
    pub bins: usize,
    /// Topics to report; every observed topic when omitted.
    #[arg(long, action = ArgAction::Set, value_delimiter = ',')]
    pub topics: Option<Vec<String>>,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct TermsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: ScoredInput,
    #[arg(long, action = ArgAction::Set, value_delimiter = ',', default_value = "0.01:0.1,0.1:0.2,0.5:0.6,0.6:0.7,0.99:1,0.999:1")]
    pub ranges: Vec<String>,
    #[arg(long, default_value_t = qscan_core::analytics::DEFAULT_TOP_TERMS)]
    pub top_n: usize,
    /// One stopword per line; the bundled English list when omitted.
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct DomainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: ScoredInput,
    /// Domains of interest.
    #[arg(long, action = ArgAction::Set, value_delimiter = ',', required_unless_present = "domains_file")]
    pub domains: Option<Vec<String>>,
    /// File with one domain per line.
    #[arg(long)]
    pub domains_file: Option<PathBuf>,
    #[arg(long, default_value_t = qscan_core::analytics::DEFAULT_HIST_BINS)]
    pub bins: usize,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct PercentilesArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub read: ReadOpts,
    /// Percentiles in [0, 100]; every integer from 1 to 100 when omitted.
    #[arg(long, action = ArgAction::Set, value_delimiter = ',')]
    pub percentiles: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    #[arg(long)]
    pub out: PathBuf,
}
