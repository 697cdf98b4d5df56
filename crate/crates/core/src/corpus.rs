//! Document model, streaming ingestion and corpus length statistics.
//!
//! Two on-disk corpus layouts are supported:
//!
//! - **JSONL**: one object per line with fields `id`, `text`, `timestamp`
//!   (ISO-8601 date or date-time), `topic`, `domain` and `nsfw`. Only `text`
//!   is required. An optional `full_char_length` carries the length of an
//!   already-truncated text's original.
//! - **text-dir**: every regular file below a directory is one document whose
//!   id is its relative path. Files are visited in sorted path order.
//!
//! Lengths are counted in Unicode scalar values, never bytes.

use std::borrow::Borrow;
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default truncation limit in characters.
pub const DEFAULT_TRUNCATE_AT: usize = 10_000;

/// One document with its metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    /// Character count of the text before truncation.
    pub full_char_length: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nsfw: Option<bool>,
}

impl Document {
    /// Builds an untruncated document with no metadata.
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        Document {
            id: id.into(),
            full_char_length: text.chars().count() as u64,
            text,
            timestamp: None,
            topic: None,
            domain: None,
            nsfw: None,
        }
    }

    pub fn is_nsfw(&self) -> bool {
        self.nsfw == Some(true)
    }
}

/// A detector's probability that a document is machine-written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDocument {
    pub doc_id: String,
    pub detector_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusFormat {
    Jsonl,
    TextDir,
}

/// What to do with a record that fails to parse.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorPolicy {
    /// Drop the record and count it.
    #[default]
    Skip,
    /// Surface the error and stop the stream.
    Abort,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestOptions {
    pub truncate_at: usize,
    /// Documents whose untruncated length is below this are dropped.
    pub min_chars: u64,
    pub on_error: ErrorPolicy,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            truncate_at: DEFAULT_TRUNCATE_AT,
            min_chars: 0,
            on_error: ErrorPolicy::Skip,
        }
    }
}

/// Counters reported by an ingestion pass.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub records: u64,
    pub emitted: u64,
    pub filtered_short: u64,
    pub skipped_malformed: u64,
    /// Message of the first malformed record, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_error: Option<String>,
}

impl IngestStats {
    pub fn merge(&mut self, other: &IngestStats) {
        self.records += other.records;
        self.emitted += other.emitted;
        self.filtered_short += other.filtered_short;
        self.skipped_malformed += other.skipped_malformed;
        if self.first_error.is_none() {
            self.first_error.clone_from(&other.first_error);
        }
    }

    /// Folds one parse outcome into the counters. Returns the document to
    /// emit, or the error when the policy is [`ErrorPolicy::Abort`].
    pub fn observe(&mut self, outcome: Result<Option<Document>>, policy: ErrorPolicy) -> Result<Option<Document>> {
        self.records += 1;
        match outcome {
            Ok(Some(doc)) => {
                self.emitted += 1;
                Ok(Some(doc))
            }
            Ok(None) => {
                self.filtered_short += 1;
                Ok(None)
            }
            Err(e) => {
                self.skipped_malformed += 1;
                if self.first_error.is_none() {
                    self.first_error = Some(e.to_string());
                }
                match policy {
                    ErrorPolicy::Skip => Ok(None),
                    ErrorPolicy::Abort => Err(e),
                }
            }
        }
    }
}

/// Returns the first `max_chars` Unicode scalar values of `text`.
pub fn truncate_text(text: &str, max_chars: usize) -> &str {
    match text.char_indices().nth(max_chars) {
        Some((byte_idx, _)) => &text[..byte_idx],
        None => text,
    }
}

fn truncate_in_place(text: &mut String, max_chars: usize) {
    if let Some((byte_idx, _)) = text.char_indices().nth(max_chars) {
        text.truncate(byte_idx);
    }
}

/// Parses `YYYY-MM-DD`, an RFC 3339 date-time (converted to its UTC date) or
/// a naive `YYYY-MM-DDTHH:MM:SS` date-time.
pub fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Some(d);
    }
    if let Ok(dt) = chrono::DateTime::parse_from_rfc3339(s) {
        return Some(dt.with_timezone(&chrono::Utc).date_naive());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(dt) = chrono::NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.date());
        }
    }
    None
}

#[derive(Deserialize)]
struct JsonRecord {
    #[serde(default)]
    id: Option<serde_json::Value>,
    text: String,
    #[serde(default)]
    full_char_length: Option<u64>,
    #[serde(default)]
    timestamp: Option<String>,
    #[serde(default)]
    topic: Option<String>,
    #[serde(default)]
    domain: Option<String>,
    #[serde(default)]
    nsfw: Option<bool>,
}

/// One unparsed record: a JSONL line or a whole file of a text-dir corpus.
///
/// Splitting reading from parsing lets callers parse and score records on a
/// worker pool while the reader stays sequential.
#[derive(Debug, Clone)]
pub struct RawRecord {
    /// 1-based line number (JSONL) or file index (text-dir).
    pub ordinal: u64,
    pub payload: RawPayload,
}

#[derive(Debug, Clone)]
pub enum RawPayload {
    JsonLine(Vec<u8>),
    File { id: String, bytes: Vec<u8> },
}

impl RawRecord {
    pub fn len_bytes(&self) -> usize {
        match &self.payload {
            RawPayload::JsonLine(b) => b.len(),
            RawPayload::File { bytes, .. } => bytes.len(),
        }
    }

    /// Parses the record. `Ok(None)` means the record was filtered by
    /// `min_chars`.
    pub fn parse(&self, source_name: &str, opts: &IngestOptions) -> Result<Option<Document>> {
        let mut doc = match &self.payload {
            RawPayload::JsonLine(bytes) => self.parse_json(bytes, source_name)?,
            RawPayload::File { id, bytes } => Document::new(id.clone(), String::from_utf8_lossy(bytes)),
        };
        if doc.full_char_length < opts.min_chars {
            return Ok(None);
        }
        truncate_in_place(&mut doc.text, opts.truncate_at);
        Ok(Some(doc))
    }

    fn parse_json(&self, bytes: &[u8], source_name: &str) -> Result<Document> {
        let line = self.ordinal;
        let err = |msg: String| Error::record(source_name, line, msg);
        let rec: JsonRecord = serde_json::from_slice(bytes).map_err(|e| err(e.to_string()))?;
        let id = match rec.id {
            None | Some(serde_json::Value::Null) => format!("line-{line}"),
            Some(serde_json::Value::String(s)) => s,
            Some(serde_json::Value::Number(n)) => n.to_string(),
            Some(other) => return Err(err(format!("id must be a string, got {other}"))),
        };
        if id.is_empty() {
            return Err(err("empty id".into()));
        }
        let timestamp = match rec.timestamp.as_deref() {
            None | Some("") => None,
            Some(s) => Some(parse_date(s).ok_or_else(|| err(format!("unparseable timestamp {s:?}")))?),
        };
        let chars = rec.text.chars().count() as u64;
        let full_char_length = match rec.full_char_length {
            None => chars,
            Some(n) if n >= chars => n,
            Some(n) => {
                return Err(err(format!(
                    "full_char_length {n} is shorter than the text ({chars} chars)"
                )))
            }
        };
        Ok(Document {
            id,
            text: rec.text,
            full_char_length,
            timestamp,
            topic: rec.topic,
            domain: rec.domain,
            nsfw: rec.nsfw,
        })
    }
}

/// Sequential reader of raw records. Memory use is bounded by the largest
/// single record.
pub struct RawRecords {
    inner: RawInner,
}

enum RawInner {
    Jsonl {
        reader: Box<dyn BufRead + Send>,
        line: u64,
    },
    TextDir {
        root: PathBuf,
        files: std::vec::IntoIter<PathBuf>,
        index: u64,
    },
}

impl RawRecords {
    pub fn open(path: &Path, format: CorpusFormat) -> Result<Self> {
        match format {
            CorpusFormat::Jsonl => {
                let f = File::open(path).map_err(|e| Error::io(path, e))?;
                Ok(Self::from_jsonl_reader(BufReader::with_capacity(1 << 20, f)))
            }
            CorpusFormat::TextDir => {
                if !path.is_dir() {
                    return Err(Error::io(
                        path,
                        std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
                    ));
                }
                let mut files = Vec::new();
                for entry in walkdir::WalkDir::new(path).sort_by_file_name() {
                    let entry = entry.map_err(|e| {
                        let p = e.path().unwrap_or(path).to_path_buf();
                        Error::io(p, e.into())
                    })?;
                    if entry.file_type().is_file() {
                        files.push(entry.into_path());
                    }
                }
                Ok(RawRecords {
                    inner: RawInner::TextDir {
                        root: path.to_path_buf(),
                        files: files.into_iter(),
                        index: 0,
                    },
                })
            }
        }
    }

    pub fn from_jsonl_reader(reader: impl BufRead + Send + 'static) -> Self {
        RawRecords {
            inner: RawInner::Jsonl {
                reader: Box::new(reader),
                line: 0,
            },
        }
    }
}

impl Iterator for RawRecords {
    type Item = Result<RawRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        match &mut self.inner {
            RawInner::Jsonl { reader, line } => loop {
                let mut buf = Vec::new();
                match reader.read_until(b'\n', &mut buf) {
                    Ok(0) => return None,
                    Ok(_) => {
                        *line += 1;
                        while matches!(buf.last(), Some(b'\n' | b'\r')) {
                            buf.pop();
                        }
                        if buf.iter().all(u8::is_ascii_whitespace) {
                            continue;
                        }
                        return Some(Ok(RawRecord {
                            ordinal: *line,
                            payload: RawPayload::JsonLine(buf),
                        }));
                    }
                    Err(e) => return Some(Err(Error::io(format!("<line {}>", *line + 1), e))),
                }
            },
            RawInner::TextDir { root, files, index } => {
                let path = files.next()?;
                *index += 1;
                let mut bytes = Vec::new();
                if let Err(e) = File::open(&path).and_then(|mut f| f.read_to_end(&mut bytes)) {
                    return Some(Err(Error::io(path, e)));
                }
                let rel = path.strip_prefix(root.as_path()).unwrap_or(&path);
                let id = rel
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy())
                    .collect::<Vec<_>>()
                    .join("/");
                Some(Ok(RawRecord {
                    ordinal: *index,
                    payload: RawPayload::File { id, bytes },
                }))
            }
        }
    }
}

/// Streaming document reader produced by [`ingest`].
pub struct Ingest {
    raw: RawRecords,
    source_name: String,
    options: IngestOptions,
    stats: IngestStats,
    done: bool,
}

impl Ingest {
    pub fn stats(&self) -> &IngestStats {
        &self.stats
    }
}

impl Iterator for Ingest {
    type Item = Result<Document>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        loop {
            let raw = match self.raw.next()? {
                Ok(r) => r,
                Err(e) => {
                    self.done = true;
                    return Some(Err(e));
                }
            };
            let parsed = raw.parse(&self.source_name, &self.options);
            match self.stats.observe(parsed, self.options.on_error) {
                Ok(Some(doc)) => return Some(Ok(doc)),
                Ok(None) => continue,
                Err(e) => {
                    self.done = true;
                    return Some(Err(e));
                }
            }
        }
    }
}

/// Opens a corpus and yields its documents in source order, truncated to
/// `options.truncate_at` characters.
pub fn ingest(path: &Path, format: CorpusFormat, options: IngestOptions) -> Result<Ingest> {
    Ok(Ingest {
        raw: RawRecords::open(path, format)?,
        source_name: path.display().to_string(),
        options,
        stats: IngestStats::default(),
        done: false,
    })
}

/// [`ingest`] over an already-open JSONL stream.
pub fn ingest_jsonl_reader(
    reader: impl BufRead + Send + 'static,
    source_name: impl Into<String>,
    options: IngestOptions,
) -> Ingest {
    Ingest {
        raw: RawRecords::from_jsonl_reader(reader),
        source_name: source_name.into(),
        options,
        stats: IngestStats::default(),
        done: false,
    }
}

/// Histogram of untruncated document lengths; the aggregate behind
/// [`char_percentiles`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LengthHistogram {
    counts: BTreeMap<u64, u64>,
    total: u64,
}

impl LengthHistogram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn accumulate(&mut self, full_char_length: u64) {
        *self.counts.entry(full_char_length).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn merge(&mut self, other: &LengthHistogram) {
        for (&len, &n) in &other.counts {
            *self.counts.entry(len).or_insert(0) += n;
        }
        self.total += other.total;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// For each percentile `p`, the smallest observed length `L` such that at
    /// least `p`% of documents have length `<= L`.
    pub fn percentiles(&self, percentiles: &[f64]) -> Result<Vec<(f64, u64)>> {
        if self.total == 0 {
            return Err(Error::EmptyInput("no documents for percentiles".into()));
        }
        percentiles
            .iter()
            .map(|&p| {
                if !(0.0..=100.0).contains(&p) {
                    return Err(Error::InvalidArgument(format!("percentile {p} outside [0, 100]")));
                }
                // Count needed, with slack so that e.g. 99.9% of 1000 is 999
                // and not 1000 after binary rounding of 99.9.
                let needed = ((p * self.total as f64) / 100.0 - 1e-9).ceil().max(1.0) as u64;
                let mut seen = 0;
                for (&len, &n) in &self.counts {
                    seen += n;
                    if seen >= needed {
                        return Ok((p, len));
                    }
                }
                unreachable!("needed <= total")
            })
            .collect()
    }
}

/// Length percentiles of a document stream (untruncated lengths).
pub fn char_percentiles<I>(docs: I, percentiles: &[f64]) -> Result<Vec<(f64, u64)>>
where
    I: IntoIterator,
    I::Item: Borrow<Document>,
{
    let mut hist = LengthHistogram::new();
    for d in docs {
        hist.accumulate(d.borrow().full_char_length);
    }
    hist.percentiles(percentiles)
}

/// Column header of the score table CSV.
pub const SCORE_TABLE_HEADER: [&str; 3] = ["doc_id", "detector_id", "score"];

/// Writes scored documents as `doc_id,detector_id,score` CSV.
pub struct ScoreTableWriter<W: std::io::Write> {
    inner: csv::Writer<W>,
}

impl<W: std::io::Write> ScoreTableWriter<W> {
    pub fn new(writer: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(writer);
        inner.write_record(SCORE_TABLE_HEADER).map_err(csv_err)?;
        Ok(ScoreTableWriter { inner })
    }

    pub fn write(&mut self, row: &ScoredDocument) -> Result<()> {
        let score = row.score.to_string();
        self.inner
            .write_record([row.doc_id.as_str(), row.detector_id.as_str(), score.as_str()])
            .map_err(csv_err)
    }

    pub fn finish(self) -> Result<W> {
        self.inner
            .into_inner()
            .map_err(|e| Error::io("<score table>", std::io::Error::other(e.to_string())))
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io("<csv>", io),
        other => Error::record("<csv>", line, format!("{other:?}")),
    }
}

/// Reads a score table, validating the header and each row. Scores must lie
/// in `[0, 1]`.
pub fn read_score_table(reader: impl Read, source_name: &str) -> Result<Vec<ScoredDocument>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.iter().collect::<Vec<_>>() != SCORE_TABLE_HEADER {
        return Err(Error::record(
            source_name,
            1,
            format!(
                "expected header doc_id,detector_id,score, got {}",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::record(source_name, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != 3 {
            return Err(Error::record(
                source_name,
                line,
                format!("expected 3 fields, got {}", rec.len()),
            ));
        }
        let score: f64 = rec[2]
            .trim()
            .parse()
            .map_err(|_| Error::record(source_name, line, format!("score {:?} is not a number", &rec[2])))?;
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::record(
                source_name,
                line,
                format!("score {score} outside [0, 1]"),
            ));
        }
        if rec[0].is_empty() {
            return Err(Error::record(source_name, line, "empty doc_id"));
        }
        out.push(ScoredDocument {
            doc_id: rec[0].to_owned(),
            detector_id: rec[1].to_owned(),
            score,
        });
    }
    Ok(out)
}
