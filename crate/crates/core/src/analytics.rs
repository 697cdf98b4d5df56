//! Corpus-scale breakdowns of detector scores.
//!
//! Every aggregator follows the same shape: `new`, `accumulate` one scored
//! document, `merge` a partial aggregate (commutative and associative, so
//! shards can be combined in any grouping), and `finalize` into a table.
//! All counts are integers; fractions are computed only at finalize time.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::Write;

use chrono::Datelike;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::corpus::{csv_err, Document};
use crate::error::{Error, Result};
use crate::text::word_tokens;

pub const DEFAULT_THRESHOLDS: [f64; 6] = [0.5, 0.8, 0.9, 0.95, 0.99, 0.999];
pub const DEFAULT_HIST_BINS: usize = 20;
pub const DEFAULT_TOP_TERMS: usize = 50;

const STOPWORDS_EN: &str = include_str!("../data/stopwords_en.txt");

/// Score interval `[lo, hi)`; an interval ending at 1.0 also contains 1.0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreRange {
    pub lo: f64,
    pub hi: f64,
}

impl ScoreRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "score range [{lo}, {hi}) must satisfy 0 <= lo < hi <= 1"
            )));
        }
        Ok(ScoreRange { lo, hi })
    }

    pub fn contains(&self, score: f64) -> bool {
        score >= self.lo && (score < self.hi || (self.hi == 1.0 && score == 1.0))
    }

    /// Parses `lo:hi`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("score range {s:?} is not lo:hi"));
        let (a, b) = s.split_once(':').ok_or_else(bad)?;
        ScoreRange::new(
            a.trim().parse().map_err(|_| bad())?,
            b.trim().parse().map_err(|_| bad())?,
        )
    }
}

/// Score ranges of the length breakdown.
pub fn default_score_ranges() -> Vec<ScoreRange> {
    [(0.0, 0.5), (0.5, 0.8), (0.8, 0.9), (0.9, 0.99), (0.99, 1.0)]
        .iter()
        .map(|&(lo, hi)| ScoreRange { lo, hi })
        .collect()
}

/// Score ranges of the frequent-terms breakdown.
pub fn default_term_ranges() -> Vec<ScoreRange> {
    [
        (0.01, 0.1),
        (0.1, 0.2),
        (0.5, 0.6),
        (0.6, 0.7),
        (0.99, 1.0),
        (0.999, 1.0),
    ]
    .iter()
    .map(|&(lo, hi)| ScoreRange { lo, hi })
    .collect()
}

/// 500-character steps up to 10,000; the last bin is `[10000, inf)`.
pub fn default_length_bins() -> Vec<u64> {
    (0..=20).map(|i| i * 500).collect()
}

pub fn validate_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.is_empty() {
        return Err(Error::InvalidArgument("no thresholds".into()));
    }
    if thresholds.iter().any(|&t| !(t > 0.0 && t < 1.0)) || thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(format!(
            "thresholds must lie in (0, 1) and ascend strictly: {thresholds:?}"
        )));
    }
    Ok(())
}

fn hist_bin(score: f64, n_bins: usize) -> usize {
    ((score * n_bins as f64) as usize).min(n_bins - 1)
}

fn check_bins(n_bins: usize) -> Result<()> {
    if n_bins == 0 {
        return Err(Error::InvalidArgument("histograms need at least one bin".into()));
    }
    Ok(())
}

fn finish_csv<W: Write>(w: csv::Writer<W>) -> Result<()> {
    w.into_inner()
        .map_err(|e| Error::io("<csv>", e.into_error()))?
        .flush()
        .map_err(|e| Error::io("<csv>", e))
}

// ---------------------------------------------------------------- temporal

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalAggregator {
    thresholds: Vec<f64>,
    /// (year, month) -> (documents, documents above each threshold)
    months: BTreeMap<(i32, u32), (u64, Vec<u64>)>,
    missing_timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalRow {
    pub month: String,
    pub threshold: f64,
    pub fraction: f64,
    pub n_month: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalTable {
    pub rows: Vec<TemporalRow>,
    pub skipped_no_timestamp: u64,
}

impl TemporalAggregator {
    pub fn new(thresholds: &[f64]) -> Result<Self> {
        validate_thresholds(thresholds)?;
        Ok(TemporalAggregator {
            thresholds: thresholds.to_vec(),
            months: BTreeMap::new(),
            missing_timestamp: 0,
        })
    }

    pub fn accumulate(&mut self, doc: &Document, score: f64) {
        let Some(date) = doc.timestamp else {
            self.missing_timestamp += 1;
            return;
        };
        let k = self.thresholds.len();
        let entry = self
            .months
            .entry((date.year(), date.month()))
            .or_insert_with(|| (0, vec![0; k]));
        entry.0 += 1;
        for (c, &t) in entry.1.iter_mut().zip(&self.thresholds) {
            *c += u64::from(score > t);
        }
    }

    pub fn merge(&mut self, other: &TemporalAggregator) {
        assert_eq!(
            self.thresholds, other.thresholds,
            "merging aggregators with different thresholds"
        );
        for (m, (n, above)) in &other.months {
            let e = self.months.entry(*m).or_insert_with(|| (0, vec![0; above.len()]));
            e.0 += n;
            for (a, b) in e.1.iter_mut().zip(above) {
                *a += b;
            }
        }
        self.missing_timestamp += other.missing_timestamp;
    }

    pub fn finalize(&self) -> TemporalTable {
        let mut rows = Vec::new();
        for (&(y, m), (n, above)) in &self.months {
            for (&t, &a) in self.thresholds.iter().zip(above) {
                rows.push(TemporalRow {
                    month: format!("{y:04}-{m:02}"),
                    threshold: t,
                    fraction: a as f64 / *n as f64,
                    n_month: *n,
                });
            }
        }
        TemporalTable {
            rows,
            skipped_no_timestamp: self.missing_timestamp,
        }
    }
}

/// Per-month fraction of documents scoring above each threshold.
pub fn temporal_fractions<'a, I>(scored: I, thresholds: &[f64]) -> Result<TemporalTable>
where
    I: IntoIterator<Item = (&'a Document, f64)>,
{
    let mut agg = TemporalAggregator::new(thresholds)?;
    for (d, s) in scored {
        agg.accumulate(d, s);
    }
    Ok(agg.finalize())
}

impl TemporalTable {
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["month", "threshold", "fraction", "n_month"])
            .map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                r.month.clone(),
                r.threshold.to_string(),
                r.fraction.to_string(),
                r.n_month.to_string(),
            ])
            .map_err(csv_err)?;
        }
        finish_csv(w)
    }
}

// ------------------------------------------------------------------ length

#[derive(Debug, Clone, PartialEq)]
pub struct LengthAggregator {
    bins: Vec<u64>,
    ranges: Vec<ScoreRange>,
    /// bin index -> (documents, documents per range)
    counts: BTreeMap<usize, (u64, Vec<u64>)>,
    below_first_bin: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthRow {
    pub bin_lo: u64,
    /// `None` for the open last bin.
    pub bin_hi: Option<u64>,
    pub range_lo: f64,
    pub range_hi: f64,
    pub fraction: f64,
    pub n_bin: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthTable {
    pub rows: Vec<LengthRow>,
    pub skipped_below_first_bin: u64,
}

impl LengthAggregator {
    /// `bins` are ascending lower boundaries; bin `i` is
    /// `[bins[i], bins[i + 1])` and the last bin is unbounded.
    pub fn new(bins: &[u64], ranges: &[ScoreRange]) -> Result<Self> {
        if bins.is_empty() || bins.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(format!(
                "length bins must ascend strictly: {bins:?}"
            )));
        }
        if ranges.is_empty() {
            return Err(Error::InvalidArgument("no score ranges".into()));
        }
        Ok(LengthAggregator {
            bins: bins.to_vec(),
            ranges: ranges.to_vec(),
            counts: BTreeMap::new(),
            below_first_bin: 0,
        })
    }

    pub fn accumulate(&mut self, doc: &Document, score: f64) {
        let len = doc.full_char_length;
        let idx = self.bins.partition_point(|&b| b <= len);
        if idx == 0 {
            self.below_first_bin += 1;
            return;
        }
        let k = self.ranges.len();
        let e = self.counts.entry(idx - 1).or_insert_with(|| (0, vec![0; k]));
        e.0 += 1;
        for (c, r) in e.1.iter_mut().zip(&self.ranges) {
            *c += u64::from(r.contains(score));
        }
    }

    pub fn merge(&mut self, other: &LengthAggregator) {
        assert_eq!(self.bins, other.bins, "merging aggregators with different bins");
        for (b, (n, per)) in &other.counts {
            let e = self.counts.entry(*b).or_insert_with(|| (0, vec![0; per.len()]));
            e.0 += n;
            for (x, y) in e.1.iter_mut().zip(per) {
                *x += y;
            }
        }
        self.below_first_bin += other.below_first_bin;
    }

    pub fn finalize(&self) -> LengthTable {
        let mut rows = Vec::new();
        for (&b, (n, per)) in &self.counts {
            for (r, &c) in self.ranges.iter().zip(per) {
                rows.push(LengthRow {
                    bin_lo: self.bins[b],
                    bin_hi: self.bins.get(b + 1).copied(),
                    range_lo: r.lo,
                    range_hi: r.hi,
                    fraction: c as f64 / *n as f64,
                    n_bin: *n,
                });
            }
        }
        LengthTable {
            rows,
            skipped_below_first_bin: self.below_first_bin,
        }
    }
}

/// Fraction of each length bin's documents falling in each score range.
pub fn length_fractions<'a, I>(scored: I, ranges: &[ScoreRange], bins: &[u64]) -> Result<LengthTable>
where
    I: IntoIterator<Item = (&'a Document, f64)>,
{
    let mut agg = LengthAggregator::new(bins, ranges)?;
    for (d, s) in scored {
        agg.accumulate(d, s);
    }
    Ok(agg.finalize())
}

impl LengthTable {
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["bin_lo", "bin_hi", "range_lo", "range_hi", "fraction", "n_bin"])
            .map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                r.bin_lo.to_string(),
                r.bin_hi.map(|h| h.to_string()).unwrap_or_else(|| "inf".into()),
                r.range_lo.to_string(),
                r.range_hi.to_string(),
                r.fraction.to_string(),
                r.n_bin.to_string(),
            ])
            .map_err(csv_err)?;
        }
        finish_csv(w)
    }

    /// Lower boundary of the bin where the fraction for `range` peaks.
    pub fn peak_bin(&self, range: ScoreRange) -> Option<u64> {
        self.rows
            .iter()
            .filter(|r| r.range_lo == range.lo && r.range_hi == range.hi)
            .fold(None, |best: Option<&LengthRow>, r| match best {
                Some(b) if b.fraction >= r.fraction => Some(b),
                _ => Some(r),
            })
            .map(|r| r.bin_lo)
    }
}

// --------------------------------------------------------------- histograms

/// Equal-width histogram of scores over `[0, 1]`; a score of 1.0 falls in
/// the last bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreHistogram {
    pub counts: Vec<u64>,
    pub total: u64,
    /// `counts / total`; empty when `total` is 0.
    pub fractions: Vec<f64>,
}

impl ScoreHistogram {
    fn from_counts(counts: Vec<u64>) -> Self {
        let total: u64 = counts.iter().sum();
        let fractions = if total == 0 {
            Vec::new()
        } else {
            counts.iter().map(|&c| c as f64 / total as f64).collect()
        };
        ScoreHistogram {
            counts,
            total,
            fractions,
        }
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }
}

fn write_histogram_rows<W: Write>(w: &mut csv::Writer<W>, label: &str, h: &ScoreHistogram) -> Result<()> {
    let n = h.n_bins();
    for (i, &c) in h.counts.iter().enumerate() {
        let frac = h.fractions.get(i).copied().unwrap_or(0.0);
        w.write_record([
            label.to_owned(),
            (i as f64 / n as f64).to_string(),
            ((i + 1) as f64 / n as f64).to_string(),
            c.to_string(),
            frac.to_string(),
        ])
        .map_err(csv_err)?;
    }
    Ok(())
}

// ------------------------------------------------------------------- topic

#[derive(Debug, Clone, PartialEq)]
pub struct TopicAggregator {
    n_bins: usize,
    topics: BTreeMap<String, Vec<u64>>,
    missing_topic: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicHistograms {
    pub histograms: BTreeMap<String, ScoreHistogram>,
    pub skipped_no_topic: u64,
}

impl TopicAggregator {
    pub fn new(n_bins: usize) -> Result<Self> {
        check_bins(n_bins)?;
        Ok(TopicAggregator {
            n_bins,
            topics: BTreeMap::new(),
            missing_topic: 0,
        })
    }

    pub fn accumulate(&mut self, doc: &Document, score: f64) {
        let Some(topic) = &doc.topic else {
            self.missing_topic += 1;
            return;
        };
        let n = self.n_bins;
        let counts = match self.topics.get_mut(topic) {
            Some(c) => c,
            None => self.topics.entry(topic.clone()).or_insert_with(|| vec![0; n]),
        };
        counts[hist_bin(score, n)] += 1;
    }

    pub fn merge(&mut self, other: &TopicAggregator) {
        assert_eq!(self.n_bins, other.n_bins, "merging aggregators with different bins");
        for (t, counts) in &other.topics {
            let e = self.topics.entry(t.clone()).or_insert_with(|| vec![0; counts.len()]);
            for (a, b) in e.iter_mut().zip(counts) {
                *a += b;
            }
        }
        self.missing_topic += other.missing_topic;
    }

    /// Histograms for `topics`, or for every topic seen when `None`. A
    /// requested topic without documents is an error.
    pub fn finalize(&self, topics: Option<&[String]>) -> Result<TopicHistograms> {
        let mut histograms = BTreeMap::new();
        match topics {
            Some(wanted) => {
                for t in wanted {
                    let counts = self
                        .topics
                        .get(t)
                        .ok_or_else(|| Error::EmptyInput(format!("topic {t:?} has no documents")))?;
                    histograms.insert(t.clone(), ScoreHistogram::from_counts(counts.clone()));
                }
            }
            None => {
                for (t, counts) in &self.topics {
                    histograms.insert(t.clone(), ScoreHistogram::from_counts(counts.clone()));
                }
            }
        }
        Ok(TopicHistograms {
            histograms,
            skipped_no_topic: self.missing_topic,
        })
    }
}

/// Relative score histogram of one topic.
pub fn topic_score_histogram<'a, I>(scored: I, topic: &str, n_bins: usize) -> Result<ScoreHistogram>
where
    I: IntoIterator<Item = (&'a Document, f64)>,
{
    let mut agg = TopicAggregator::new(n_bins)?;
    for (d, s) in scored {
        if d.topic.as_deref() == Some(topic) {
            agg.accumulate(d, s);
        }
    }
    let mut h = agg.finalize(Some(&[topic.to_owned()]))?;
    Ok(h.histograms.remove(topic).expect("requested topic present"))
}

impl TopicHistograms {
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["topic", "bin_lo", "bin_hi", "count", "fraction"])
            .map_err(csv_err)?;
        for (t, h) in &self.histograms {
            write_histogram_rows(&mut w, t, h)?;
        }
        finish_csv(w)
    }
}

// ------------------------------------------------------------------- terms

/// Loads the bundled English stopword list.
pub fn default_stopwords() -> HashSet<String> {
    parse_stopwords(STOPWORDS_EN)
}

/// One stopword per line; `#` starts a comment line.
pub fn parse_stopwords(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermsAggregator<'s> {
    range: ScoreRange,
    stopwords: &'s HashSet<String>,
    df: FxHashMap<String, u64>,
    docs: u64,
    nsfw_dropped: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermCounts {
    pub range: ScoreRange,
    /// Sorted by count descending, then term ascending.
    pub entries: Vec<(String, u64)>,
    pub total_docs: u64,
    pub nsfw_filtered: bool,
    pub nsfw_dropped: u64,
}

impl<'s> TermsAggregator<'s> {
    pub fn new(range: ScoreRange, stopwords: &'s HashSet<String>) -> Self {
        TermsAggregator {
            range,
            stopwords,
            df: FxHashMap::default(),
            docs: 0,
            nsfw_dropped: 0,
        }
    }

    /// NSFW documents are dropped for ranges starting at 0.5 or above.
    pub fn filters_nsfw(&self) -> bool {
        self.range.lo >= 0.5
    }

    pub fn accumulate(&mut self, doc: &Document, score: f64) {
        if !self.range.contains(score) {
            return;
        }
        if self.filters_nsfw() && doc.is_nsfw() {
            self.nsfw_dropped += 1;
            return;
        }
        self.docs += 1;
        let mut seen: FxHashSet<String> = FxHashSet::default();
        for tok in word_tokens(&doc.text) {
            if !self.stopwords.contains(&tok) && !seen.contains(&tok) {
                *self.df.entry(tok.clone()).or_insert(0) += 1;
                seen.insert(tok);
            }
        }
    }

    pub fn merge(&mut self, other: &TermsAggregator<'_>) {
        assert_eq!(self.range, other.range, "merging aggregators with different ranges");
        for (t, &c) in &other.df {
            *self.df.entry(t.clone()).or_insert(0) += c;
        }
        self.docs += other.docs;
        self.nsfw_dropped += other.nsfw_dropped;
    }

    pub fn finalize(&self, top_n: usize) -> TermCounts {
        let mut entries: Vec<(String, u64)> = self.df.iter().map(|(t, &c)| (t.clone(), c)).collect();
        entries.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        entries.truncate(top_n);
        TermCounts {
            range: self.range,
            entries,
            total_docs: self.docs,
            nsfw_filtered: self.filters_nsfw(),
            nsfw_dropped: self.nsfw_dropped,
        }
    }
}

/// Document frequencies of non-stopword terms among documents whose score
/// lies in `range`.
pub fn frequent_terms<'a, I>(scored: I, range: ScoreRange, top_n: usize, stopwords: &HashSet<String>) -> TermCounts
where
    I: IntoIterator<Item = (&'a Document, f64)>,
{
    let mut agg = TermsAggregator::new(range, stopwords);
    for (d, s) in scored {
        agg.accumulate(d, s);
    }
    agg.finalize(top_n)
}

pub fn write_term_counts_csv(writer: impl Write, tables: &[TermCounts]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["range_lo", "range_hi", "rank", "term", "doc_count"])
        .map_err(csv_err)?;
    for t in tables {
        for (i, (term, c)) in t.entries.iter().enumerate() {
            w.write_record([
                t.range.lo.to_string(),
                t.range.hi.to_string(),
                (i + 1).to_string(),
                term.clone(),
                c.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    finish_csv(w)
}

// ------------------------------------------------------------------ domain

#[derive(Debug, Clone, PartialEq)]
pub struct DomainAggregator<'s> {
    domains: &'s BTreeSet<String>,
    in_set: Vec<u64>,
    rest: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainDistribution {
    pub in_set: ScoreHistogram,
    pub rest: ScoreHistogram,
    pub in_set_empty: bool,
    pub rest_empty: bool,
}

/// Lowercases a hostname and strips a leading `www.`.
pub fn normalize_domain(d: &str) -> String {
    let d = d.trim().trim_end_matches('.').to_lowercase();
    d.strip_prefix("www.").map(str::to_owned).unwrap_or(d)
}

impl<'s> DomainAggregator<'s> {
    /// `domains` should already be normalized with [`normalize_domain`].
    pub fn new(domains: &'s BTreeSet<String>, n_bins: usize) -> Result<Self> {
        check_bins(n_bins)?;
        if domains.is_empty() {
            return Err(Error::InvalidArgument("domain set is empty".into()));
        }
        Ok(DomainAggregator {
            domains,
            in_set: vec![0; n_bins],
            rest: vec![0; n_bins],
        })
    }

    pub fn accumulate(&mut self, doc: &Document, score: f64) {
        let member = doc
            .domain
            .as_deref()
            .is_some_and(|d| self.domains.contains(&normalize_domain(d)));
        let bins = if member { &mut self.in_set } else { &mut self.rest };
        let n = bins.len();
        bins[hist_bin(score, n)] += 1;
    }

    pub fn merge(&mut self, other: &DomainAggregator<'_>) {
        for (a, b) in self.in_set.iter_mut().zip(&other.in_set) {
            *a += b;
        }
        for (a, b) in self.rest.iter_mut().zip(&other.rest) {
            *a += b;
        }
    }

    pub fn finalize(&self) -> DomainDistribution {
        let in_set = ScoreHistogram::from_counts(self.in_set.clone());
        let rest = ScoreHistogram::from_counts(self.rest.clone());
        DomainDistribution {
            in_set_empty: in_set.total == 0,
            rest_empty: rest.total == 0,
            in_set,
            rest,
        }
    }
}

/// Score histograms of documents inside and outside a domain set.
pub fn domain_score_distribution<'a, I>(scored: I, domains: &[String], n_bins: usize) -> Result<DomainDistribution>
where
    I: IntoIterator<Item = (&'a Document, f64)>,
{
    let set: BTreeSet<String> = domains.iter().map(|d| normalize_domain(d)).collect();
    let mut agg = DomainAggregator::new(&set, n_bins)?;
    for (d, s) in scored {
        agg.accumulate(d, s);
    }
    Ok(agg.finalize())
}

impl DomainDistribution {
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["group", "bin_lo", "bin_hi", "count", "fraction"])
            .map_err(csv_err)?;
        write_histogram_rows(&mut w, "in_set", &self.in_set)?;
        write_histogram_rows(&mut w, "rest", &self.rest)?;
        finish_csv(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn doc(id: usize) -> Document {
        Document::new(format!("d{id}"), "")
    }

    fn synthetic(n: usize, seed: u64) -> Vec<(Document, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let words = ["essay", "buy", "cheap", "the", "river", "music", "game", "and", "loan"];
        (0..n)
            .map(|i| {
                let mut d = doc(i);
                d.full_char_length = rng.random_range(0..15_000);
                if rng.random_bool(0.9) {
                    d.timestamp = NaiveDate::from_ymd_opt(2018 + rng.random_range(0..2), rng.random_range(1..13), 1);
                }
                if rng.random_bool(0.8) {
                    d.topic = Some(["news", "games", "adult"][rng.random_range(0..3)].into());
                }
                d.domain = Some(["a.com", "www.b.org", "c.net"][rng.random_range(0..3)].into());
                d.nsfw = Some(rng.random_bool(0.1));
                d.text = (0..rng.random_range(0..8))
                    .map(|_| words[rng.random_range(0..words.len())])
                    .collect::<Vec<_>>()
                    .join(" ");
                let s = if rng.random_bool(0.05) {
                    1.0
                } else {
                    rng.random::<f64>()
                };
                (d, s)
            })
            .collect()
    }

    #[test]
    fn temporal_direct_count() {
        let mut a = TemporalAggregator::new(&[0.5]).unwrap();
        for (i, s) in [0.6, 0.4].iter().enumerate() {
            let mut d = doc(i);
            d.timestamp = NaiveDate::from_ymd_opt(2019, 3, 14);
            a.accumulate(&d, *s);
        }
        a.accumulate(&doc(9), 0.9);
        let t = a.finalize();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].month, "2019-03");
        assert_eq!(t.rows[0].fraction, 0.5);
        assert_eq!(t.skipped_no_timestamp, 1);
    }

    #[test]
    fn temporal_low_scores_give_zero_fractions() {
        let mut a = TemporalAggregator::new(&DEFAULT_THRESHOLDS).unwrap();
        for (d, _) in synthetic(200, 1) {
            a.accumulate(&d, 0.1);
        }
        assert!(a.finalize().rows.iter().all(|r| r.fraction == 0.0));
    }

    #[test]
    fn thresholds_validated() {
        assert!(TemporalAggregator::new(&[0.9, 0.5]).is_err());
        assert!(TemporalAggregator::new(&[1.0]).is_err());
        assert!(TemporalAggregator::new(&[]).is_err());
    }

    #[test]
    fn length_full_range_fraction_is_one() {
        let mut a = LengthAggregator::new(&[0], &[ScoreRange::new(0.0, 1.0).unwrap()]).unwrap();
        for (d, s) in synthetic(100, 2) {
            a.accumulate(&d, s);
        }
        let t = a.finalize();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].fraction, 1.0);
        assert_eq!(t.rows[0].bin_hi, None);
    }

    #[test]
    fn length_empty_bins_omitted_and_half_open() {
        let mut a = LengthAggregator::new(&[0, 500, 1000], &default_score_ranges()).unwrap();
        let mut d = doc(0);
        d.full_char_length = 500;
        a.accumulate(&d, 0.3);
        let t = a.finalize();
        assert!(t.rows.iter().all(|r| r.bin_lo == 500 && r.bin_hi == Some(1000)));
        assert_eq!(t.rows.len(), 5);
    }

    #[test]
    fn length_peak_found_at_constructed_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut a = LengthAggregator::new(&default_length_bins(), &default_score_ranges()).unwrap();
        for i in 0..5000 {
            let mut d = doc(i);
            d.full_char_length = rng.random_range(0..12_000);
            let high = (3000..3500).contains(&d.full_char_length) && rng.random_bool(0.7);
            a.accumulate(&d, if high { 0.995 } else { rng.random_range(0.0..0.9) });
        }
        let t = a.finalize();
        assert_eq!(t.peak_bin(ScoreRange { lo: 0.99, hi: 1.0 }), Some(3000));
    }

    #[test]
    fn score_one_belongs_to_top_range_and_last_bin() {
        let r = ScoreRange::new(0.99, 1.0).unwrap();
        assert!(r.contains(1.0));
        assert!(!ScoreRange::new(0.5, 0.8).unwrap().contains(0.8));
        assert_eq!(hist_bin(1.0, 10), 9);
        assert_eq!(hist_bin(0.95, 10), 9);
        assert_eq!(ScoreRange::parse("0.1:0.2").unwrap(), ScoreRange { lo: 0.1, hi: 0.2 });
        assert!(ScoreRange::parse("0.3:0.2").is_err());
    }

    #[test]
    fn topic_point_mass_and_missing_topic() {
        let mut a = TopicAggregator::new(10).unwrap();
        for i in 0..5 {
            let mut d = doc(i);
            d.topic = Some("x".into());
            a.accumulate(&d, 0.95);
        }
        let h = a.finalize(None).unwrap();
        let x = &h.histograms["x"];
        assert_eq!(x.fractions[9], 1.0);
        assert_eq!(x.fractions.iter().sum::<f64>(), 1.0);
        assert!(a
            .finalize(Some(&["nope".to_owned()]))
            .unwrap_err()
            .to_string()
            .contains("nope"));
    }

    #[test]
    fn topic_uniform_scores_spread_evenly() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut d = doc(0);
        d.topic = Some("u".into());
        let n = 20_000;
        let scored: Vec<(Document, f64)> = (0..n).map(|_| (d.clone(), rng.random::<f64>())).collect();
        let h = topic_score_histogram(scored.iter().map(|(d, s)| (d, *s)), "u", 10).unwrap();
        let expected = n as f64 / 10.0;
        let chi2: f64 = h.counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 9 degrees of freedom; 27.88 is the 0.999 quantile.
        assert!(chi2 < 27.88, "chi2 {chi2}");
    }

    #[test]
    fn topics_with_disjoint_supports() {
        let mut a = TopicAggregator::new(10).unwrap();
        for i in 0..50 {
            let mut d = doc(i);
            d.topic = Some(if i % 2 == 0 { "lo" } else { "hi" }.into());
            a.accumulate(
                &d,
                if i % 2 == 0 {
                    0.05 * (i % 8) as f64
                } else {
                    0.6 + 0.05 * (i % 8) as f64
                },
            );
        }
        let h = a.finalize(None).unwrap();
        for (x, y) in h.histograms["lo"].counts.iter().zip(&h.histograms["hi"].counts) {
            assert!(*x == 0 || *y == 0);
        }
    }

    #[test]
    fn terms_drop_nsfw_in_high_ranges() {
        let stop = default_stopwords();
        let mut bad = doc(0);
        bad.text = "explicit stuff".into();
        bad.nsfw = Some(true);
        let mut good = doc(1);
        good.text = "An essay on the river".into();
        let scored = [(&bad, 0.995), (&good, 0.992)];
        let t = frequent_terms(scored, ScoreRange::new(0.99, 1.0).unwrap(), 10, &stop);
        assert!(t.nsfw_filtered);
        assert_eq!(t.total_docs, 1);
        assert_eq!(t.nsfw_dropped, 1);
        assert!(t.entries.iter().any(|e| e.0 == "essay"));
        assert!(!t.entries.iter().any(|e| e.0 == "explicit" || e.0 == "the"));
        // Low ranges keep NSFW documents.
        let low = frequent_terms([(&bad, 0.05)], ScoreRange::new(0.01, 0.1).unwrap(), 10, &stop);
        assert!(!low.nsfw_filtered);
        assert_eq!(low.total_docs, 1);
    }

    #[test]
    fn stopword_only_docs_give_no_terms() {
        let stop = default_stopwords();
        let mut d = doc(0);
        d.text = "The and of it, THE!".into();
        let t = frequent_terms([(&d, 0.3)], ScoreRange::new(0.0, 0.5).unwrap(), 10, &stop);
        assert!(t.entries.is_empty());
        assert_eq!(t.total_docs, 1);
    }

    #[test]
    fn domain_membership_and_flags() {
        let set: BTreeSet<String> = ["b.org".to_owned()].into();
        let mut a = DomainAggregator::new(&set, 10).unwrap();
        for (d, s) in synthetic(300, 7) {
            a.accumulate(&d, s);
        }
        let r = a.finalize();
        assert!(!r.in_set_empty && !r.rest_empty);
        assert!((r.in_set.fractions.iter().sum::<f64>() - 1.0).abs() < 1e-9);

        let none: BTreeSet<String> = ["zzz.io".to_owned()].into();
        let mut a = DomainAggregator::new(&none, 10).unwrap();
        for (d, s) in synthetic(50, 7) {
            a.accumulate(&d, s);
        }
        let r = a.finalize();
        assert!(r.in_set_empty && r.in_set.fractions.is_empty());

        let all: BTreeSet<String> = ["a.com", "b.org", "c.net"].iter().map(|s| s.to_string()).collect();
        let mut a = DomainAggregator::new(&all, 10).unwrap();
        for (d, s) in synthetic(50, 7) {
            a.accumulate(&d, s);
        }
        assert!(a.finalize().rest_empty);
    }

    #[test]
    fn csv_outputs_have_stable_headers() {
        let mut t = TemporalAggregator::new(&[0.5]).unwrap();
        let mut d = doc(0);
        d.timestamp = NaiveDate::from_ymd_opt(2020, 1, 2);
        t.accumulate(&d, 0.7);
        let mut buf = Vec::new();
        t.finalize().write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "month,threshold,fraction,n_month\n2020-01,0.5,1,1\n"
        );
    }

    proptest! {
        #[test]
        fn merge_is_order_independent(seed in 0u64..200, split in 1usize..199) {
            let data = synthetic(200, seed);
            let (x, y) = data.split_at(split);
            let stop = default_stopwords();
            let doms: BTreeSet<String> = ["a.com".to_owned()].into();
            let range = ScoreRange::new(0.5, 1.0).unwrap();

            macro_rules! check {
                ($mk:expr, $fin:expr) => {{
                    let mut whole = $mk;
                    for (d, s) in &data { whole.accumulate(d, *s); }
                    let mut a = $mk;
                    for (d, s) in x { a.accumulate(d, *s); }
                    let mut b = $mk;
                    for (d, s) in y { b.accumulate(d, *s); }
                    let mut ab = a.clone();
                    ab.merge(&b);
                    let mut ba = b.clone();
                    ba.merge(&a);
                    prop_assert_eq!($fin(&ab), $fin(&whole));
                    prop_assert_eq!($fin(&ba), $fin(&whole));
                }};
            }
            check!(TemporalAggregator::new(&DEFAULT_THRESHOLDS).unwrap(), |a: &TemporalAggregator| a.finalize());
            check!(LengthAggregator::new(&default_length_bins(), &default_score_ranges()).unwrap(), |a: &LengthAggregator| a.finalize());
            check!(TopicAggregator::new(20).unwrap(), |a: &TopicAggregator| a.finalize(None).unwrap());
            check!(TermsAggregator::new(range, &stop), |a: &TermsAggregator| a.finalize(100));
            check!(DomainAggregator::new(&doms, 20).unwrap(), |a: &DomainAggregator| a.finalize());
        }

        #[test]
        fn temporal_fractions_monotone_in_threshold(seed in 0u64..100) {
            let mut a = TemporalAggregator::new(&DEFAULT_THRESHOLDS).unwrap();
            for (d, s) in synthetic(500, seed) { a.accumulate(&d, s); }
            let t = a.finalize();
            for w in t.rows.windows(2) {
                if w[0].month == w[1].month {
                    prop_assert!(w[0].fraction >= w[1].fraction);
                }
            }
        }
    }
}
