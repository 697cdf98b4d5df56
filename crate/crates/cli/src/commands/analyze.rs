use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use qscan_core::analytics::{
    default_length_bins, default_stopwords, normalize_domain, parse_stopwords, write_term_counts_csv, DomainAggregator,
    LengthAggregator, ScoreRange, TemporalAggregator, TermsAggregator, TopicAggregator,
};
use qscan_core::corpus::{IngestStats, LengthHistogram, RawRecord, RawRecords};
use qscan_core::parallel::{map_ordered, BatchLimits};
use qscan_core::Document;
use serde::Serialize;

use super::{io_err, pool, read_scores};
use crate::args::{DomainArgs, LengthArgs, PercentilesArgs, ReadOpts, ScoredInput, TemporalArgs, TermsArgs, TopicArgs};
use crate::error::{CliError, CliResult};
use crate::output::{write_sidecar, AtomicFile};

#[derive(Debug, Default, Serialize)]
struct ScanStats {
    #[serde(flatten)]
    ingest: IngestStats,
    /// Documents without a row in the score table.
    unscored: u64,
}

/// Streams a corpus, parsing records on the worker pool, and feeds every
/// document with its score to `visit` in source order.
fn scan_docs<F>(input: &Path, read: &mut ReadOpts, workers: usize, mut visit: F) -> CliResult<IngestStats>
where
    F: FnMut(Document) + Send,
{
    let format = read.resolve_format(input);
    let opts = read.options();
    let name = input.display().to_string();
    let records = RawRecords::open(input, format)?;
    let mut stats = IngestStats::default();
    let map = |raw: &RawRecord| raw.parse(&name, &opts);
    let sink = |outcome| {
        if let Some(doc) = stats.observe(outcome, opts.on_error)? {
            visit(doc);
        }
        Ok(())
    };
    pool(workers)?.install(|| map_ordered(records, BatchLimits::default(), map, sink))?;
    Ok(stats)
}

fn scan_scored<F>(data: &mut ScoredInput, mut visit: F) -> CliResult<ScanStats>
where
    F: FnMut(&Document, f64) + Send,
{
    let scores: HashMap<String, f64> = read_scores(&data.scores)?
        .into_iter()
        .map(|r| (r.doc_id, r.score))
        .collect();
    let mut unscored = 0;
    let ingest = scan_docs(&data.input, &mut data.read, data.workers, |doc| {
        match scores.get(&doc.id) {
            Some(&s) => visit(&doc, s),
            None => unscored += 1,
        }
    })?;
    Ok(ScanStats { ingest, unscored })
}

fn parse_ranges(ranges: &[String]) -> CliResult<Vec<ScoreRange>> {
    ranges
        .iter()
        .map(|r| ScoreRange::parse(r).map_err(|e| CliError::usage(e.to_string())))
        .collect()
}

/// Writes a CSV table atomically through `write`.
fn write_table<F>(out: &Path, write: F) -> CliResult<()>
where
    F: FnOnce(&mut dyn std::io::Write) -> CliResult<()>,
{
    let mut f = AtomicFile::create(out)?;
    write(f.writer())?;
    f.commit()
}

fn usage<T>(r: qscan_core::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError::usage(e.to_string()))
}

pub fn temporal(mut a: TemporalArgs) -> CliResult<()> {
    let mut agg = usage(TemporalAggregator::new(&a.thresholds))?;
    let scan = scan_scored(&mut a.data, |d, s| agg.accumulate(d, s))?;
    let table = agg.finalize();
    write_table(&a.data.out, |w| Ok(table.write_csv(w)?))?;
    let stats = serde_json::json!({ "scan": scan, "skipped_no_timestamp": table.skipped_no_timestamp });
    write_sidecar(&a.data.out, "analyze temporal", &a, stats)
}

pub fn length(mut a: LengthArgs) -> CliResult<()> {
    let ranges = parse_ranges(&a.ranges)?;
    let bins = a.bins.get_or_insert_with(default_length_bins).clone();
    let mut agg = usage(LengthAggregator::new(&bins, &ranges))?;
    let scan = scan_scored(&mut a.data, |d, s| agg.accumulate(d, s))?;
    let table = agg.finalize();
    write_table(&a.data.out, |w| Ok(table.write_csv(w)?))?;
    let peaks: Vec<_> = ranges
        .iter()
        .map(|&r| serde_json::json!({ "range": r, "peak_bin_lo": table.peak_bin(r) }))
        .collect();
    let stats = serde_json::json!({
        "scan": scan,
        "skipped_below_first_bin": table.skipped_below_first_bin,
        "peaks": peaks,
    });
    write_sidecar(&a.data.out, "analyze length", &a, stats)
}

pub fn topic(mut a: TopicArgs) -> CliResult<()> {
    let mut agg = usage(TopicAggregator::new(a.bins))?;
    let scan = scan_scored(&mut a.data, |d, s| agg.accumulate(d, s))?;
    let hists = agg.finalize(a.topics.as_deref())?;
    write_table(&a.data.out, |w| Ok(hists.write_csv(w)?))?;
    let stats = serde_json::json!({ "scan": scan, "skipped_no_topic": hists.skipped_no_topic });
    write_sidecar(&a.data.out, "analyze topic", &a, stats)
}

pub fn terms(mut a: TermsArgs) -> CliResult<()> {
    let ranges = parse_ranges(&a.ranges)?;
    let stopwords = match &a.stopwords {
        Some(p) => parse_stopwords(&std::fs::read_to_string(p).map_err(io_err(p))?),
        None => default_stopwords(),
    };
    let mut aggs: Vec<TermsAggregator<'_>> = ranges.iter().map(|&r| TermsAggregator::new(r, &stopwords)).collect();
    let scan = scan_scored(&mut a.data, |d, s| {
        for agg in &mut aggs {
            agg.accumulate(d, s);
        }
    })?;
    let tables: Vec<_> = aggs.iter().map(|agg| agg.finalize(a.top_n)).collect();
    write_table(&a.data.out, |w| Ok(write_term_counts_csv(w, &tables)?))?;
    let per_range: Vec<_> = tables
        .iter()
        .map(|t| {
            serde_json::json!({
                "range": t.range,
                "total_docs": t.total_docs,
                "nsfw_filtered": t.nsfw_filtered,
                "nsfw_dropped": t.nsfw_dropped,
            })
        })
        .collect();
    let stats = serde_json::json!({ "scan": scan, "ranges": per_range, "stopwords": stopwords.len() });
    write_sidecar(&a.data.out, "analyze terms", &a, stats)
}

pub fn domain(mut a: DomainArgs) -> CliResult<()> {
    let mut set: BTreeSet<String> = a.domains.iter().flatten().map(|d| normalize_domain(d)).collect();
    if let Some(p) = &a.domains_file {
        let text = std::fs::read_to_string(p).map_err(io_err(p))?;
        set.extend(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(normalize_domain),
        );
    }
    if set.is_empty() {
        return Err(CliError::usage("no domains given"));
    }
    let mut agg = usage(DomainAggregator::new(&set, a.bins))?;
    let scan = scan_scored(&mut a.data, |d, s| agg.accumulate(d, s))?;
    let dist = agg.finalize();
    write_table(&a.data.out, |w| Ok(dist.write_csv(w)?))?;
    let stats = serde_json::json!({
        "scan": scan,
        "domains": set,
        "in_set_empty": dist.in_set_empty,
        "rest_empty": dist.rest_empty,
    });
    write_sidecar(&a.data.out, "analyze domain", &a, stats)
}

pub fn percentiles(mut a: PercentilesArgs) -> CliResult<()> {
    let ps = a
        .percentiles
        .get_or_insert_with(|| (1..=100).map(f64::from).collect())
        .clone();
    let mut hist = LengthHistogram::new();
    let scan = scan_docs(&a.input, &mut a.read, a.workers, |d| {
        hist.accumulate(d.full_char_length)
    })?;
    let rows = hist.percentiles(&ps)?;
    write_table(&a.out, |w| {
        let mut csv = csv::Writer::from_writer(w);
        let err = |e: csv::Error| CliError::runtime(format!("{}: {e}", a.out.display()));
        csv.write_record(["percentile", "char_length"]).map_err(err)?;
        for (p, len) in &rows {
            csv.write_record([p.to_string(), len.to_string()]).map_err(err)?;
        }
        csv.flush().map_err(io_err(&a.out))
    })?;
    let stats = serde_json::json!({ "scan": scan, "documents": hist.total() });
    write_sidecar(&a.out, "analyze percentiles", &a, stats)
}
