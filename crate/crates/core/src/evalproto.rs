//! Language-quality evaluation: percentile buckets of detector scores,
//! rating sheets, and the correlation / agreement report.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{csv_err, ScoredDocument};
use crate::error::{Error, Result};
use crate::stats::{bootstrap_ci, cohens_kappa, pearson, BootstrapConfig, BootstrapInterval};

pub const DEFAULT_PER_BUCKET: usize = 35;

/// Human language-quality rating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Rating {
    Low,
    Medium,
    High,
    Undefined,
}

impl Rating {
    pub fn parse(s: &str) -> Option<Rating> {
        match s.trim() {
            "0" => Some(Rating::Low),
            "1" => Some(Rating::Medium),
            "2" => Some(Rating::High),
            "U" | "u" => Some(Rating::Undefined),
            _ => None,
        }
    }

    /// Numeric score, `None` for Undefined.
    pub fn value(self) -> Option<f64> {
        match self {
            Rating::Low => Some(0.0),
            Rating::Medium => Some(1.0),
            Rating::High => Some(2.0),
            Rating::Undefined => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Rating::Low => "0",
            Rating::Medium => "1",
            Rating::High => "2",
            Rating::Undefined => "U",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LqRating {
    pub doc_id: String,
    pub rater_id: String,
    pub rating: Rating,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BucketName {
    Bottom,
    Middle,
    Top,
}

impl BucketName {
    pub fn as_str(self) -> &'static str {
        match self {
            BucketName::Bottom => "bottom",
            BucketName::Middle => "middle",
            BucketName::Top => "top",
        }
    }

    pub fn parse(s: &str) -> Option<BucketName> {
        match s.trim() {
            "bottom" => Some(BucketName::Bottom),
            "middle" => Some(BucketName::Middle),
            "top" => Some(BucketName::Top),
            _ => None,
        }
    }

    /// Classifier LQ assigned to the bucket: low machine scores mean high
    /// quality.
    pub fn classifier_lq(self) -> u8 {
        match self {
            BucketName::Bottom => 2,
            BucketName::Middle => 1,
            BucketName::Top => 0,
        }
    }
}

impl fmt::Display for BucketName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Percentile slice `[lo, hi]` of the score distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BucketSpec {
    pub name: BucketName,
    pub lo: f64,
    pub hi: f64,
    pub classifier_lq: u8,
}

impl BucketSpec {
    pub fn new(name: BucketName, lo: f64, hi: f64) -> Self {
        BucketSpec {
            name,
            lo,
            hi,
            classifier_lq: name.classifier_lq(),
        }
    }

    /// Bottom [0, 0.5], middle [50, 50.5], top [99.5, 100].
    pub fn defaults() -> Vec<BucketSpec> {
        vec![
            BucketSpec::new(BucketName::Bottom, 0.0, 0.5),
            BucketSpec::new(BucketName::Middle, 50.0, 50.5),
            BucketSpec::new(BucketName::Top, 99.5, 100.0),
        ]
    }

    /// Index range `[floor(lo N / 100), floor(hi N / 100))` in the sorted
    /// score list.
    pub fn index_range(&self, n: usize) -> std::ops::Range<usize> {
        let at = |p: f64| ((p / 100.0) * n as f64).floor() as usize;
        at(self.lo)..at(self.hi).min(n)
    }
}

pub fn validate_bucket_specs(specs: &[BucketSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::InvalidArgument("no bucket specs".into()));
    }
    for s in specs {
        if !(0.0 <= s.lo && s.lo < s.hi && s.hi <= 100.0) {
            return Err(Error::InvalidArgument(format!(
                "bucket {} range [{}, {}] must satisfy 0 <= lo < hi <= 100",
                s.name, s.lo, s.hi
            )));
        }
        if s.classifier_lq != s.name.classifier_lq() {
            return Err(Error::InvalidArgument(format!(
                "bucket {} must map to classifier LQ {}",
                s.name,
                s.name.classifier_lq()
            )));
        }
    }
    for (i, a) in specs.iter().enumerate() {
        for b in &specs[i + 1..] {
            if a.name == b.name {
                return Err(Error::InvalidArgument(format!("bucket {} given twice", a.name)));
            }
            if a.lo < b.hi && b.lo < a.hi {
                return Err(Error::InvalidArgument(format!(
                    "buckets {} and {} overlap",
                    a.name, b.name
                )));
            }
        }
    }
    Ok(())
}

/// Sorts documents by (score, doc_id) and slices each bucket's percentile
/// range.
pub fn assign_buckets(scores: &[ScoredDocument], specs: &[BucketSpec]) -> Result<BTreeMap<BucketName, Vec<String>>> {
    validate_bucket_specs(specs)?;
    if scores.is_empty() {
        return Err(Error::EmptyInput("no scored documents".into()));
    }
    let mut order: Vec<&ScoredDocument> = scores.iter().collect();
    order.sort_by(|a, b| a.score.total_cmp(&b.score).then_with(|| a.doc_id.cmp(&b.doc_id)));
    let mut out = BTreeMap::new();
    for spec in specs {
        let range = spec.index_range(order.len());
        if range.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "bucket {} selects no documents out of {}",
                spec.name,
                order.len()
            )));
        }
        out.insert(spec.name, order[range].iter().map(|d| d.doc_id.clone()).collect());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SheetRow {
    pub doc_id: String,
    pub bucket: BucketName,
}

/// Samples `n_per_bucket` documents per bucket without replacement and
/// shuffles the combined sheet.
pub fn sample_for_rating(
    buckets: &BTreeMap<BucketName, Vec<String>>,
    n_per_bucket: usize,
    seed: u64,
) -> Result<Vec<SheetRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sheet = Vec::with_capacity(buckets.len() * n_per_bucket);
    for (&name, docs) in buckets {
        if docs.len() < n_per_bucket {
            return Err(Error::InvalidArgument(format!(
                "bucket {name} has {} documents, fewer than the {n_per_bucket} requested",
                docs.len()
            )));
        }
        let mut picked = rand::seq::index::sample(&mut rng, docs.len(), n_per_bucket).into_vec();
        picked.sort_unstable();
        sheet.extend(picked.into_iter().map(|i| SheetRow {
            doc_id: docs[i].clone(),
            bucket: name,
        }));
    }
    sheet.shuffle(&mut rng);
    Ok(sheet)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketCounts {
    pub sheet: usize,
    pub rated: usize,
    pub dropped_undefined: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub pearson_r: f64,
    pub pearson_ci: (f64, f64),
    pub kappa: f64,
    pub kappa_ci: (f64, f64),
    /// Kappa over documents kept after the Undefined drop, when defined.
    pub kappa_after_drop: Option<f64>,
    pub n_rated: usize,
    pub n_dropped_undefined: usize,
    pub per_bucket_counts: BTreeMap<BucketName, BucketCounts>,
    pub bootstrap: BootstrapConfig,
    pub pearson_resamples_skipped: usize,
    pub kappa_resamples_skipped: usize,
    pub rater_a: String,
    pub rater_b: String,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// One sheet document with its two ratings (rater A has the smaller id).
#[derive(Debug, Clone)]
struct RatedDoc {
    bucket: BucketName,
    a: Rating,
    b: Rating,
}

fn pair_ratings(ratings: &[LqRating], sheet: &[SheetRow]) -> Result<(Vec<RatedDoc>, String, String)> {
    let mut by_doc: BTreeMap<&str, Vec<&LqRating>> = BTreeMap::new();
    for r in ratings {
        by_doc.entry(r.doc_id.as_str()).or_default().push(r);
    }
    let mut seen_sheet = BTreeMap::new();
    for row in sheet {
        if seen_sheet.insert(row.doc_id.as_str(), row.bucket).is_some() {
            return Err(Error::InvalidArgument(format!(
                "document {:?} appears twice on the sheet",
                row.doc_id
            )));
        }
    }
    if let Some(extra) = by_doc.keys().find(|d| !seen_sheet.contains_key(*d)) {
        return Err(Error::InvalidArgument(format!(
            "rating for document {extra:?} not on the sheet"
        )));
    }
    let mut raters: Option<(String, String)> = None;
    let mut docs = Vec::with_capacity(sheet.len());
    for row in sheet {
        let rs = by_doc.get(row.doc_id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
        if rs.len() != 2 {
            return Err(Error::InvalidArgument(format!(
                "document {:?} has {} ratings, expected 2",
                row.doc_id,
                rs.len()
            )));
        }
        let (mut x, mut y) = (rs[0], rs[1]);
        if x.rater_id == y.rater_id {
            return Err(Error::InvalidArgument(format!(
                "document {:?} rated twice by {:?}",
                row.doc_id, x.rater_id
            )));
        }
        if y.rater_id < x.rater_id {
            std::mem::swap(&mut x, &mut y);
        }
        match &raters {
            None => raters = Some((x.rater_id.clone(), y.rater_id.clone())),
            Some((a, b)) if *a != x.rater_id || *b != y.rater_id => {
                return Err(Error::InvalidArgument(format!(
                    "document {:?} rated by {:?}/{:?}; every document needs the same two raters {a:?}/{b:?}",
                    row.doc_id, x.rater_id, y.rater_id
                )));
            }
            _ => {}
        }
        docs.push(RatedDoc {
            bucket: row.bucket,
            a: x.rating,
            b: y.rating,
        });
    }
    let (a, b) = raters.ok_or_else(|| Error::EmptyInput("empty rating sheet".into()))?;
    Ok((docs, a, b))
}

fn kappa_of(docs: &[(Rating, Rating)]) -> Result<f64> {
    let (a, b): (Vec<Rating>, Vec<Rating>) = docs.iter().copied().unzip();
    cohens_kappa(&a, &b)
}

fn pearson_of(pairs: &[(f64, f64)]) -> Result<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    pearson(&x, &y)
}

/// Computes kappa over all sheet documents (four categories), then drops
/// documents with any Undefined rating and correlates the mean human
/// rating with the bucket's classifier LQ.
pub fn lq_evaluation(
    ratings: &[LqRating],
    sheet: &[SheetRow],
    specs: &[BucketSpec],
    bootstrap: &BootstrapConfig,
) -> Result<EvalReport> {
    validate_bucket_specs(specs)?;
    let lq_of: BTreeMap<BucketName, u8> = specs.iter().map(|s| (s.name, s.classifier_lq)).collect();
    if let Some(row) = sheet.iter().find(|r| !lq_of.contains_key(&r.bucket)) {
        return Err(Error::InvalidArgument(format!(
            "sheet bucket {} has no spec",
            row.bucket
        )));
    }
    let (docs, rater_a, rater_b) = pair_ratings(ratings, sheet)?;

    let all_pairs: Vec<(Rating, Rating)> = docs.iter().map(|d| (d.a, d.b)).collect();
    let kappa = kappa_of(&all_pairs)?;
    let kappa_ci = bootstrap_ci(&all_pairs, kappa_of, bootstrap)?;

    let mut per_bucket: BTreeMap<BucketName, BucketCounts> = BTreeMap::new();
    let mut kept_pairs = Vec::new();
    let mut corr = Vec::new();
    for d in &docs {
        let c = per_bucket.entry(d.bucket).or_default();
        c.sheet += 1;
        match (d.a.value(), d.b.value()) {
            (Some(x), Some(y)) => {
                c.rated += 1;
                corr.push(((x + y) / 2.0, f64::from(lq_of[&d.bucket])));
                kept_pairs.push((d.a, d.b));
            }
            _ => c.dropped_undefined += 1,
        }
    }
    if corr.is_empty() {
        return Err(Error::EmptyInput("every document has an Undefined rating".into()));
    }
    let pearson_r = pearson_of(&corr)?;
    let pearson_ci: BootstrapInterval = bootstrap_ci(&corr, pearson_of, bootstrap)?;
    Ok(EvalReport {
        pearson_r,
        pearson_ci: (pearson_ci.lo, pearson_ci.hi),
        kappa,
        kappa_ci: (kappa_ci.lo, kappa_ci.hi),
        kappa_after_drop: kappa_of(&kept_pairs).ok(),
        n_rated: corr.len(),
        n_dropped_undefined: docs.len() - corr.len(),
        per_bucket_counts: per_bucket,
        bootstrap: *bootstrap,
        pearson_resamples_skipped: pearson_ci.skipped,
        kappa_resamples_skipped: kappa_ci.skipped,
        rater_a,
        rater_b,
    })
}

fn expect_header(rdr: &mut csv::Reader<impl Read>, name: &str, want: &[&str]) -> Result<()> {
    let got: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_owned).collect();
    if got != want {
        return Err(Error::record(
            name,
            1,
            format!("expected header {}, got {}", want.join(","), got.join(",")),
        ));
    }
    Ok(())
}

fn records<'r, R: Read + 'r>(
    rdr: &'r mut csv::Reader<R>,
    name: &str,
    width: usize,
) -> impl Iterator<Item = Result<(u64, csv::StringRecord)>> + 'r {
    let name = name.to_owned();
    rdr.records().map(move |rec| {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::record(&name, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != width {
            return Err(Error::record(
                &name,
                line,
                format!("expected {width} fields, got {}", rec.len()),
            ));
        }
        Ok((line, rec))
    })
}

/// Reads a `doc_id,rater_id,rating` table.
pub fn read_ratings(reader: impl Read, name: &str) -> Result<Vec<LqRating>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
    expect_header(&mut rdr, name, &["doc_id", "rater_id", "rating"])?;
    let mut out = Vec::new();
    for rec in records(&mut rdr, name, 3) {
        let (line, rec) = rec?;
        let rating = Rating::parse(&rec[2])
            .ok_or_else(|| Error::record(name, line, format!("rating {:?} is not one of 0, 1, 2, U", &rec[2])))?;
        if rec[0].is_empty() || rec[1].is_empty() {
            return Err(Error::record(name, line, "empty doc_id or rater_id"));
        }
        out.push(LqRating {
            doc_id: rec[0].to_owned(),
            rater_id: rec[1].to_owned(),
            rating,
        });
    }
    Ok(out)
}

pub fn write_ratings(writer: impl Write, ratings: &[LqRating]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["doc_id", "rater_id", "rating"]).map_err(csv_err)?;
    for r in ratings {
        w.write_record([r.doc_id.as_str(), r.rater_id.as_str(), r.rating.as_str()])
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

/// Reads a `doc_id,bucket` sheet.
pub fn read_sheet(reader: impl Read, name: &str) -> Result<Vec<SheetRow>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
    expect_header(&mut rdr, name, &["doc_id", "bucket"])?;
    let mut out = Vec::new();
    for rec in records(&mut rdr, name, 2) {
        let (line, rec) = rec?;
        let bucket = BucketName::parse(&rec[1])
            .ok_or_else(|| Error::record(name, line, format!("unknown bucket {:?}", &rec[1])))?;
        out.push(SheetRow {
            doc_id: rec[0].to_owned(),
            bucket,
        });
    }
    Ok(out)
}

/// Writes the sheet; the rater-facing variant omits the bucket column.
pub fn write_sheet(writer: impl Write, sheet: &[SheetRow], with_bucket: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    if with_bucket {
        w.write_record(["doc_id", "bucket"]).map_err(csv_err)?;
        for r in sheet {
            w.write_record([r.doc_id.as_str(), r.bucket.as_str()])
                .map_err(csv_err)?;
        }
    } else {
        w.write_record(["doc_id"]).map_err(csv_err)?;
        for r in sheet {
            w.write_record([r.doc_id.as_str()]).map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scored(n: usize) -> Vec<ScoredDocument> {
        (0..n)
            .map(|i| ScoredDocument {
                doc_id: format!("d{i:04}"),
                detector_id: "t".into(),
                score: ((i * 7919) % n) as f64 / n as f64,
            })
            .collect()
    }

    fn rating(doc: &str, rater: &str, r: Rating) -> LqRating {
        LqRating {
            doc_id: doc.into(),
            rater_id: rater.into(),
            rating: r,
        }
    }

    #[test]
    fn buckets_pick_extremes() {
        let docs = scored(1000);
        let b = assign_buckets(&docs, &BucketSpec::defaults()).unwrap();
        let mut sorted = docs.clone();
        sorted.sort_by(|a, b| a.score.total_cmp(&b.score).then(a.doc_id.cmp(&b.doc_id)));
        let ids = |r: std::ops::Range<usize>| sorted[r].iter().map(|d| d.doc_id.clone()).collect::<Vec<_>>();
        assert_eq!(b[&BucketName::Bottom], ids(0..5));
        assert_eq!(b[&BucketName::Middle], ids(500..505));
        assert_eq!(b[&BucketName::Top], ids(995..1000));
    }

    #[test]
    fn thirds_partition_everything() {
        let docs = scored(99);
        let specs = [
            BucketSpec::new(BucketName::Bottom, 0.0, 100.0 / 3.0),
            BucketSpec::new(BucketName::Middle, 100.0 / 3.0, 200.0 / 3.0),
            BucketSpec::new(BucketName::Top, 200.0 / 3.0, 100.0),
        ];
        let b = assign_buckets(&docs, &specs).unwrap();
        let mut all: Vec<String> = b.values().flatten().cloned().collect();
        all.sort();
        let mut want: Vec<String> = docs.iter().map(|d| d.doc_id.clone()).collect();
        want.sort();
        assert_eq!(all, want);
    }

    #[test]
    fn empty_bucket_named_in_error() {
        let err = assign_buckets(&scored(10), &BucketSpec::defaults()).unwrap_err();
        assert!(err.to_string().contains("bottom"), "{err}");
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut s = BucketSpec::defaults();
        s[0].classifier_lq = 0;
        assert!(validate_bucket_specs(&s).is_err());
        let overlap = [
            BucketSpec::new(BucketName::Bottom, 0.0, 50.0),
            BucketSpec::new(BucketName::Top, 40.0, 100.0),
        ];
        assert!(validate_bucket_specs(&overlap).is_err());
    }

    #[test]
    fn sheet_has_105_rows_and_is_deterministic() {
        let b = assign_buckets(&scored(10_000), &BucketSpec::defaults()).unwrap();
        let s1 = sample_for_rating(&b, 35, 4).unwrap();
        assert_eq!(s1.len(), 105);
        assert_eq!(s1, sample_for_rating(&b, 35, 4).unwrap());
        for name in [BucketName::Bottom, BucketName::Middle, BucketName::Top] {
            assert_eq!(s1.iter().filter(|r| r.bucket == name).count(), 35);
        }
        // Not grouped by bucket.
        assert!(s1.windows(2).any(|w| w[0].bucket != w[1].bucket));
    }

    #[test]
    fn exact_size_bucket_taken_whole() {
        let mut b = BTreeMap::new();
        let docs: Vec<String> = (0..35).map(|i| format!("x{i}")).collect();
        b.insert(BucketName::Top, docs.clone());
        let s = sample_for_rating(&b, 35, 1).unwrap();
        let mut got: Vec<String> = s.into_iter().map(|r| r.doc_id).collect();
        got.sort();
        let mut want = docs;
        want.sort();
        assert_eq!(got, want);
        assert!(sample_for_rating(&b, 36, 1).is_err());
    }

    #[test]
    fn perfect_raters_give_unit_statistics() {
        let mut sheet = Vec::new();
        let mut ratings = Vec::new();
        for (i, bucket) in [BucketName::Bottom, BucketName::Middle, BucketName::Top]
            .iter()
            .cycle()
            .take(12)
            .enumerate()
        {
            let id = format!("d{i}");
            let r = match bucket.classifier_lq() {
                0 => Rating::Low,
                1 => Rating::Medium,
                _ => Rating::High,
            };
            ratings.push(rating(&id, "r1", r));
            ratings.push(rating(&id, "r2", r));
            sheet.push(SheetRow {
                doc_id: id,
                bucket: *bucket,
            });
        }
        let cfg = BootstrapConfig {
            resamples: 500,
            ..Default::default()
        };
        let rep = lq_evaluation(&ratings, &sheet, &BucketSpec::defaults(), &cfg).unwrap();
        assert_eq!(rep.pearson_r, 1.0);
        assert_eq!(rep.kappa, 1.0);
        assert_eq!(rep.n_rated, 12);
        assert_eq!(rep.n_dropped_undefined, 0);
    }

    #[test]
    fn undefined_dropped_from_correlation_only() {
        let sheet: Vec<SheetRow> = [
            ("a", BucketName::Bottom),
            ("b", BucketName::Middle),
            ("c", BucketName::Top),
            ("d", BucketName::Bottom),
        ]
        .iter()
        .map(|&(d, b)| SheetRow {
            doc_id: d.into(),
            bucket: b,
        })
        .collect();
        let ratings = vec![
            rating("a", "r1", Rating::High),
            rating("a", "r2", Rating::High),
            rating("b", "r2", Rating::Medium),
            rating("b", "r1", Rating::Low),
            rating("c", "r1", Rating::Low),
            rating("c", "r2", Rating::Low),
            rating("d", "r1", Rating::Undefined),
            rating("d", "r2", Rating::High),
        ];
        let cfg = BootstrapConfig {
            resamples: 300,
            ..Default::default()
        };
        let rep = lq_evaluation(&ratings, &sheet, &BucketSpec::defaults(), &cfg).unwrap();
        assert_eq!(rep.n_dropped_undefined, 1);
        assert_eq!(rep.n_rated, 3);
        // Kappa table includes the Undefined document.
        let a = [Rating::High, Rating::Low, Rating::Low, Rating::Undefined];
        let b = [Rating::High, Rating::Medium, Rating::Low, Rating::High];
        assert_eq!(rep.kappa, cohens_kappa(&a, &b).unwrap());
        let r = pearson(&[2.0, 0.5, 0.0], &[2.0, 1.0, 0.0]).unwrap();
        assert_eq!(rep.pearson_r, r);
        assert_eq!(rep.per_bucket_counts[&BucketName::Bottom].dropped_undefined, 1);
        assert_eq!(
            rep.to_json(),
            lq_evaluation(&ratings, &sheet, &BucketSpec::defaults(), &cfg)
                .unwrap()
                .to_json()
        );
    }

    #[test]
    fn rating_count_errors() {
        let sheet = vec![SheetRow {
            doc_id: "a".into(),
            bucket: BucketName::Top,
        }];
        let cfg = BootstrapConfig::default();
        let one = vec![rating("a", "r1", Rating::Low)];
        assert!(lq_evaluation(&one, &sheet, &BucketSpec::defaults(), &cfg).is_err());
        let same = vec![rating("a", "r1", Rating::Low), rating("a", "r1", Rating::Low)];
        assert!(lq_evaluation(&same, &sheet, &BucketSpec::defaults(), &cfg).is_err());
        let three = vec![
            rating("a", "r1", Rating::Low),
            rating("a", "r2", Rating::Low),
            rating("a", "r3", Rating::Low),
        ];
        assert!(lq_evaluation(&three, &sheet, &BucketSpec::defaults(), &cfg).is_err());
    }

    #[test]
    fn ratings_csv_validation_names_row() {
        let data = "doc_id,rater_id,rating\na,r1,0\na,r2,3\n";
        let err = read_ratings(data.as_bytes(), "r.csv").unwrap_err();
        assert!(matches!(err, Error::Record { line: 3, .. }), "{err}");
        let ok = read_ratings("doc_id,rater_id,rating\na,r1,U\n".as_bytes(), "r.csv").unwrap();
        assert_eq!(ok[0].rating, Rating::Undefined);
    }

    #[test]
    fn sheet_csv_round_trip() {
        let sheet = vec![
            SheetRow {
                doc_id: "x,1".into(),
                bucket: BucketName::Middle,
            },
            SheetRow {
                doc_id: "y".into(),
                bucket: BucketName::Top,
            },
        ];
        let mut buf = Vec::new();
        write_sheet(&mut buf, &sheet, true).unwrap();
        assert_eq!(read_sheet(buf.as_slice(), "s").unwrap(), sheet);
        let mut blind = Vec::new();
        write_sheet(&mut blind, &sheet, false).unwrap();
        assert!(!String::from_utf8(blind).unwrap().contains("middle"));
    }

    proptest! {
        #[test]
        fn buckets_invariant_to_permutation(seed in 0u64..500) {
            let mut docs = scored(400);
            // Introduce ties so the doc_id tie-break matters.
            for d in docs.iter_mut() {
                d.score = (d.score * 20.0).floor() / 20.0;
            }
            let a = assign_buckets(&docs, &BucketSpec::defaults()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            docs.shuffle(&mut rng);
            prop_assert_eq!(a, assign_buckets(&docs, &BucketSpec::defaults()).unwrap());
        }
    }
}
