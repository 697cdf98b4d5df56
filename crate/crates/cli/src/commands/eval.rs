use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;
use std::path::Path;

use qscan_core::evalproto::{assign_buckets, lq_evaluation, read_ratings, read_sheet, sample_for_rating, write_sheet};
use qscan_core::stats::accuracy as thresholded_accuracy;
use qscan_core::{BootstrapConfig, BucketName, BucketSpec, SheetRow};

use super::{io_err, read_scores};
use crate::args::{EvalAccuracyArgs, EvalLqArgs, EvalSheetArgs};
use crate::error::{CliError, CliResult};
use crate::output::{write_sidecar, AtomicFile};

/// Parses `name:lo:hi` bucket specs.
fn parse_buckets(specs: &[String]) -> CliResult<Vec<BucketSpec>> {
    specs
        .iter()
        .map(|s| {
            let bad = || CliError::usage(format!("bucket {s:?} is not name:lo:hi"));
            let mut parts = s.split(':');
            let (Some(name), Some(lo), Some(hi), None) = (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(bad());
            };
            let name = BucketName::parse(name.trim()).ok_or_else(bad)?;
            let lo = lo.trim().parse().map_err(|_| bad())?;
            let hi = hi.trim().parse().map_err(|_| bad())?;
            Ok(BucketSpec::new(name, lo, hi))
        })
        .collect()
}

fn open(path: &Path) -> CliResult<std::io::BufReader<std::fs::File>> {
    Ok(std::io::BufReader::new(
        std::fs::File::open(path).map_err(io_err(path))?,
    ))
}

fn emit(out: Option<&Path>, text: &str, command: &str, config: &impl serde::Serialize) -> CliResult<()> {
    match out {
        Some(p) => {
            crate::output::write_atomic(p, text.as_bytes())?;
            write_sidecar(p, command, config, serde_json::Value::Null)
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|()| stdout.flush())
                .map_err(|e| CliError::runtime(format!("stdout: {e}")))
        }
    }
}

pub fn sheet(a: EvalSheetArgs) -> CliResult<()> {
    let specs = parse_buckets(&a.buckets)?;
    let scores = read_scores(&a.scores)?;
    let buckets = assign_buckets(&scores, &specs)?;
    let sheet = sample_for_rating(&buckets, a.per_bucket, a.seed)?;
    let write = |path: &Path, with_bucket: bool| -> CliResult<()> {
        let mut f = AtomicFile::create(path)?;
        write_sheet(f.writer(), &sheet, with_bucket)?;
        f.commit()
    };
    write(&a.out, true)?;
    if let Some(blind) = &a.blind_out {
        write(blind, false)?;
        write_sidecar(blind, "eval sheet", &a, serde_json::Value::Null)?;
    }
    let sizes: BTreeMap<&str, usize> = buckets.iter().map(|(k, v)| (k.as_str(), v.len())).collect();
    write_sidecar(&a.out, "eval sheet", &a, serde_json::json!({ "bucket_sizes": sizes }))
}

/// Places each rated document in the bucket its score falls into.
fn sheet_from_scores(scores_path: &Path, specs: &[BucketSpec], rated: &[&str]) -> CliResult<Vec<SheetRow>> {
    let scores = read_scores(scores_path)?;
    let buckets = assign_buckets(&scores, specs)?;
    let bucket_of: HashMap<&str, BucketName> = buckets
        .iter()
        .flat_map(|(&b, ids)| ids.iter().map(move |id| (id.as_str(), b)))
        .collect();
    rated
        .iter()
        .map(|&id| {
            let bucket = *bucket_of.get(id).ok_or_else(|| {
                CliError::input(format!(
                    "rated document {id:?} is in no bucket of {}",
                    scores_path.display()
                ))
            })?;
            Ok(SheetRow {
                doc_id: id.to_owned(),
                bucket,
            })
        })
        .collect()
}

pub fn lq(a: EvalLqArgs) -> CliResult<()> {
    let specs = parse_buckets(&a.buckets)?;
    let ratings = read_ratings(open(&a.ratings)?, &a.ratings.display().to_string())?;
    let sheet = match (&a.sheet, &a.scores) {
        (Some(p), _) => read_sheet(open(p)?, &p.display().to_string())?,
        (None, Some(scores)) => {
            let mut seen = HashSet::new();
            let rated: Vec<&str> = ratings
                .iter()
                .map(|r| r.doc_id.as_str())
                .filter(|id| seen.insert(*id))
                .collect();
            sheet_from_scores(scores, &specs, &rated)?
        }
        (None, None) => return Err(CliError::usage("eval lq needs --sheet or --scores")),
    };
    let config = BootstrapConfig {
        resamples: a.bootstrap.resamples,
        level: a.bootstrap.level,
        seed: a.bootstrap.seed,
    };
    config.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let report = lq_evaluation(&ratings, &sheet, &specs, &config)?;
    emit(a.out.as_deref(), &(report.to_json() + "\n"), "eval lq", &a)
}

fn read_labels(path: &Path) -> CliResult<Vec<(String, u8)>> {
    let name = path.display().to_string();
    let mut rdr = csv::Reader::from_reader(open(path)?);
    let header = rdr.headers().map_err(|e| CliError::input(format!("{name}: {e}")))?;
    if header.iter().collect::<Vec<_>>() != ["doc_id", "label"] {
        return Err(CliError::input(format!("{name}: header must be doc_id,label")));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| CliError::input(format!("{name}: record {line}: {e}")))?;
        let label = match &rec[1] {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(CliError::input(format!(
                    "{name}: record {line}: label {other:?} is not 0 or 1"
                )))
            }
        };
        out.push((rec[0].to_owned(), label));
    }
    Ok(out)
}

pub fn accuracy(a: EvalAccuracyArgs) -> CliResult<()> {
    if !(0.0..=1.0).contains(&a.threshold) {
        return Err(CliError::usage(format!("threshold {} is outside [0, 1]", a.threshold)));
    }
    let scores: HashMap<String, f64> = read_scores(&a.scores)?
        .into_iter()
        .map(|r| (r.doc_id, r.score))
        .collect();
    let labels = read_labels(&a.labels)?;
    let mut s = Vec::with_capacity(labels.len());
    let mut y = Vec::with_capacity(labels.len());
    for (id, label) in &labels {
        let score = scores
            .get(id)
            .ok_or_else(|| CliError::input(format!("labelled document {id:?} has no score")))?;
        s.push(*score);
        y.push(*label);
    }
    let acc = thresholded_accuracy(&s, &y, a.threshold)?;
    let mut confusion = [[0u64; 2]; 2];
    for (&score, &label) in s.iter().zip(&y) {
        confusion[label as usize][usize::from(score > a.threshold)] += 1;
    }
    let report = serde_json::json!({
        "accuracy": acc,
        "n": s.len(),
        "threshold": a.threshold,
        "true_negative": confusion[0][0],
        "false_positive": confusion[0][1],
        "false_negative": confusion[1][0],
        "true_positive": confusion[1][1],
    });
    let text = serde_json::to_string_pretty(&report).expect("json value") + "\n";
    emit(a.out.as_deref(), &text, "eval accuracy", &a)
}
