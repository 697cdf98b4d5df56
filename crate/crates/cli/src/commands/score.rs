use qscan_core::corpus::{RawRecords, ScoreTableWriter};
use qscan_core::parallel::{map_ordered, BatchLimits};
use qscan_core::{DetectorFile, ErrorPolicy, ScoredDocument};
use serde::Serialize;

use super::{load_lm, pool};
use crate::args::ScoreArgs;
use crate::error::{CliError, CliResult};
use crate::output::{write_sidecar, AtomicFile};

#[derive(Debug, Default, Serialize)]
struct ScoreStats {
    records: u64,
    scored: u64,
    filtered_short: u64,
    skipped_errors: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    first_error: Option<String>,
}

pub fn run(mut a: ScoreArgs) -> CliResult<()> {
    let detector = DetectorFile::load(&a.detector)?;
    let lm = match (&a.lm, detector.needs_lm()) {
        (Some(p), true) => Some(load_lm(p)?),
        (None, true) => return Err(CliError::usage("this detector needs --lm")),
        (_, false) => None,
    };
    let scorer = detector.bind(lm.as_ref())?;
    let format = a.read.resolve_format(&a.input);
    let opts = a.read.options();
    let name = a.input.display().to_string();
    let records = RawRecords::open(&a.input, format)?;

    let mut out = AtomicFile::create(&a.out)?;
    let mut table = ScoreTableWriter::new(out.writer())?;
    let mut stats = ScoreStats::default();
    let detector_id = scorer.detector_id().to_owned();

    let map = |raw: &qscan_core::corpus::RawRecord| -> qscan_core::Result<Option<ScoredDocument>> {
        let Some(doc) = raw.parse(&name, &opts)? else {
            return Ok(None);
        };
        let score = scorer.score(&doc.text).map_err(|e| qscan_core::Error::Record {
            source_name: name.clone(),
            line: raw.ordinal,
            message: format!("document {:?}: {e}", doc.id),
        })?;
        Ok(Some(ScoredDocument {
            doc_id: doc.id,
            detector_id: detector_id.clone(),
            score,
        }))
    };
    let sink = |outcome: qscan_core::Result<Option<ScoredDocument>>| {
        stats.records += 1;
        match outcome {
            Ok(Some(row)) => {
                stats.scored += 1;
                table.write(&row)
            }
            Ok(None) => {
                stats.filtered_short += 1;
                Ok(())
            }
            Err(e) => {
                stats.skipped_errors += 1;
                if stats.first_error.is_none() {
                    stats.first_error = Some(e.to_string());
                }
                match opts.on_error {
                    ErrorPolicy::Skip => Ok(()),
                    ErrorPolicy::Abort => Err(e),
                }
            }
        }
    };
    pool(a.workers)?.install(|| map_ordered(records, BatchLimits::default(), map, sink))?;
    table.finish()?;
    out.commit()?;
    write_sidecar(&a.out, "score", &a, serde_json::to_value(&stats).expect("plain struct"))
}
