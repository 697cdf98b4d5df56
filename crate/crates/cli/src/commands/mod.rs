mod analyze;
mod eval;
mod ingest;
mod lm;
mod score;
mod train;

use std::collections::HashSet;
use std::io::BufReader;
use std::path::Path;

use qscan_core::corpus::{self, IngestStats};
use qscan_core::{Document, NgramModel, ScoredDocument};

use crate::args::{AnalyzeCommand, Command, EvalCommand, LmCommand, ReadOpts, TrainCommand};
use crate::error::{CliError, CliResult};

pub fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Ingest(a) => ingest::run(a),
        Command::Lm(LmCommand::Train(a)) => lm::train(a),
        Command::Lm(LmCommand::Sample(a)) => lm::sample(a),
        Command::Train(TrainCommand::Gltr(a)) => train::gltr(a),
        Command::Train(TrainCommand::Spam(a)) => train::spam(a),
        Command::Score(a) => score::run(a),
        Command::Eval(EvalCommand::Sheet(a)) => eval::sheet(a),
        Command::Eval(EvalCommand::Lq(a)) => eval::lq(a),
        Command::Eval(EvalCommand::Accuracy(a)) => eval::accuracy(a),
        Command::Analyze(c) => match c {
            AnalyzeCommand::Temporal(a) => analyze::temporal(a),
            AnalyzeCommand::Length(a) => analyze::length(a),
            AnalyzeCommand::Topic(a) => analyze::topic(a),
            AnalyzeCommand::Terms(a) => analyze::terms(a),
            AnalyzeCommand::Domain(a) => analyze::domain(a),
            AnalyzeCommand::Percentiles(a) => analyze::percentiles(a),
        },
    }
}

/// Worker pool; 0 threads means one per core.
pub(crate) fn pool(workers: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::runtime(format!("cannot start worker pool: {e}")))
}

/// Reads a whole corpus into memory; used for training sets.
pub(crate) fn read_documents(path: &Path, read: &mut ReadOpts) -> CliResult<(Vec<Document>, IngestStats)> {
    let format = read.resolve_format(path);
    let mut docs = corpus::ingest(path, format, read.options())?;
    let collected = docs.by_ref().collect::<Result<Vec<_>, _>>()?;
    Ok((collected, docs.stats().clone()))
}

pub(crate) fn load_lm(path: &Path) -> CliResult<NgramModel> {
    let f = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(NgramModel::read_from(BufReader::with_capacity(1 << 20, f))?)
}

/// Reads a score table, rejecting duplicate document ids.
pub(crate) fn read_scores(path: &Path) -> CliResult<Vec<ScoredDocument>> {
    let f = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let name = path.display().to_string();
    let rows = corpus::read_score_table(BufReader::new(f), &name)?;
    let mut seen = HashSet::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        if !seen.insert(r.doc_id.as_str()) {
            return Err(CliError::input(format!(
                "{name}: record {}: duplicate doc_id {:?}",
                i + 2,
                r.doc_id
            )));
        }
    }
    Ok(rows)
}

pub(crate) fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::io(path, e)
}
