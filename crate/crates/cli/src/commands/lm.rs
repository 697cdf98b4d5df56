use std::io::{BufRead, BufReader, Write};

use qscan_core::corpus::{self, ErrorPolicy, IngestOptions};
use qscan_core::lm::{sample_sequence, train_ngram, LanguageModel, SamplingStrategy};
use qscan_core::text::{detokenize, lm_tokens};
use qscan_core::Document;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{io_err, load_lm, pool};
use crate::args::{LmFormat, LmSampleArgs, LmTrainArgs};
use crate::error::{CliError, CliResult};
use crate::output::{write_sidecar, AtomicFile};

const DEFAULT_TOP_K: usize = 40;
const SAMPLE_CHUNK: usize = 1024;

fn infer_format(path: &std::path::Path) -> LmFormat {
    if path.is_dir() {
        LmFormat::TextDir
    } else if matches!(path.extension().and_then(|e| e.to_str()), Some("jsonl" | "json")) {
        LmFormat::Jsonl
    } else {
        LmFormat::Text
    }
}

pub fn train(mut a: LmTrainArgs) -> CliResult<()> {
    let format = *a.format.get_or_insert_with(|| infer_format(&a.corpus));
    // Texts stream straight into the counter; a read error stops the stream
    // and is reported after training returns.
    let texts: Box<dyn Iterator<Item = CliResult<String>>> = match format {
        LmFormat::Text => {
            let f = std::fs::File::open(&a.corpus).map_err(io_err(&a.corpus))?;
            let path = a.corpus.clone();
            Box::new(
                BufReader::with_capacity(1 << 20, f)
                    .lines()
                    .map(move |l| l.map_err(|e| CliError::io(&path, e))),
            )
        }
        LmFormat::Jsonl | LmFormat::TextDir => {
            let cf = match format {
                LmFormat::Jsonl => corpus::CorpusFormat::Jsonl,
                _ => corpus::CorpusFormat::TextDir,
            };
            let opts = IngestOptions {
                truncate_at: usize::MAX,
                min_chars: 0,
                on_error: ErrorPolicy::Abort,
            };
            Box::new(corpus::ingest(&a.corpus, cf, opts)?.map(|d| d.map(|d| d.text).map_err(CliError::from)))
        }
    };
    let mut failure = None;
    let tokens = texts
        .map_while(|t| match t {
            Ok(t) => Some(lm_tokens(&t)),
            Err(e) => {
                failure = Some(e);
                None
            }
        })
        .flatten();
    let model = train_ngram(tokens, a.order, a.alpha);
    if let Some(e) = failure {
        return Err(e);
    }
    let model = model?;
    let mut out = AtomicFile::create(&a.out)?;
    model.write_to(out.writer())?;
    out.commit()?;
    let stats = serde_json::json!({
        "vocab_size": model.vocab_size(),
        "total_tokens": model.total_tokens(),
        "contexts_per_level": model.context_counts_per_level(),
    });
    write_sidecar(&a.out, "lm train", &a, stats)
}

pub fn sample(mut a: LmSampleArgs) -> CliResult<()> {
    let strategy = match a.top_p {
        Some(p) => SamplingStrategy::TopP(p),
        None => SamplingStrategy::TopK(*a.top_k.get_or_insert(DEFAULT_TOP_K)),
    };
    strategy.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let lm = load_lm(&a.lm)?;
    let prompt = lm.vocabulary().encode_text(a.prompt.as_deref().unwrap_or(""));
    let pool = pool(a.workers)?;
    let mut out = AtomicFile::create(&a.out)?;
    let mut start = 0;
    while start < a.n_docs {
        let end = (start + SAMPLE_CHUNK).min(a.n_docs);
        let docs: Vec<CliResult<Document>> = pool.install(|| {
            (start..end)
                .into_par_iter()
                .map(|i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
                    rng.set_stream(i as u64);
                    let ids = sample_sequence(&lm, &prompt, a.length, strategy, &mut rng)?;
                    let text = detokenize(&lm.vocabulary().decode(&ids));
                    Ok(Document::new(format!("{}-{i:06}", a.id_prefix), text))
                })
                .collect()
        });
        for doc in docs {
            let w = out.writer();
            serde_json::to_writer(&mut *w, &doc?).map_err(|e| io_err(&a.out)(e.into()))?;
            w.write_all(b"\n").map_err(io_err(&a.out))?;
        }
        start = end;
    }
    out.commit()?;
    let stats = serde_json::json!({
        "strategy": strategy,
        "vocab_size": lm.vocab_size(),
        "documents": a.n_docs,
    });
    write_sidecar(&a.out, "lm sample", &a, stats)
}
