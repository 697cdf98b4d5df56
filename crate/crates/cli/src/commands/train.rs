use qscan_core::detect::{
    fit_logistic_traced, fit_tfidf, gltr_featurize, score_logistic, tfidf_vector, validate_bucket_bounds, FeatureRow,
    LmSignature, LogisticFit, SparseVector,
};
use qscan_core::lm::LanguageModel;
use qscan_core::stats::accuracy;
use qscan_core::{DetectorFile, DetectorKind, Document, LogisticConfig};
use rayon::prelude::*;

use super::{load_lm, pool, read_documents};
use crate::args::{TrainGltrArgs, TrainSpamArgs};
use crate::error::{CliError, CliResult};
use crate::output::{write_atomic, write_sidecar};

/// Optimizer defaults of the spam baseline. TF-IDF rows are unit vectors, so
/// the gradient is 1/4-Lipschitz and a large fixed step is stable; sparse
/// rows are kept unstandardized.
pub fn spam_defaults() -> LogisticConfig {
    LogisticConfig {
        lr: 4.0,
        l2: 1e-5,
        max_iters: 2000,
        tol: 1e-6,
        standardize: false,
    }
}

fn fit_summary<F: FeatureRow>(fit: &LogisticFit, features: &[F], labels: &[u8]) -> CliResult<serde_json::Value> {
    let scores = features
        .iter()
        .map(|f| score_logistic(&fit.model, f))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(serde_json::json!({
        "iterations": fit.iterations,
        "converged": fit.converged,
        "final_loss": fit.loss_trace.last().copied(),
        "train_accuracy": accuracy(&scores, labels, 0.5)?,
    }))
}

fn labelled<'a>(neg: &'a [Document], pos: &'a [Document]) -> (Vec<&'a Document>, Vec<u8>) {
    let docs = neg.iter().chain(pos).collect();
    let labels = std::iter::repeat_n(0, neg.len())
        .chain(std::iter::repeat_n(1, pos.len()))
        .collect();
    (docs, labels)
}

pub fn gltr(mut a: TrainGltrArgs) -> CliResult<()> {
    let lm = load_lm(&a.lm)?;
    let v = lm.vocab_size();
    // The last bucket always ends at |V|; requested bounds at or past it are
    // folded into that bucket.
    a.bucket_bounds.retain(|&b| b < v);
    a.bucket_bounds.push(v);
    validate_bucket_bounds(&a.bucket_bounds, v).map_err(|e| CliError::usage(e.to_string()))?;
    let (human, human_stats) = read_documents(&a.human, &mut a.read)?;
    let (machine, machine_stats) = read_documents(&a.machine, &mut a.read)?;
    let (docs, labels) = labelled(&human, &machine);
    let bounds = &a.bucket_bounds;
    let features: Vec<Vec<f64>> = pool(a.workers)?.install(|| {
        docs.par_iter()
            .map(|d| {
                let ids = lm.vocabulary().encode_text(&d.text);
                gltr_featurize(&ids, &lm, bounds)
                    .map(|f| f.values)
                    .map_err(|e| CliError::input(format!("document {:?}: {e}", d.id)))
            })
            .collect::<CliResult<_>>()
    })?;
    let config = a.optim.resolve(LogisticConfig::default());
    let fit = fit_logistic_traced(&features, &labels, &config)?;
    let summary = fit_summary(&fit, &features, &labels)?;
    let detector = DetectorFile::new(
        a.detector_id.clone(),
        DetectorKind::Gltr {
            bucket_bounds: a.bucket_bounds.clone(),
            lm: LmSignature::of(&lm),
            model: fit.model,
        },
    );
    write_atomic(&a.out, (detector.to_json() + "\n").as_bytes())?;
    let stats = serde_json::json!({
        "human": human_stats,
        "machine": machine_stats,
        "fit": summary,
    });
    write_sidecar(&a.out, "train gltr", &a, stats)
}

pub fn spam(mut a: TrainSpamArgs) -> CliResult<()> {
    let (ham, ham_stats) = read_documents(&a.ham, &mut a.read)?;
    let (spam, spam_stats) = read_documents(&a.spam, &mut a.read)?;
    // Label 1 is not-spam.
    let (docs, labels) = labelled(&spam, &ham);
    let vocab = fit_tfidf(docs.iter().map(|d| d.text.as_str()), a.vocab_size)?;
    let features: Vec<SparseVector> =
        pool(a.workers)?.install(|| docs.par_iter().map(|d| tfidf_vector(&vocab, &d.text)).collect());
    let config = a.optim.resolve(spam_defaults());
    let fit = fit_logistic_traced(&features, &labels, &config)?;
    let summary = fit_summary(&fit, &features, &labels)?;
    let detector = DetectorFile::new(
        a.detector_id.clone(),
        DetectorKind::Spam {
            vocab,
            model: fit.model,
        },
    );
    write_atomic(&a.out, (detector.to_json() + "\n").as_bytes())?;
    let stats = serde_json::json!({
        "ham": ham_stats,
        "spam": spam_stats,
        "fit": summary,
    });
    write_sidecar(&a.out, "train spam", &a, stats)
}
