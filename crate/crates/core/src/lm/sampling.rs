use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{LanguageModel, TokenId};
use crate::error::{Error, Result};

/// Truncated sampling strategies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingStrategy {
    /// Sample among the `k` highest-ranked tokens.
    TopK(usize),
    /// Sample among the smallest rank prefix whose mass reaches `p`.
    TopP(f64),
}

impl SamplingStrategy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SamplingStrategy::TopK(0) => Err(Error::InvalidArgument("top-k needs k >= 1".into())),
            SamplingStrategy::TopP(p) if !(p > 0.0 && p <= 1.0) => {
                Err(Error::InvalidArgument(format!("top-p needs 0 < p <= 1, got {p}")))
            }
            _ => Ok(()),
        }
    }
}

/// Draws one token after `context`, renormalizing over the truncated set.
pub fn sample_next<M, R>(model: &M, context: &[TokenId], strategy: SamplingStrategy, rng: &mut R) -> Result<TokenId>
where
    M: LanguageModel + ?Sized,
    R: Rng + ?Sized,
{
    strategy.validate()?;
    let mut candidates: Vec<(TokenId, f64)> = Vec::new();
    let mut mass = 0.0;
    let ranked = model.ranked_tokens(context);
    match strategy {
        SamplingStrategy::TopK(k) => {
            for (t, p) in ranked.take(k) {
                mass += p;
                candidates.push((t, p));
            }
        }
        SamplingStrategy::TopP(target) => {
            for (t, p) in ranked {
                mass += p;
                candidates.push((t, p));
                // p = 1 keeps the whole support even if rounding reaches 1 early.
                if mass >= target && target < 1.0 {
                    break;
                }
            }
        }
    }
    let Some(&(last, _)) = candidates.last() else {
        return Err(Error::EmptyInput("model has an empty vocabulary".into()));
    };
    let u = rng.random::<f64>() * mass;
    let mut acc = 0.0;
    for &(t, p) in &candidates {
        acc += p;
        if u < acc {
            return Ok(t);
        }
    }
    Ok(last)
}

/// Generates `n` tokens continuing `prompt`. Returns only the new tokens.
pub fn sample_sequence<M, R>(
    model: &M,
    prompt: &[TokenId],
    n: usize,
    strategy: SamplingStrategy,
    rng: &mut R,
) -> Result<Vec<TokenId>>
where
    M: LanguageModel + ?Sized,
    R: Rng + ?Sized,
{
    strategy.validate()?;
    let keep = model.max_context();
    let mut history = prompt.to_vec();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let ctx = &history[history.len().saturating_sub(keep)..];
        let t = sample_next(model, ctx, strategy, rng)?;
        history.push(t);
        out.push(t);
    }
    Ok(out)
}
