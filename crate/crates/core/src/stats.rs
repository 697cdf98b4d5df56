//! Pearson correlation, percentile bootstrap, Cohen's kappa and threshold
//! accuracy.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::UndefinedStatistic("pearson needs at least 2 pairs".into()));
    }
    if x.iter().all(|&v| v == x[0]) || y.iter().all(|&v| v == y[0]) {
        return Err(Error::UndefinedStatistic("pearson of constant input".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedStatistic(
            "pearson of (numerically) constant input".into(),
        ));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            resamples: 10_000,
            level: 0.95,
            seed: 0,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.resamples == 0 {
            return Err(Error::InvalidArgument("bootstrap needs at least one resample".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "level must be in (0, 1), got {}",
                self.level
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapInterval {
    pub lo: f64,
    pub hi: f64,
    /// Resamples where the statistic was defined.
    pub valid: usize,
    pub skipped: usize,
}

/// Percentile bootstrap interval of `statistic` over resamples (with
/// replacement) of `items`.
///
/// Resample `b` draws its indices from a ChaCha8 stream keyed by
/// `(seed, b)`, so the result does not depend on thread scheduling.
/// Resamples where the statistic returns an error are skipped.
pub fn bootstrap_ci<T, F>(items: &[T], statistic: F, config: &BootstrapConfig) -> Result<BootstrapInterval>
where
    T: Clone + Send + Sync,
    F: Fn(&[T]) -> Result<f64> + Sync,
{
    config.validate()?;
    if items.len() < 2 {
        return Err(Error::InvalidArgument("bootstrap needs at least 2 items".into()));
    }
    let n = items.len();
    let stats: Vec<Option<f64>> = (0..config.resamples)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(n),
            |buf, b| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(b as u64);
                buf.clear();
                buf.extend((0..n).map(|_| items[rng.random_range(0..n)].clone()));
                statistic(buf).ok().filter(|v| !v.is_nan())
            },
        )
        .collect();
    let mut values: Vec<f64> = stats.into_iter().flatten().collect();
    let valid = values.len();
    if valid == 0 {
        return Err(Error::UndefinedStatistic(
            "statistic undefined on every resample".into(),
        ));
    }
    values.sort_by(f64::total_cmp);
    let tail = (1.0 - config.level) / 2.0;
    Ok(BootstrapInterval {
        lo: quantile_sorted(&values, tail),
        hi: quantile_sorted(&values, 1.0 - tail),
        valid,
        skipped: config.resamples - valid,
    })
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 >= sorted.len() || frac == 0.0 {
        sorted[i.min(sorted.len() - 1)]
    } else {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    }
}

/// Cohen's kappa for two raters over the categories that occur in either
/// list.
pub fn cohens_kappa<C: Ord>(a: &[C], b: &[C]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptyInput("kappa needs at least one pair".into()));
    }
    let n = a.len() as f64;
    let mut margins: BTreeMap<&C, (u64, u64)> = BTreeMap::new();
    let mut agree = 0u64;
    for (x, y) in a.iter().zip(b) {
        margins.entry(x).or_default().0 += 1;
        margins.entry(y).or_default().1 += 1;
        agree += u64::from(x == y);
    }
    let p_o = agree as f64 / n;
    let p_e: f64 = margins
        .values()
        .map(|&(ca, cb)| (ca as f64 / n) * (cb as f64 / n))
        .sum();
    if p_e >= 1.0 {
        return Err(Error::UndefinedStatistic("kappa with chance agreement 1".into()));
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Fraction of examples where `score > threshold` matches the label.
pub fn accuracy(scores: &[f64], labels: &[u8], threshold: f64) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            actual: labels.len(),
        });
    }
    if scores.is_empty() {
        return Err(Error::EmptyInput("accuracy needs at least one example".into()));
    }
    let correct = scores
        .iter()
        .zip(labels)
        .filter(|&(&s, &l)| u8::from(s > threshold) == l)
        .count();
    Ok(correct as f64 / scores.len() as f64)
}
