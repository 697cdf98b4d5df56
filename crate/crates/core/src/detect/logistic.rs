use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A feature row the logistic model can consume.
pub trait FeatureRow: Sync {
    /// Dimension the row claims; checked against the model.
    fn dim(&self) -> usize;

    /// Calls `f(index, value)` for every (potentially) nonzero entry.
    fn for_each_nonzero(&self, f: impl FnMut(usize, f64));

    fn dot(&self, w: &[f64]) -> f64 {
        let mut s = 0.0;
        self.for_each_nonzero(|j, x| s += w[j] * x);
        s
    }
}

impl FeatureRow for [f64] {
    fn dim(&self) -> usize {
        self.len()
    }

    fn for_each_nonzero(&self, mut f: impl FnMut(usize, f64)) {
        for (j, &x) in self.iter().enumerate() {
            f(j, x);
        }
    }
}

impl FeatureRow for Vec<f64> {
    fn dim(&self) -> usize {
        self.len()
    }

    fn for_each_nonzero(&self, f: impl FnMut(usize, f64)) {
        self.as_slice().for_each_nonzero(f)
    }
}

/// Sparse vector with entries sorted by index.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseVector {
    pub dim: usize,
    pub entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for &(j, x) in &self.entries {
            v[j] = x;
        }
        v
    }
}

impl FeatureRow for SparseVector {
    fn dim(&self) -> usize {
        self.dim
    }

    fn for_each_nonzero(&self, mut f: impl FnMut(usize, f64)) {
        for &(j, x) in &self.entries {
            f(j, x);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    pub lr: f64,
    pub l2: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub standardize: bool,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            lr: 0.1,
            l2: 1e-4,
            max_iters: 10_000,
            tol: 1e-8,
            standardize: true,
        }
    }
}

impl LogisticConfig {
    fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "l2 must be non-negative, got {}",
                self.l2
            )));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "tol must be non-negative, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureScale {
    pub mean: f64,
    pub std: f64,
}

/// Binary logistic regression. With standardization the linear score is
/// `sum_j w_j (x_j - mean_j) / std_j + b`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub feature_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standardization: Option<Vec<FeatureScale>>,
    /// Weights folded with the standardization, for sparse rows.
    #[serde(skip)]
    folded: OnceLock<(Vec<f64>, f64)>,
}

impl PartialEq for LogisticModel {
    fn eq(&self, other: &Self) -> bool {
        self.weights == other.weights
            && self.bias == other.bias
            && self.feature_dim == other.feature_dim
            && self.standardization == other.standardization
    }
}

impl LogisticModel {
    pub fn new(weights: Vec<f64>, bias: f64, standardization: Option<Vec<FeatureScale>>) -> Result<Self> {
        let model = LogisticModel {
            feature_dim: weights.len(),
            weights,
            bias,
            standardization,
            folded: OnceLock::new(),
        };
        model.validate()?;
        Ok(model)
    }

    /// Checks the invariants of a deserialized model.
    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != self.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim,
                actual: self.weights.len(),
            });
        }
        if let Some(scales) = &self.standardization {
            if scales.len() != self.feature_dim {
                return Err(Error::DimensionMismatch {
                    expected: self.feature_dim,
                    actual: scales.len(),
                });
            }
            if scales
                .iter()
                .any(|s| s.std.is_nan() || s.std <= 0.0 || !s.mean.is_finite())
            {
                return Err(Error::InvalidArgument(
                    "standardization needs finite means and std > 0".into(),
                ));
            }
        }
        if self.weights.iter().chain([&self.bias]).any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument("non-finite model parameter".into()));
        }
        Ok(())
    }

    fn folded(&self) -> &(Vec<f64>, f64) {
        self.folded.get_or_init(|| match &self.standardization {
            None => (self.weights.clone(), self.bias),
            Some(scales) => fold(&self.weights, self.bias, scales),
        })
    }

    /// `w . x_standardized + b`.
    pub fn linear<F: FeatureRow + ?Sized>(&self, x: &F) -> Result<f64> {
        if x.dim() != self.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim,
                actual: x.dim(),
            });
        }
        Ok(match &self.standardization {
            None => x.dot(&self.weights) + self.bias,
            Some(scales) if x.dim() <= 64 => {
                // Small dense rows: evaluate the formula directly.
                let mut dense = vec![0.0; x.dim()];
                x.for_each_nonzero(|j, v| dense[j] = v);
                let s: f64 = dense
                    .iter()
                    .zip(&self.weights)
                    .zip(scales)
                    .map(|((&v, &w), sc)| w * ((v - sc.mean) / sc.std))
                    .sum();
                s + self.bias
            }
            Some(_) => {
                let (v, b) = self.folded();
                x.dot(v) + b
            }
        })
    }
}

fn fold(w: &[f64], b: f64, scales: &[FeatureScale]) -> (Vec<f64>, f64) {
    let v: Vec<f64> = w.iter().zip(scales).map(|(&w, s)| w / s.std).collect();
    let offset: f64 = v.iter().zip(scales).map(|(&v, s)| v * s.mean).sum();
    (v, b - offset)
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `sigmoid(w . x_standardized + b)`.
pub fn score_logistic<F: FeatureRow + ?Sized>(model: &LogisticModel, feature: &F) -> Result<f64> {
    Ok(sigmoid(model.linear(feature)?))
}

/// Result of a fit, with the training loss per iteration.
#[derive(Debug, Clone)]
pub struct LogisticFit {
    pub model: LogisticModel,
    pub iterations: usize,
    pub converged: bool,
    /// Regularized mean cross-entropy before each update, plus the final value.
    pub loss_trace: Vec<f64>,
}

pub fn fit_logistic<F: FeatureRow>(features: &[F], labels: &[u8], config: &LogisticConfig) -> Result<LogisticModel> {
    fit_logistic_traced(features, labels, config).map(|f| f.model)
}

/// Full-batch gradient descent on mean binary cross-entropy plus
/// `l2 / 2 * |w|^2` (bias unregularized), from zero weights.
pub fn fit_logistic_traced<F: FeatureRow>(
    features: &[F],
    labels: &[u8],
    config: &LogisticConfig,
) -> Result<LogisticFit> {
    config.validate()?;
    if features.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: features.len(),
            actual: labels.len(),
        });
    }
    let Some(first) = features.first() else {
        return Err(Error::EmptyInput("no training examples".into()));
    };
    let d = first.dim();
    if let Some(bad) = features.iter().find(|f| f.dim() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: bad.dim(),
        });
    }
    if let Some(&l) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::InvalidArgument(format!("labels must be 0 or 1, got {l}")));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::InvalidArgument("training data must contain both classes".into()));
    }
    let n = features.len() as f64;

    let scales = config.standardize.then(|| feature_scales(features, d));
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut grad = vec![0.0; d];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    loop {
        let (v, c) = match &scales {
            Some(s) => fold(&w, b, s),
            None => (w.clone(), b),
        };
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut resid_sum = 0.0;
        let mut loss = 0.0;
        for (x, &y) in features.iter().zip(labels) {
            let z = x.dot(&v) + c;
            let y = f64::from(y);
            // log(1 + e^z) - y z, computed stably.
            loss += softplus(z) - y * z;
            let r = sigmoid(z) - y;
            resid_sum += r;
            x.for_each_nonzero(|j, xj| grad[j] += r * xj);
        }
        let w2: f64 = w.iter().map(|x| x * x).sum();
        trace.push(loss / n + 0.5 * config.l2 * w2);

        for (j, g) in grad.iter_mut().enumerate() {
            let raw = match &scales {
                Some(s) => (*g - s[j].mean * resid_sum) / s[j].std,
                None => *g,
            };
            *g = raw / n + config.l2 * w[j];
        }
        let gb = resid_sum / n;
        let max_norm = grad.iter().fold(gb.abs(), |m, g| m.max(g.abs()));
        if max_norm < config.tol {
            converged = true;
            break;
        }
        if iterations >= config.max_iters {
            break;
        }
        for (wj, gj) in w.iter_mut().zip(&grad) {
            *wj -= config.lr * gj;
        }
        b -= config.lr * gb;
        iterations += 1;
    }
    let model = LogisticModel::new(w, b, scales)?;
    Ok(LogisticFit {
        model,
        iterations,
        converged,
        loss_trace: trace,
    })
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Per-feature mean and population standard deviation; constant features
/// get std 1.
fn feature_scales<F: FeatureRow>(features: &[F], d: usize) -> Vec<FeatureScale> {
    let n = features.len() as f64;
    let mut sum = vec![0.0; d];
    for x in features {
        x.for_each_nonzero(|j, v| sum[j] += v);
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    // Sum of squared deviations, with implicit zeros accounted for.
    let mut sq = vec![0.0; d];
    let mut nz = vec![0usize; d];
    for x in features {
        x.for_each_nonzero(|j, v| {
            sq[j] += (v - mean[j]) * (v - mean[j]);
            nz[j] += 1;
        });
    }
    (0..d)
        .map(|j| {
            let zeros = features.len() - nz[j];
            let var = (sq[j] + zeros as f64 * mean[j] * mean[j]) / n;
            let std = var.sqrt();
            FeatureScale {
                mean: mean[j],
                std: if std > 1e-12 { std } else { 1.0 },
            }
        })
        .collect()
}
