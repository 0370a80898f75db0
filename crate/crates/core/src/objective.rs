//! Cross-entropy data loss, the prior-regularized total objective, and
//! accuracy.

use crate::dataset::Dataset;
use crate::{DefaultPrior, Error, Matrix, Mlp, Result};

/// Probabilities are clamped to at least this before taking logs.
pub const LOG_CLAMP: f64 = 1e-12;

/// `-ln p[target]` for a one-hot target given as a class index.
pub fn cross_entropy(probs: &[f64], target: usize) -> f64 {
    -probs[target].max(LOG_CLAMP).ln()
}

/// Summed cross-entropy over heads.
pub fn cross_entropy_heads(probs: &[Vec<f64>], targets: &[usize]) -> f64 {
    probs
        .iter()
        .zip(targets)
        .map(|(p, &t)| cross_entropy(p, t))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub data: f64,
    /// Unscaled prior loss; 0 without a prior.
    pub prior: f64,
    pub total: f64,
    pub lambda: f64,
}

impl LossBreakdown {
    pub fn new(data: f64, prior: f64, lambda: f64) -> Self {
        LossBreakdown {
            data,
            prior,
            total: data + lambda * prior,
            lambda,
        }
    }
}

/// `data + λ · prior(w, b)`; without a prior the total is the data loss.
pub fn total_loss(
    data: f64,
    prior: Option<&DefaultPrior>,
    w: &Matrix,
    b: &[f64],
) -> Result<LossBreakdown> {
    match prior {
        Some(p) => Ok(LossBreakdown::new(data, p.loss(w, b)?, p.lambda())),
        None => Ok(LossBreakdown::new(data, 0.0, 0.0)),
    }
}

/// Percentage of correctly classified examples, per head.
pub fn accuracy(m: &Mlp, d: &Dataset) -> Result<Vec<f64>> {
    if d.is_empty() {
        return Err(Error::config("accuracy of an empty dataset"));
    }
    let heads = m.config().heads;
    let mut correct = vec![0usize; heads];
    for ex in d.examples() {
        let predicted = m.classify(&ex.input)?;
        for (c, (p, t)) in correct
            .iter_mut()
            .zip(predicted.iter().zip(Dataset::targets(ex)))
        {
            if *p == t {
                *c += 1;
            }
        }
    }
    Ok(correct
        .into_iter()
        .map(|c| 100.0 * c as f64 / d.len() as f64)
        .collect())
}
