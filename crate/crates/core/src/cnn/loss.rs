//! Categorical cross-entropy over per-position class logits.

use super::real::Real;
use super::tensor::Tensor3;
use crate::error::{Result, SefdmError};

/// Mean negative log-likelihood over batch and positions, with its gradient
/// `(softmax − onehot)/(batch·N)`. `labels` is `batch × N`, row-major.
pub fn cross_entropy_backward<T: Real>(logits: &Tensor3<T>, labels: &[usize]) -> Result<(f64, Tensor3<T>)> {
    let (batch, classes, len) = logits.shape();
    if labels.len() != batch * len {
        return Err(SefdmError::dims(format!("{} labels", batch * len), labels.len()));
    }
    let cm = logits.to_channel_major();
    let normalizer = (batch * len) as f64;
    let (sum, grad) = cross_entropy_cm(&cm, classes, labels, normalizer)?;
    Ok((sum / normalizer, Tensor3::from_channel_major(&grad, batch, classes, len)))
}

/// Channel-major core. Returns the *summed* loss and the gradient of
/// `sum / normalizer`.
pub(crate) fn cross_entropy_cm<T: Real>(logits: &[T], classes: usize, labels: &[usize], normalizer: f64) -> Result<(f64, Vec<T>)> {
    let cols = labels.len();
    debug_assert_eq!(logits.len(), classes * cols);
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(SefdmError::Range(format!("label {bad} outside [0, {classes})")));
    }
    let scale = T::from_f64_lossy(1.0 / normalizer);
    let mut grad = vec![T::zero(); logits.len()];
    let mut total = 0.0f64;
    let mut probs = vec![T::zero(); classes];
    for (col, &label) in labels.iter().enumerate() {
        let mut max = T::neg_infinity();
        for c in 0..classes {
            max = max.max(logits[c * cols + col]);
        }
        let mut denom = T::zero();
        for (c, p) in probs.iter_mut().enumerate() {
            *p = (logits[c * cols + col] - max).exp();
            denom = denom + *p;
        }
        let log_denom = denom.ln();
        total += (log_denom - (logits[label * cols + col] - max)).to_f64_lossy();
        for (c, p) in probs.iter().enumerate() {
            let mut g = *p / denom;
            if c == label {
                g = g - T::one();
            }
            grad[c * cols + col] = g * scale;
        }
    }
    Ok((total, grad))
}

/// Per-position softmax probabilities.
pub fn softmax<T: Real>(logits: &Tensor3<T>) -> Tensor3<T> {
    let mut out = logits.clone();
    for b in 0..logits.batch {
        for t in 0..logits.length {
            let max = (0..logits.channels).map(|c| logits.get(b, c, t)).fold(T::neg_infinity(), T::max);
            let exps: Vec<T> = (0..logits.channels).map(|c| (logits.get(b, c, t) - max).exp()).collect();
            let denom: T = exps.iter().copied().sum();
            for (c, e) in exps.into_iter().enumerate() {
                out.set(b, c, t, e / denom);
            }
        }
    }
    out
}
