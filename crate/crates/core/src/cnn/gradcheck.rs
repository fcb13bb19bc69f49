//! Central finite-difference check of backpropagated gradients.

use super::loss::cross_entropy_backward;
use super::model::{backward, Gradients, Model};
use super::tensor::Tensor3;
use crate::error::Result;

/// Where the largest discrepancy occurred.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub layer: usize,
    /// Index into the layer's weights followed by its biases.
    pub index: usize,
    pub checked: usize,
}

/// Deliberate corruption of one analytic gradient entry, for negative controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradFault {
    pub layer: usize,
    pub index: usize,
    pub delta: f64,
}

/// Relative error `|a − b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Compares backprop against central differences of the mean cross-entropy
/// for every parameter of `model`.
pub fn gradient_check(model: &Model<f64>, x: &Tensor3<f64>, labels: &[usize], step: f64, fault: Option<GradFault>) -> Result<GradCheckReport> {
    let (logits, trace) = model.forward_trace(x)?;
    let (_, g) = cross_entropy_backward(&logits, labels)?;
    let mut analytic: Gradients<f64> = backward(model, &trace, &g)?;
    if let Some(f) = fault {
        let layer = &mut analytic.layers[f.layer];
        let nw = layer.weights.len();
        if f.index < nw {
            layer.weights[f.index] += f.delta;
        } else {
            layer.bias[f.index - nw] += f.delta;
        }
    }

    let loss_at = |m: &Model<f64>| -> Result<f64> { Ok(cross_entropy_backward(&m.forward(x)?, labels)?.0) };
    let mut probe = model.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        layer: 0,
        index: 0,
        checked: 0,
    };
    for li in 0..model.layers.len() {
        let nw = model.layers[li].weights.len();
        let total = nw + model.layers[li].bias.len();
        for idx in 0..total {
            let orig = param(&probe, li, idx);
            set_param(&mut probe, li, idx, orig + step);
            let plus = loss_at(&probe)?;
            set_param(&mut probe, li, idx, orig - step);
            let minus = loss_at(&probe)?;
            set_param(&mut probe, li, idx, orig);
            let numeric = (plus - minus) / (2.0 * step);
            let a = if idx < nw {
                analytic.layers[li].weights[idx]
            } else {
                analytic.layers[li].bias[idx - nw]
            };
            let err = relative_error(a, numeric, 1e-6);
            report.checked += 1;
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.layer = li;
                report.index = idx;
            }
        }
    }
    Ok(report)
}

fn param(m: &Model<f64>, layer: usize, idx: usize) -> f64 {
    let l = &m.layers[layer];
    if idx < l.weights.len() {
        l.weights[idx]
    } else {
        l.bias[idx - l.weights.len()]
    }
}

fn set_param(m: &mut Model<f64>, layer: usize, idx: usize, v: f64) {
    let l = &mut m.layers[layer];
    let nw = l.weights.len();
    if idx < nw {
        l.weights[idx] = v;
    } else {
        l.bias[idx - nw] = v;
    }
}
