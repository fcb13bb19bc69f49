//! Adam with bias correction.

use super::layer::LayerGrads;
use super::model::{Gradients, Model};
use super::real::Real;
use crate::error::{Result, SefdmError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One Adam update of a flat parameter slice at step `t ≥ 1`.
pub fn adam_update<T: Real>(params: &mut [T], grads: &[T], m: &mut [T], v: &mut [T], t: u64, hp: &AdamHyper) {
    debug_assert!(t >= 1);
    debug_assert!(params.len() == grads.len() && m.len() == grads.len() && v.len() == grads.len());
    let b1 = T::from_f64_lossy(hp.beta1);
    let b2 = T::from_f64_lossy(hp.beta2);
    let one = T::one();
    let c1 = T::from_f64_lossy(1.0 - hp.beta1.powi(t as i32));
    let c2 = T::from_f64_lossy(1.0 - hp.beta2.powi(t as i32));
    let lr = T::from_f64_lossy(hp.learning_rate);
    let eps = T::from_f64_lossy(hp.eps);
    for (((p, &g), mi), vi) in params.iter_mut().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
        *mi = b1 * *mi + (one - b1) * g;
        *vi = b2 * *vi + (one - b2) * g * g;
        let m_hat = *mi / c1;
        let v_hat = *vi / c2;
        *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// First and second moment estimates for every parameter of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T = f32> {
    pub m: Vec<LayerGrads<T>>,
    pub v: Vec<LayerGrads<T>>,
}

impl<T: Real> AdamState<T> {
    pub fn new(model: &Model<T>) -> Self {
        let zeros: Vec<LayerGrads<T>> = model.layers.iter().map(LayerGrads::zeros_like).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// Applies one Adam step to every weight and bias of `model`.
pub fn adam_step<T: Real>(model: &mut Model<T>, grads: &Gradients<T>, state: &mut AdamState<T>, t: u64, hp: &AdamHyper) -> Result<()> {
    if t == 0 {
        return Err(SefdmError::param("Adam step index starts at 1"));
    }
    if grads.layers.len() != model.layers.len() || state.m.len() != model.layers.len() {
        return Err(SefdmError::dims(model.layers.len(), grads.layers.len()));
    }
    for (i, layer) in model.layers.iter_mut().enumerate() {
        let g = &grads.layers[i];
        if g.weights.len() != layer.weights.len() || g.bias.len() != layer.bias.len() {
            return Err(SefdmError::dims(format!("gradient shaped like layer {i}"), "mismatched gradient"));
        }
        adam_update(&mut layer.weights, &g.weights, &mut state.m[i].weights, &mut state.v[i].weights, t, hp);
        adam_update(&mut layer.bias, &g.bias, &mut state.m[i].bias, &mut state.v[i].bias, t, hp);
    }
    Ok(())
}
