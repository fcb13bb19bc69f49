//! Training loop: random QPSK frames through the SEFDM link at a fixed
//! Eb/N0, categorical cross-entropy, Adam.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::adam::{adam_step, AdamHyper, AdamState};
use super::loss::cross_entropy_cm;
use super::model::{Architecture, Gradients, Model};
use super::tensor::observations_to_tensor;
use crate::error::{Result, SefdmError};
use crate::signal::{ebn0_to_n0, Link, Observation, SefdmConfig, SymbolFrame, QPSK_ORDER};

/// RNG stream for training observations; disjoint from initialization.
const DATA_STREAM: u64 = 1;

/// Samples per gradient work unit. Fixed so the floating-point reduction
/// order does not depend on the number of worker threads.
pub const CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch: usize,
    pub learning_rate: f64,
    pub train_ebn0_db: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub arch: Architecture,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 100_000,
            batch: 256,
            learning_rate: 1e-3,
            train_ebn0_db: 0.0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            arch: Architecture::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 {
            return Err(SefdmError::param("batch size must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(SefdmError::param(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if !self.train_ebn0_db.is_finite() {
            return Err(SefdmError::param("training Eb/N0 must be finite"));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) || !(self.adam_eps > 0.0) {
            return Err(SefdmError::param("Adam betas must lie in [0, 1) and epsilon must be positive"));
        }
        self.arch.validate()
    }

    pub fn adam(&self) -> AdamHyper {
        AdamHyper {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    /// Mean batch loss at every step.
    pub losses: Vec<f64>,
}

/// Stateful trainer; [`train`] drives it for `steps` iterations.
pub struct Trainer {
    pub model: Model,
    link: Link,
    config: SefdmConfig,
    hyper: AdamHyper,
    state: AdamState,
    rng: ChaCha8Rng,
    batch: usize,
    step: usize,
}

impl Trainer {
    pub fn new(cfg: &SefdmConfig, tcfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        tcfg.validate()?;
        let n = cfg.n_subcarriers;
        let model = Model::initialized(n, cfg.alpha, tcfg.arch.clone(), QPSK_ORDER, tcfg.seed)?;
        let link = Link::new(n, cfg.alpha)?;
        let n0 = ebn0_to_n0(tcfg.train_ebn0_db, cfg.bits_per_symbol, 1.0);
        let config = cfg.with_n0(n0)?;
        let mut rng = ChaCha8Rng::seed_from_u64(tcfg.seed);
        rng.set_stream(DATA_STREAM);
        let state = AdamState::new(&model);
        Ok(Self {
            model,
            link,
            config,
            hyper: tcfg.adam(),
            state,
            rng,
            batch: tcfg.batch,
            step: 0,
        })
    }

    pub fn steps_done(&self) -> usize {
        self.step
    }

    /// Draws a fresh batch, updates the model, returns the batch loss.
    pub fn step(&mut self) -> Result<f64> {
        let mut ys = Vec::with_capacity(self.batch);
        let mut labels = Vec::with_capacity(self.batch * self.config.n_subcarriers);
        for _ in 0..self.batch {
            let frame = SymbolFrame::random(self.config.n_subcarriers, &mut self.rng);
            ys.push(self.link.transmit(&frame, self.config, &mut self.rng)?);
            labels.extend(frame.classes());
        }
        let (loss, grads) = batch_gradients(&self.model, &ys, &labels)?;
        if !loss.is_finite() || !grads.is_finite() {
            return Err(SefdmError::Divergence { step: self.step });
        }
        self.step += 1;
        adam_step(&mut self.model, &grads, &mut self.state, self.step as u64, &self.hyper)?;
        Ok(loss)
    }
}

/// Mean loss and its gradient over a batch, computed chunk by chunk and
/// reduced in chunk order.
pub fn batch_gradients(model: &Model, ys: &[Observation], labels: &[usize]) -> Result<(f64, Gradients)> {
    let n = model.n;
    if ys.iter().any(|y| y.len() != n) {
        return Err(SefdmError::dims(format!("observations of length {n}"), "mismatched observation"));
    }
    if labels.len() != ys.len() * n {
        return Err(SefdmError::dims(ys.len() * n, labels.len()));
    }
    let normalizer = (ys.len() * n) as f64;
    let parts: Vec<(f64, Gradients)> = ys
        .par_chunks(CHUNK)
        .zip(labels.par_chunks(CHUNK * n))
        .map(|(chunk, chunk_labels)| {
            let input = observations_to_tensor::<f32>(chunk).to_channel_major();
            let (logits, trace) = model.run_cm(&input, chunk.len(), true);
            let (loss, grad) = cross_entropy_cm(&logits, model.classes, chunk_labels, normalizer)?;
            Ok((loss, model.backward_cm(&trace, &grad)?))
        })
        .collect::<Result<_>>()?;

    let mut total = 0.0;
    let mut grads = Gradients::zeros_like(model);
    for (loss, g) in &parts {
        total += loss;
        grads.add_assign(g);
    }
    Ok((total / normalizer, grads))
}

pub fn train(cfg: &SefdmConfig, tcfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with_progress(cfg, tcfg, |_, _| {})
}

/// [`train`] with a callback receiving `(step, loss)` after every update.
pub fn train_with_progress(cfg: &SefdmConfig, tcfg: &TrainConfig, mut on_step: impl FnMut(usize, f64)) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(cfg, tcfg)?;
    let mut losses = Vec::with_capacity(tcfg.steps);
    for step in 0..tcfg.steps {
        let loss = trainer.step()?;
        on_step(step, loss);
        losses.push(loss);
    }
    Ok(TrainOutcome {
        model: trainer.model,
        losses,
    })
}
