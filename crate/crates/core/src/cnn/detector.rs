use super::model::Model;
use super::tensor::observations_to_tensor;
use crate::detectors::Detector;
use crate::error::{Result, SefdmError};
use crate::signal::{class_to_bits, Observation};

/// Observations per inference batch.
const INFER_BATCH: usize = 256;

/// Per-position argmax over the logits, mapped to Gray bits.
pub fn detect_cnn(model: &Model, y: &Observation) -> Result<Vec<u8>> {
    Ok(detect_cnn_batch(model, std::slice::from_ref(y))?.pop().expect("one frame"))
}

pub fn detect_cnn_batch(model: &Model, ys: &[Observation]) -> Result<Vec<Vec<u8>>> {
    if let Some(y) = ys.iter().find(|y| y.len() != model.n || y.config.n_subcarriers != model.n) {
        return Err(SefdmError::dims(format!("N = {} (model)", model.n), format!("N = {}", y.len())));
    }
    let mut out = Vec::with_capacity(ys.len());
    for chunk in ys.chunks(INFER_BATCH) {
        let input = observations_to_tensor::<f32>(chunk).to_channel_major();
        let (logits, _) = model.run_cm(&input, chunk.len(), false);
        let cols = chunk.len() * model.n;
        for b in 0..chunk.len() {
            let mut bits = Vec::with_capacity(2 * model.n);
            for t in 0..model.n {
                let col = b * model.n + t;
                let mut best = 0;
                for c in 1..model.classes {
                    if logits[c * cols + col] > logits[best * cols + col] {
                        best = c;
                    }
                }
                bits.extend(class_to_bits(best));
            }
            out.push(bits);
        }
    }
    Ok(out)
}

/// Trained network as a [`Detector`].
#[derive(Debug, Clone)]
pub struct CnnDetector {
    pub model: Model,
}

impl CnnDetector {
    pub fn new(model: Model) -> Self {
        Self { model }
    }
}

impl Detector for CnnDetector {
    fn name(&self) -> &str {
        "cnn"
    }

    fn detect(&self, y: &Observation) -> Result<Vec<u8>> {
        detect_cnn(&self.model, y)
    }

    fn detect_batch(&self, ys: &[Observation]) -> Result<Vec<Vec<u8>>> {
        detect_cnn_batch(&self.model, ys)
    }
}
