//! Residual 1-D CNN: topology, forward pass with activation trace, and
//! exact backpropagation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layer::{ConvLayer, LayerGrads};
use super::real::Real;
use super::tensor::Tensor3;
use crate::error::{Result, SefdmError};
use crate::signal::QPSK_ORDER;

/// RNG stream reserved for weight initialization.
pub(crate) const INIT_STREAM: u64 = 0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    /// Channel count of each scale, strictly increasing.
    pub widths: Vec<usize>,
    pub blocks_per_scale: usize,
    /// Odd kernel size shared by every non-final layer.
    pub kernel: usize,
}

impl Default for Architecture {
    /// Three scales of widths 24, 48, 96 with three residual blocks each.
    fn default() -> Self {
        Self {
            widths: vec![24, 48, 96],
            blocks_per_scale: 3,
            kernel: 3,
        }
    }
}

impl Architecture {
    pub fn new(widths: Vec<usize>, blocks_per_scale: usize, kernel: usize) -> Result<Self> {
        let arch = Self {
            widths,
            blocks_per_scale,
            kernel,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() {
            return Err(SefdmError::param("at least one scale width is required"));
        }
        if self.widths[0] == 0 || self.widths.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SefdmError::param(format!(
                "scale widths must be positive and strictly increasing, got {:?}",
                self.widths
            )));
        }
        if self.kernel.is_multiple_of(2) {
            return Err(SefdmError::param(format!("kernel size must be odd, got {}", self.kernel)));
        }
        Ok(())
    }

    /// `scales · (2·blocks + 1) + 1`.
    pub fn layer_count(&self) -> usize {
        self.widths.len() * (2 * self.blocks_per_scale + 1) + 1
    }
}

/// Role of layers in the computation graph, in topological order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Width-changing convolution with ReLU.
    Expand(usize),
    /// Two conv+ReLU layers whose input is added to their output.
    Residual(usize, usize),
    /// Kernel-1 projection onto class logits, no activation.
    Head(usize),
}

fn plan(arch: &Architecture) -> Vec<Stage> {
    let mut stages = Vec::new();
    let mut next = 0;
    for _ in &arch.widths {
        stages.push(Stage::Expand(next));
        next += 1;
        for _ in 0..arch.blocks_per_scale {
            stages.push(Stage::Residual(next, next + 1));
            next += 2;
        }
    }
    stages.push(Stage::Head(next));
    stages
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<T = f32> {
    pub n: usize,
    pub alpha: f64,
    pub classes: usize,
    pub seed: u64,
    pub arch: Architecture,
    pub layers: Vec<ConvLayer<T>>,
    stages: Vec<Stage>,
}

/// Builds the residual CNN with He-initialized weights drawn from `seed`.
pub fn build_model(n: usize, alpha: f64, arch: &Architecture, classes: usize, seed: u64) -> Result<Model> {
    Model::<f32>::initialized(n, alpha, arch.clone(), classes, seed)
}

impl<T: Real> Model<T> {
    pub fn initialized(n: usize, alpha: f64, arch: Architecture, classes: usize, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(INIT_STREAM);
        let mut layers = Vec::with_capacity(arch.layer_count());
        let mut channels = 2;
        for &width in &arch.widths {
            layers.push(ConvLayer::he_normal(width, channels, arch.kernel, &mut rng)?);
            channels = width;
            for _ in 0..2 * arch.blocks_per_scale {
                layers.push(ConvLayer::he_normal(width, width, arch.kernel, &mut rng)?);
            }
        }
        layers.push(ConvLayer::he_normal(classes, channels, 1, &mut rng)?);
        Self::from_layers(n, alpha, arch, classes, seed, layers)
    }

    /// Assembles a model from explicit layers, checking them against the topology.
    pub fn from_layers(
        n: usize,
        alpha: f64,
        arch: Architecture,
        classes: usize,
        seed: u64,
        layers: Vec<ConvLayer<T>>,
    ) -> Result<Self> {
        arch.validate()?;
        if n == 0 {
            return Err(SefdmError::param("model needs at least one subcarrier"));
        }
        if classes < 2 {
            return Err(SefdmError::param(format!("need at least two classes, got {classes}")));
        }
        if layers.len() != arch.layer_count() {
            return Err(SefdmError::dims(format!("{} layers", arch.layer_count()), layers.len()));
        }
        let mut expected = Vec::with_capacity(layers.len());
        let mut channels = 2;
        for &width in &arch.widths {
            expected.push((width, channels, arch.kernel));
            channels = width;
            for _ in 0..2 * arch.blocks_per_scale {
                expected.push((width, width, arch.kernel));
            }
        }
        expected.push((classes, channels, 1));
        for (i, (layer, want)) in layers.iter().zip(&expected).enumerate() {
            let got = (layer.out_channels, layer.in_channels, layer.kernel);
            if got != *want {
                return Err(SefdmError::dims(format!("layer {i} shaped {want:?}"), format!("{got:?}")));
            }
        }
        let stages = plan(&arch);
        Ok(Self {
            n,
            alpha,
            classes,
            seed,
            arch,
            layers,
            stages,
        })
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(ConvLayer::parameter_count).sum()
    }

    pub fn cast<U: Real>(&self) -> Model<U> {
        Model {
            n: self.n,
            alpha: self.alpha,
            classes: self.classes,
            seed: self.seed,
            arch: self.arch.clone(),
            layers: self.layers.iter().map(ConvLayer::cast).collect(),
            stages: self.stages.clone(),
        }
    }

    fn check_input(&self, x: &Tensor3<T>) -> Result<()> {
        if x.channels != 2 || x.length != self.n {
            return Err(SefdmError::dims(
                format!("(batch, 2, {}) input", self.n),
                format!("{:?}", x.shape()),
            ));
        }
        Ok(())
    }

    /// Per-position class logits, shape `(batch, classes, N)`.
    pub fn forward(&self, x: &Tensor3<T>) -> Result<Tensor3<T>> {
        self.check_input(x)?;
        let (logits, _) = self.run_cm(&x.to_channel_major(), x.batch, false);
        Ok(Tensor3::from_channel_major(&logits, x.batch, self.classes, self.n))
    }

    /// Forward pass that also records what [`backward`] needs.
    pub fn forward_trace(&self, x: &Tensor3<T>) -> Result<(Tensor3<T>, Trace<T>)> {
        self.check_input(x)?;
        let (logits, trace) = self.run_cm(&x.to_channel_major(), x.batch, true);
        Ok((Tensor3::from_channel_major(&logits, x.batch, self.classes, self.n), trace))
    }

    pub(crate) fn run_cm(&self, input: &[T], batch: usize, keep: bool) -> (Vec<T>, Trace<T>) {
        let len = self.n;
        let mut trace = Trace {
            batch,
            len,
            layers: Vec::new(),
        };
        let mut record = |unfolded: Vec<T>, output: &Vec<T>| {
            if keep {
                trace.layers.push(LayerTrace {
                    unfolded,
                    output: output.clone(),
                });
            }
        };
        let mut x = input.to_vec();
        for stage in &self.stages {
            match *stage {
                Stage::Expand(i) => {
                    let (u, y) = self.layers[i].forward_cm(&x, batch, len, true);
                    record(u, &y);
                    x = y;
                }
                Stage::Residual(i, j) => {
                    let (u1, h1) = self.layers[i].forward_cm(&x, batch, len, true);
                    record(u1, &h1);
                    let (u2, mut h2) = self.layers[j].forward_cm(&h1, batch, len, true);
                    record(u2, &h2);
                    for (o, s) in h2.iter_mut().zip(&x) {
                        *o = *o + *s;
                    }
                    x = h2;
                }
                Stage::Head(i) => {
                    let (u, y) = self.layers[i].forward_cm(&x, batch, len, false);
                    record(u, &y);
                    x = y;
                }
            }
        }
        (x, trace)
    }

    /// Backpropagates channel-major logit gradients through a trace.
    pub(crate) fn backward_cm(&self, trace: &Trace<T>, grad_logits: &[T]) -> Result<Gradients<T>> {
        if trace.layers.len() != self.layers.len() {
            return Err(SefdmError::Usage(
                "backward needs the activation trace of a forward pass on this model".into(),
            ));
        }
        let (batch, len) = (trace.batch, trace.len);
        if grad_logits.len() != self.classes * batch * len {
            return Err(SefdmError::dims(self.classes * batch * len, grad_logits.len()));
        }
        let mut grads: Vec<Option<LayerGrads<T>>> = vec![None; self.layers.len()];
        let mut upstream = grad_logits.to_vec();

        // Gradient w.r.t. a ReLU layer's output becomes the pre-activation
        // gradient by masking where the output was clamped.
        let relu_mask = |dy: &mut Vec<T>, out: &[T]| {
            for (d, o) in dy.iter_mut().zip(out) {
                if !(*o > T::zero()) {
                    *d = T::zero();
                }
            }
        };

        for stage in self.stages.iter().rev() {
            match *stage {
                Stage::Head(i) => {
                    let (g, dx) = self.layers[i].backward_cm(&trace.layers[i].unfolded, &upstream, batch, len);
                    grads[i] = Some(g);
                    upstream = dx;
                }
                Stage::Expand(i) => {
                    relu_mask(&mut upstream, &trace.layers[i].output);
                    let (g, dx) = self.layers[i].backward_cm(&trace.layers[i].unfolded, &upstream, batch, len);
                    grads[i] = Some(g);
                    upstream = dx;
                }
                Stage::Residual(i, j) => {
                    let skip = upstream.clone();
                    let mut d2 = upstream;
                    relu_mask(&mut d2, &trace.layers[j].output);
                    let (g2, mut d1) = self.layers[j].backward_cm(&trace.layers[j].unfolded, &d2, batch, len);
                    relu_mask(&mut d1, &trace.layers[i].output);
                    let (g1, mut dx) = self.layers[i].backward_cm(&trace.layers[i].unfolded, &d1, batch, len);
                    for (a, s) in dx.iter_mut().zip(&skip) {
                        *a = *a + *s;
                    }
                    grads[i] = Some(g1);
                    grads[j] = Some(g2);
                    upstream = dx;
                }
            }
        }
        Ok(Gradients {
            layers: grads.into_iter().map(|g| g.expect("every layer visited")).collect(),
        })
    }
}

/// Cached activations of one forward pass.
#[derive(Debug, Clone, Default)]
pub struct Trace<T = f32> {
    batch: usize,
    len: usize,
    layers: Vec<LayerTrace<T>>,
}

#[derive(Debug, Clone)]
struct LayerTrace<T> {
    unfolded: Vec<T>,
    output: Vec<T>,
}

/// Parameter gradients, one entry per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T = f32> {
    pub layers: Vec<LayerGrads<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(model: &Model<T>) -> Self {
        Self {
            layers: model.layers.iter().map(LayerGrads::zeros_like).collect(),
        }
    }

    pub(crate) fn add_assign(&mut self, other: &Gradients<T>) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.add_assign(b);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }
}

/// Exact parameter gradients for `grad_logits = ∂loss/∂logits`, given the
/// trace recorded by [`Model::forward_trace`] on the same input.
pub fn backward<T: Real>(model: &Model<T>, trace: &Trace<T>, grad_logits: &Tensor3<T>) -> Result<Gradients<T>> {
    if grad_logits.channels != model.classes || grad_logits.length != model.n || grad_logits.batch != trace.batch {
        return Err(SefdmError::dims(
            format!("({}, {}, {}) logit gradient", trace.batch, model.classes, model.n),
            format!("{:?}", grad_logits.shape()),
        ));
    }
    model.backward_cm(trace, &grad_logits.to_channel_major())
}

/// QPSK classifier with the default architecture.
pub fn default_model(n: usize, alpha: f64, seed: u64) -> Result<Model> {
    build_model(n, alpha, &Architecture::default(), QPSK_ORDER, seed)
}
