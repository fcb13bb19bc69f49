//! Deep residual 1-D convolutional detector, written from scratch.
//!
//! The observation `y ∈ ℂᴺ` enters as a two-channel real sequence of length
//! `N`. Each scale widens the channels with a conv+ReLU layer and stacks
//! residual blocks of two conv+ReLU layers with an identity skip. Sequence
//! length never changes, so a final kernel-1 projection yields one logit
//! vector per subcarrier.

mod adam;
mod detector;
mod gradcheck;
mod io;
mod layer;
mod loss;
mod model;
mod real;
mod tensor;
mod train;

pub use adam::{adam_step, adam_update, AdamHyper, AdamState};
pub use detector::{detect_cnn, detect_cnn_batch, CnnDetector};
pub use gradcheck::{gradient_check, relative_error, GradCheckReport, GradFault};
pub use io::{load_model, model_from_bytes, model_to_bytes, save_model};
pub use layer::{conv1d_forward, residual_block_forward, ConvLayer, LayerGrads};
pub use loss::{cross_entropy_backward, softmax};
pub use model::{backward, build_model, default_model, Architecture, Gradients, Model, Stage, Trace};
pub use real::Real;
pub use tensor::{observation_to_tensor, observations_to_tensor, tensor_to_complex, Tensor3};
pub use train::{batch_gradients, train, train_with_progress, TrainConfig, TrainOutcome, Trainer, CHUNK};
