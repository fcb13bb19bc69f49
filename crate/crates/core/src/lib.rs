//! Spectrally efficient FDM (SEFDM) laboratory.
//!
//! The crate covers the whole chain from the non-orthogonal subcarrier
//! matrix to trained detectors:
//!
//! ```text
//! bits → QPSK → F^α s → AWGN → Q^H (·) = y → detector → bits
//!                 │
//!                 └─ F^α = QR,  R = UΣV^H  → waterfilling → capacity
//! ```
//!
//! * [`signal`]: subcarrier matrix, Gray-mapped QPSK, AWGN, receiver projection.
//! * [`factorizations`]: modified Gram-Schmidt QR and one-sided Jacobi SVD.
//! * [`rates`]: waterfilling, capacity / equal-power rate and sweeps.
//! * [`detectors`]: exhaustive maximum-likelihood and per-subcarrier hard decision.
//! * [`cnn`]: residual 1-D convolutional detector with backprop and Adam.
//! * [`harness`]: seeded Monte Carlo BER evaluation.

pub mod cnn;
pub mod detectors;
pub mod error;
pub mod factorizations;
pub mod harness;
pub mod linalg;
pub mod rates;
pub mod signal;

pub use error::{Result, SefdmError};
pub use linalg::ComplexMatrix;
pub use num_complex::Complex64;
