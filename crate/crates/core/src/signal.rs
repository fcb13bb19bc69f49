//! SEFDM signal model: subcarrier matrix, Gray-mapped QPSK, AWGN channel and
//! the orthonormal-projection receiver front end.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SefdmError};
use crate::factorizations::{mgs_qr, QrFactors};
use crate::linalg::ComplexMatrix;
use crate::rates::PowerAllocation;

/// Number of QPSK classes.
pub const QPSK_ORDER: usize = 4;

/// Identity of an experiment: size, compression, constellation and noise level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SefdmConfig {
    pub n_subcarriers: usize,
    pub alpha: f64,
    pub bits_per_symbol: usize,
    /// Variance of each complex noise sample (N0/2 per real dimension).
    pub n0: f64,
}

impl SefdmConfig {
    pub fn new(n_subcarriers: usize, alpha: f64, bits_per_symbol: usize, n0: f64) -> Result<Self> {
        let cfg = Self {
            n_subcarriers,
            alpha,
            bits_per_symbol,
            n0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// QPSK configuration.
    pub fn qpsk(n_subcarriers: usize, alpha: f64, n0: f64) -> Result<Self> {
        Self::new(n_subcarriers, alpha, 2, n0)
    }

    pub fn validate(&self) -> Result<()> {
        check_size_alpha(self.n_subcarriers, self.alpha)?;
        if self.bits_per_symbol != 2 {
            return Err(SefdmError::param(format!(
                "only QPSK (2 bits per symbol) is supported, got {}",
                self.bits_per_symbol
            )));
        }
        if !(self.n0 > 0.0 && self.n0.is_finite()) {
            return Err(SefdmError::param(format!("n0 must be positive and finite, got {}", self.n0)));
        }
        Ok(())
    }

    pub fn bits_per_frame(&self) -> usize {
        self.n_subcarriers * self.bits_per_symbol
    }

    /// Same configuration at a different noise level.
    pub fn with_n0(&self, n0: f64) -> Result<Self> {
        Self::new(self.n_subcarriers, self.alpha, self.bits_per_symbol, n0)
    }
}

fn check_size_alpha(n: usize, alpha: f64) -> Result<()> {
    if n == 0 {
        return Err(SefdmError::param("number of subcarriers must be at least 1"));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(SefdmError::param(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    Ok(())
}

/// Transmitted bits and their QPSK symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame {
    pub symbols: Vec<Complex64>,
    pub bits: Vec<u8>,
}

impl SymbolFrame {
    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        let symbols = gray_map_qpsk(&bits)?;
        Ok(Self { symbols, bits })
    }

    /// Uniform i.i.d. bits for `n` subcarriers.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let bits: Vec<u8> = (0..2 * n).map(|_| rng.random::<bool>() as u8).collect();
        Self::from_bits(bits).expect("even bit count")
    }

    /// Per-subcarrier class labels (Gray symbol index).
    pub fn classes(&self) -> Vec<usize> {
        self.bits.chunks_exact(2).map(|b| bits_to_class(b[0], b[1])).collect()
    }
}

/// Receiver-side observation `y = Qᴴ r`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub y: Vec<Complex64>,
    pub config: SefdmConfig,
}

impl Observation {
    pub fn new(y: Vec<Complex64>, config: SefdmConfig) -> Result<Self> {
        if y.len() != config.n_subcarriers {
            return Err(SefdmError::dims(
                format!("observation of length {}", config.n_subcarriers),
                format!("length {}", y.len()),
            ));
        }
        Ok(Self { y, config })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// `[F^α]_{m,n} = exp(2πiα·mn/N)/√N`.
pub fn build_subcarrier_matrix(n: usize, alpha: f64) -> Result<ComplexMatrix> {
    check_size_alpha(n, alpha)?;
    let scale = 1.0 / (n as f64).sqrt();
    Ok(ComplexMatrix::from_fn(n, n, |m, k| {
        let phase = 2.0 * PI * alpha * ((m * k) as f64) / n as f64;
        Complex64::from_polar(scale, phase)
    }))
}

/// Class index of a bit pair: `2·b0 + b1`.
pub fn bits_to_class(b0: u8, b1: u8) -> usize {
    2 * (b0 as usize & 1) + (b1 as usize & 1)
}

pub fn class_to_bits(class: usize) -> [u8; 2] {
    [((class >> 1) & 1) as u8, (class & 1) as u8]
}

/// Constellation point for a class: 00→(+1+i), 01→(−1+i), 11→(−1−i), 10→(+1−i), all over √2.
pub fn qpsk_point(class: usize) -> Complex64 {
    let [b0, b1] = class_to_bits(class);
    let re = if b1 == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
    let im = if b0 == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
    Complex64::new(re, im)
}

pub fn gray_map_qpsk(bits: &[u8]) -> Result<Vec<Complex64>> {
    if !bits.len().is_multiple_of(2) {
        return Err(SefdmError::param(format!(
            "QPSK mapping needs an even number of bits, got {}",
            bits.len()
        )));
    }
    Ok(bits
        .chunks_exact(2)
        .map(|b| qpsk_point(bits_to_class(b[0], b[1])))
        .collect())
}

/// Quadrant (minimum-distance) decision for each symbol.
pub fn gray_demap_qpsk(symbols: &[Complex64]) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|z| [(z.im < 0.0) as u8, (z.re < 0.0) as u8])
        .collect()
}

/// `F^α s`.
pub fn modulate(f_alpha: &ComplexMatrix, s: &[Complex64]) -> Result<Vec<Complex64>> {
    f_alpha.mul_vec(s)
}

/// Adds i.i.d. circular complex Gaussian noise of variance `n0` per sample.
pub fn awgn_channel<R: Rng + ?Sized>(signal: &[Complex64], n0: f64, rng: &mut R) -> Vec<Complex64> {
    let sd = (n0 / 2.0).sqrt();
    signal
        .iter()
        .map(|x| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            x + Complex64::new(sd * re, sd * im)
        })
        .collect()
}

/// `y = Qᴴ r`.
pub fn project_receiver(q: &ComplexMatrix, received: &[Complex64], config: SefdmConfig) -> Result<Observation> {
    let y = q.adjoint_mul_vec(received)?;
    Observation::new(y, config)
}

/// `F^α · diag(√p) · Vᴴ · s`: stream `i` of `x = Vᴴ s` is carried with power `p_i`.
pub fn precode_and_modulate(
    f_alpha: &ComplexMatrix,
    v: &ComplexMatrix,
    p: &PowerAllocation,
    s: &[Complex64],
) -> Result<Vec<Complex64>> {
    if p.p.len() != v.cols() {
        return Err(SefdmError::dims(
            format!("{} power levels", v.cols()),
            format!("{}", p.p.len()),
        ));
    }
    let x = v.adjoint_mul_vec(s)?;
    let scaled: Vec<Complex64> = x.iter().zip(&p.p).map(|(xi, pi)| xi * pi.sqrt()).collect();
    f_alpha.mul_vec(&scaled)
}

/// `N0 = Es / (bits_per_symbol · 10^(Eb/N0 / 10))`.
pub fn ebn0_to_n0(ebn0_db: f64, bits_per_symbol: usize, es: f64) -> f64 {
    es / (bits_per_symbol as f64 * 10f64.powf(ebn0_db / 10.0))
}

/// Precomputed transmitter/receiver pair for one `(N, α)`.
///
/// Holds `F^α` and its QR factors so frames can be pushed through the
/// modulate → AWGN → project chain without refactorizing.
#[derive(Debug, Clone)]
pub struct Link {
    pub f_alpha: ComplexMatrix,
    pub qr: QrFactors,
    n: usize,
    alpha: f64,
}

impl Link {
    pub fn new(n: usize, alpha: f64) -> Result<Self> {
        let f_alpha = build_subcarrier_matrix(n, alpha)?;
        let qr = mgs_qr(&f_alpha)?;
        Ok(Self { f_alpha, qr, n, alpha })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Modulates `frame`, adds noise at `config.n0` and projects onto `Qᴴ`.
    pub fn transmit<R: Rng + ?Sized>(&self, frame: &SymbolFrame, config: SefdmConfig, rng: &mut R) -> Result<Observation> {
        if config.n_subcarriers != self.n {
            return Err(SefdmError::dims(format!("N = {}", self.n), format!("N = {}", config.n_subcarriers)));
        }
        let tx = modulate(&self.f_alpha, &frame.symbols)?;
        let rx = awgn_channel(&tx, config.n0, rng);
        project_receiver(&self.qr.q, &rx, config)
    }

    /// Noiseless observation `R s`.
    pub fn noiseless(&self, frame: &SymbolFrame, config: SefdmConfig) -> Result<Observation> {
        let y = self.qr.r.mul_vec(&frame.symbols)?;
        Observation::new(y, config)
    }
}
