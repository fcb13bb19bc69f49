//! Seeded Monte Carlo bit-error-rate evaluation.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::function::erf::erfc;

use crate::detectors::Detector;
use crate::error::{Result, SefdmError};
use crate::signal::{ebn0_to_n0, Link, SefdmConfig, SymbolFrame};

/// Frames generated and detected together; each batch owns an RNG stream.
pub const FRAMES_PER_BATCH: usize = 256;
/// Batches evaluated (possibly in parallel) between stopping-rule checks.
pub const BATCHES_PER_ROUND: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct BerOptions {
    pub min_bits: u64,
    pub min_errors: u64,
    /// Hard cap on simulated bits per point.
    pub max_bits: u64,
    pub seed: u64,
}

impl BerOptions {
    pub fn new(min_bits: u64, min_errors: u64, seed: u64) -> Self {
        Self {
            min_bits,
            min_errors,
            max_bits: min_bits.saturating_mul(100).max(10_000_000),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerPoint {
    pub ebn0_db: f64,
    pub bits: u64,
    pub errors: u64,
    pub ber: f64,
    /// Stopped by `max_bits` before collecting `min_errors`.
    pub capped: bool,
}

impl BerPoint {
    /// Binomial standard deviation of the estimate at true error rate `p`.
    pub fn binomial_sigma(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.bits as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerCurve {
    pub detector_name: String,
    pub alpha: f64,
    pub n: usize,
    pub points: Vec<BerPoint>,
    pub seed: u64,
}

/// Derived per-point seed: `seed ⊕ splitmix64(index)`.
pub fn point_seed(seed: u64, index: usize) -> u64 {
    let mut z = (index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    seed ^ (z ^ (z >> 31))
}

pub fn run_ber(
    detector: &dyn Detector,
    cfg: &SefdmConfig,
    ebn0_grid_db: &[f64],
    min_bits: u64,
    min_errors: u64,
    seed: u64,
) -> Result<BerCurve> {
    run_ber_with(detector, cfg, ebn0_grid_db, &BerOptions::new(min_bits, min_errors, seed))
}

/// BER at every grid point: bits → QPSK → `F^α` → AWGN → `Qᴴ` → detector.
///
/// Each point simulates until both `min_bits` and `min_errors` are reached
/// or `max_bits` is exhausted. Results depend only on `(detector, cfg,
/// grid, options)`, never on the thread count.
pub fn run_ber_with(detector: &dyn Detector, cfg: &SefdmConfig, ebn0_grid_db: &[f64], opts: &BerOptions) -> Result<BerCurve> {
    cfg.validate()?;
    if opts.min_bits < 10_000 {
        return Err(SefdmError::param(format!("min_bits must be at least 10^4, got {}", opts.min_bits)));
    }
    if ebn0_grid_db.is_empty() || ebn0_grid_db.iter().any(|x| !x.is_finite()) {
        return Err(SefdmError::param("Eb/N0 grid must be nonempty and finite"));
    }
    let link = Link::new(cfg.n_subcarriers, cfg.alpha)?;
    let mut grid = ebn0_grid_db.to_vec();
    grid.sort_by(f64::total_cmp);

    let points = grid
        .iter()
        .enumerate()
        .map(|(i, &ebn0_db)| {
            let n0 = ebn0_to_n0(ebn0_db, cfg.bits_per_symbol, 1.0);
            simulate_point(detector, &link, &cfg.with_n0(n0)?, ebn0_db, point_seed(opts.seed, i), opts)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(BerCurve {
        detector_name: detector.name().to_string(),
        alpha: cfg.alpha,
        n: cfg.n_subcarriers,
        points,
        seed: opts.seed,
    })
}

fn simulate_point(detector: &dyn Detector, link: &Link, cfg: &SefdmConfig, ebn0_db: f64, seed: u64, opts: &BerOptions) -> Result<BerPoint> {
    let mut bits = 0u64;
    let mut errors = 0u64;
    let mut next_batch = 0u64;
    let capped = loop {
        if bits >= opts.min_bits && errors >= opts.min_errors {
            break false;
        }
        if bits >= opts.max_bits {
            break true;
        }
        let counts: Vec<(u64, u64)> = (next_batch..next_batch + BATCHES_PER_ROUND as u64)
            .into_par_iter()
            .map(|b| run_batch(detector, link, cfg, seed, b))
            .collect::<Result<_>>()?;
        next_batch += BATCHES_PER_ROUND as u64;
        for (b, e) in counts {
            bits += b;
            errors += e;
        }
    };
    Ok(BerPoint {
        ebn0_db,
        bits,
        errors,
        ber: errors as f64 / bits as f64,
        capped: capped && errors < opts.min_errors,
    })
}

fn run_batch(detector: &dyn Detector, link: &Link, cfg: &SefdmConfig, seed: u64, batch: u64) -> Result<(u64, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch);
    let mut frames = Vec::with_capacity(FRAMES_PER_BATCH);
    let mut ys = Vec::with_capacity(FRAMES_PER_BATCH);
    for _ in 0..FRAMES_PER_BATCH {
        let frame = SymbolFrame::random(cfg.n_subcarriers, &mut rng);
        ys.push(link.transmit(&frame, *cfg, &mut rng)?);
        frames.push(frame);
    }
    let decided = detector.detect_batch(&ys)?;
    let mut bits = 0u64;
    let mut errors = 0u64;
    for (frame, hat) in frames.iter().zip(&decided) {
        if hat.len() != frame.bits.len() {
            return Err(SefdmError::dims(format!("{} detected bits", frame.bits.len()), hat.len()));
        }
        bits += frame.bits.len() as u64;
        errors += frame.bits.iter().zip(hat).filter(|(a, b)| a != b).count() as u64;
    }
    Ok((bits, errors))
}

/// Gray-mapped QPSK on AWGN: `Q(√(2·Eb/N0)) = erfc(√(Eb/N0))/2`.
pub fn theoretical_qpsk_ber(ebn0_db: f64) -> f64 {
    let ebn0 = 10f64.powf(ebn0_db / 10.0);
    0.5 * erfc(ebn0.sqrt())
}

/// Horizontal dB gap between `curve` and `reference` at `target_ber`.
///
/// The curve is interpolated linearly in log-BER between the first pair of
/// consecutive points that brackets the target; the reference is inverted by
/// bisection and must be decreasing.
pub fn db_loss_at_ber(curve: &BerCurve, reference: impl Fn(f64) -> f64, target_ber: f64) -> Result<f64> {
    if !(target_ber > 0.0 && target_ber < 0.5) {
        return Err(SefdmError::Range(format!("target BER {target_ber} must lie in (0, 0.5)")));
    }
    let x_curve = crossing(&curve.points, target_ber).ok_or_else(|| {
        SefdmError::Range(format!("target BER {target_ber:e} is not bracketed by the measured curve"))
    })?;
    let (mut lo, mut hi) = (-40.0f64, 80.0f64);
    if !(reference(lo) >= target_ber && reference(hi) <= target_ber) {
        return Err(SefdmError::Range(format!("reference does not reach BER {target_ber:e}")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if reference(mid) > target_ber {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(x_curve - 0.5 * (lo + hi))
}

fn crossing(points: &[BerPoint], target: f64) -> Option<f64> {
    points.windows(2).find_map(|w| {
        let (a, b) = (&w[0], &w[1]);
        if !(a.ber >= target && b.ber <= target && b.ber > 0.0) {
            return None;
        }
        if a.ber == b.ber {
            return Some(a.ebn0_db);
        }
        let frac = (target.ln() - a.ber.ln()) / (b.ber.ln() - a.ber.ln());
        Some(a.ebn0_db + frac * (b.ebn0_db - a.ebn0_db))
    })
}

/// Floats in CSV output: 10 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.9e}")
}

pub const BER_CSV_HEADER: &str = "detector,alpha,n,ebn0_db,bits,errors,ber,seed";

/// One row per point, no header.
pub fn write_ber_rows(out: &mut (impl Write + ?Sized), curve: &BerCurve) -> std::io::Result<()> {
    for p in &curve.points {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            curve.detector_name,
            format_float(curve.alpha),
            curve.n,
            format_float(p.ebn0_db),
            p.bits,
            p.errors,
            format_float(p.ber),
            curve.seed
        )?;
    }
    Ok(())
}

/// Closed-form QPSK rows (`detector=theory_qpsk`, zero bit counts).
pub fn write_theory_rows(out: &mut (impl Write + ?Sized), alpha: f64, n: usize, grid: &[f64], seed: u64) -> std::io::Result<()> {
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    for &x in &grid {
        writeln!(
            out,
            "theory_qpsk,{},{},{},0,0,{},{}",
            format_float(alpha),
            n,
            format_float(x),
            format_float(theoretical_qpsk_ber(x)),
            seed
        )?;
    }
    Ok(())
}
