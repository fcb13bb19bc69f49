//! Classical detectors behind the common [`Detector`] interface.

use num_complex::Complex64;

use crate::error::{Result, SefdmError};
use crate::linalg::ComplexMatrix;
use crate::signal::{class_to_bits, gray_demap_qpsk, qpsk_point, Observation, QPSK_ORDER};

/// Default cap on N for exhaustive search (4^10 candidates per frame).
pub const MLD_DEFAULT_CAP: usize = 10;

/// Maps an observation to `N · bits_per_symbol` hard bits.
pub trait Detector: Send + Sync {
    fn name(&self) -> &str;

    fn detect(&self, y: &Observation) -> Result<Vec<u8>>;

    /// Batched detection; detectors with vectorized inference override this.
    fn detect_batch(&self, ys: &[Observation]) -> Result<Vec<Vec<u8>>> {
        ys.iter().map(|y| self.detect(y)).collect()
    }
}

/// Per-subcarrier quadrant decision then Gray demap.
pub fn detect_hard(y: &Observation) -> Vec<u8> {
    gray_demap_qpsk(&y.y)
}

/// Exhaustive maximum-likelihood detection: `argmin_s ‖y − R s‖²` over all
/// `4^N` QPSK vectors.
///
/// Ties go to the lowest candidate index, where the index is the frame's
/// `2N` bits read as a big-endian binary number.
pub fn detect_mld(y: &Observation, r: &ComplexMatrix, max_n: usize) -> Result<Vec<u8>> {
    let n = y.len();
    if n > max_n {
        return Err(SefdmError::ComplexityGuard { n, cap: max_n });
    }
    if r.rows() != n || r.cols() != n {
        return Err(SefdmError::dims(format!("{n}x{n} projection matrix"), format!("{}x{}", r.rows(), r.cols())));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let classes = if r.is_upper_triangular() {
        TriangularSearch::new(&y.y, r).run()
    } else {
        brute_force(&y.y, r)
    };
    Ok(classes.iter().flat_map(|&c| class_to_bits(c)).collect())
}

fn candidate_index(classes: &[usize]) -> u64 {
    classes.iter().fold(0u64, |acc, &c| (acc << 2) | c as u64)
}

fn brute_force(y: &[Complex64], r: &ComplexMatrix) -> Vec<usize> {
    let n = y.len();
    let total = 1u64 << (2 * n);
    let mut best = (f64::INFINITY, 0u64);
    let mut s = vec![Complex64::new(0.0, 0.0); n];
    for idx in 0..total {
        for (k, sk) in s.iter_mut().enumerate() {
            *sk = qpsk_point(((idx >> (2 * (n - 1 - k))) & 3) as usize);
        }
        let rs = r.mul_vec(&s).expect("square");
        let d: f64 = y.iter().zip(&rs).map(|(a, b)| (a - b).norm_sqr()).sum();
        if d < best.0 {
            best = (d, idx);
        }
    }
    (0..n).map(|k| ((best.1 >> (2 * (n - 1 - k))) & 3) as usize).collect()
}

/// Depth-first enumeration exploiting the triangular structure of `R`:
/// row `i` of `y − R s` only depends on `s_i … s_{N−1}`, so the partial
/// distance of a prefix is shared by all its completions. Every leaf is
/// still visited.
struct TriangularSearch<'a> {
    y: &'a [Complex64],
    r: &'a ComplexMatrix,
    points: [Complex64; QPSK_ORDER],
    chosen: Vec<usize>,
    best_dist: f64,
    best_index: u64,
    best: Vec<usize>,
}

impl<'a> TriangularSearch<'a> {
    fn new(y: &'a [Complex64], r: &'a ComplexMatrix) -> Self {
        let n = y.len();
        Self {
            y,
            r,
            points: [qpsk_point(0), qpsk_point(1), qpsk_point(2), qpsk_point(3)],
            chosen: vec![0; n],
            best_dist: f64::INFINITY,
            best_index: u64::MAX,
            best: vec![0; n],
        }
    }

    fn run(mut self) -> Vec<usize> {
        let n = self.y.len();
        self.descend(n - 1, 0.0);
        self.best
    }

    fn descend(&mut self, row: usize, partial: f64) {
        let n = self.y.len();
        // Interference from the already fixed symbols s_{row+1..}.
        let mut residual = self.y[row];
        for k in row + 1..n {
            residual -= self.r[(row, k)] * self.points[self.chosen[k]];
        }
        let diag = self.r[(row, row)];
        for class in 0..QPSK_ORDER {
            let d = partial + (residual - diag * self.points[class]).norm_sqr();
            self.chosen[row] = class;
            if row == 0 {
                let idx = candidate_index(&self.chosen);
                if d < self.best_dist || (d == self.best_dist && idx < self.best_index) {
                    self.best_dist = d;
                    self.best_index = idx;
                    self.best.copy_from_slice(&self.chosen);
                }
            } else {
                self.descend(row - 1, d);
            }
        }
    }
}

/// The OFDM baseline detector.
#[derive(Debug, Clone, Copy, Default)]
pub struct HardDetector;

impl Detector for HardDetector {
    fn name(&self) -> &str {
        "hard"
    }

    fn detect(&self, y: &Observation) -> Result<Vec<u8>> {
        Ok(detect_hard(y))
    }
}

/// Exhaustive MLD bound to one projection matrix.
#[derive(Debug, Clone)]
pub struct MldDetector {
    r: ComplexMatrix,
    max_n: usize,
}

impl MldDetector {
    pub fn new(r: ComplexMatrix) -> Result<Self> {
        Self::with_cap(r, MLD_DEFAULT_CAP)
    }

    pub fn with_cap(r: ComplexMatrix, max_n: usize) -> Result<Self> {
        if !r.is_square() {
            return Err(SefdmError::dims("square projection matrix", format!("{}x{}", r.rows(), r.cols())));
        }
        if r.rows() > max_n {
            return Err(SefdmError::ComplexityGuard { n: r.rows(), cap: max_n });
        }
        Ok(Self { r, max_n })
    }
}

impl Detector for MldDetector {
    fn name(&self) -> &str {
        "mld"
    }

    fn detect(&self, y: &Observation) -> Result<Vec<u8>> {
        detect_mld(y, &self.r, self.max_n)
    }
}
