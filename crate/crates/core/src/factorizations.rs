//! QR by modified Gram-Schmidt and SVD by one-sided Jacobi, both for square
//! complex matrices.

use num_complex::Complex64;

use crate::error::{Result, SefdmError};
use crate::linalg::{inner, vector_norm, ComplexMatrix};

/// Pivots below this fraction of `‖A‖_F` are treated as rank deficiency.
pub const RANK_TOLERANCE: f64 = 1e-13;

/// Jacobi sweep cap.
pub const MAX_SWEEPS: usize = 60;

#[derive(Debug, Clone)]
pub struct QrFactors {
    /// Orthonormal columns spanning the signal space.
    pub q: ComplexMatrix,
    /// Upper triangular with a real positive diagonal.
    pub r: ComplexMatrix,
}

#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: ComplexMatrix,
    /// Singular values, nonincreasing.
    pub sigma: Vec<f64>,
    pub v: ComplexMatrix,
}

impl SvdFactors {
    /// `U · diag(σ) · Vᴴ`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let us = ComplexMatrix::from_fn(self.u.rows(), self.u.cols(), |i, j| self.u[(i, j)] * self.sigma[j]);
        us.matmul(&self.v.adjoint()).expect("conformant SVD factors")
    }
}

/// Modified Gram-Schmidt QR of a square matrix.
///
/// Every column is projected twice against the already accepted basis. A
/// single pass loses orthogonality in proportion to the condition number,
/// and `F^α` reaches condition numbers near 1e13 at `N = 64`, `α = 0.8`.
pub fn mgs_qr(a: &ComplexMatrix) -> Result<QrFactors> {
    if !a.is_square() {
        return Err(SefdmError::dims("square matrix", format!("{}x{}", a.rows(), a.cols())));
    }
    let n = a.cols();
    let threshold = RANK_TOLERANCE * a.frobenius_norm();
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    let mut r = ComplexMatrix::zeros(n, n);

    for j in 0..n {
        let mut v = a.column(j);
        for _pass in 0..2 {
            for (i, q) in basis.iter().enumerate() {
                let coeff = inner(q, &v);
                for (vk, qk) in v.iter_mut().zip(q) {
                    *vk -= coeff * qk;
                }
                r[(i, j)] += coeff;
            }
        }
        let pivot = vector_norm(&v);
        if !(pivot > threshold) {
            return Err(SefdmError::DegenerateMatrix {
                column: j,
                pivot,
                threshold,
            });
        }
        r[(j, j)] = Complex64::new(pivot, 0.0);
        for vk in v.iter_mut() {
            *vk /= pivot;
        }
        basis.push(v);
    }

    let mut q = ComplexMatrix::zeros(n, n);
    for (j, col) in basis.iter().enumerate() {
        q.set_column(j, col);
    }
    Ok(QrFactors { q, r })
}

/// One-sided Jacobi SVD of a square complex matrix.
///
/// Column pairs are rotated until every pair is orthogonal relative to the
/// product of the column norms. Singular values come out sorted descending
/// with the columns of `U` and `V` permuted to match.
pub fn svd_complex(a: &ComplexMatrix) -> Result<SvdFactors> {
    if !a.is_square() {
        return Err(SefdmError::dims("square matrix", format!("{}x{}", a.rows(), a.cols())));
    }
    let n = a.cols();
    let scale = a.frobenius_norm().powi(2);
    let tol = f64::EPSILON * (n.max(1) as f64);

    let mut w: Vec<Vec<Complex64>> = (0..n).map(|j| a.column(j)).collect();
    let mut v: Vec<Vec<Complex64>> = (0..n)
        .map(|j| {
            let mut e = vec![Complex64::new(0.0, 0.0); n];
            e[j] = Complex64::new(1.0, 0.0);
            e
        })
        .collect();
    let mut norms: Vec<f64> = w.iter().map(|c| c.iter().map(|z| z.norm_sqr()).sum()).collect();

    let mut converged = n < 2;
    let mut residual = 0.0;
    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        residual = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                let gamma = inner(&w[p], &w[q]);
                let g = gamma.norm();
                if g == 0.0 {
                    continue;
                }
                residual = residual.max(g / scale);
                if g <= tol * (norms[p] * norms[q]).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (norms[q] - norms[p]) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, c, s, phase);
                rotate(&mut v, p, q, c, s, phase);
                norms[p] = w[p].iter().map(|z| z.norm_sqr()).sum();
                norms[q] = w[q].iter().map(|z| z.norm_sqr()).sum();
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(SefdmError::NoConvergence {
            sweeps: MAX_SWEEPS,
            residual,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    let sigma_raw: Vec<f64> = norms.iter().map(|x| x.sqrt()).collect();
    order.sort_by(|&i, &j| sigma_raw[j].total_cmp(&sigma_raw[i]).then(i.cmp(&j)));

    let sigma: Vec<f64> = order.iter().map(|&j| sigma_raw[j]).collect();
    let sigma_max = sigma.first().copied().unwrap_or(0.0);
    let mut u_cols: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    for (rank, &j) in order.iter().enumerate() {
        let candidate = if sigma[rank] > 0.0 {
            w[j].iter().map(|z| z / sigma[rank]).collect()
        } else {
            Vec::new()
        };
        let tiny = sigma[rank] <= f64::EPSILON * sigma_max;
        u_cols.push(orthonormal_completion(&u_cols, candidate, tiny, n));
    }

    let mut u = ComplexMatrix::zeros(n, n);
    let mut vm = ComplexMatrix::zeros(n, n);
    for (rank, &j) in order.iter().enumerate() {
        u.set_column(rank, &u_cols[rank]);
        vm.set_column(rank, &v[j]);
    }
    Ok(SvdFactors { u, sigma, v: vm })
}

fn rotate(cols: &mut [Vec<Complex64>], p: usize, q: usize, c: f64, s: f64, phase: Complex64) {
    let back = phase.conj();
    let (lo, hi) = cols.split_at_mut(q);
    let (cp, cq) = (&mut lo[p], &mut hi[0]);
    for (xp, xq) in cp.iter_mut().zip(cq.iter_mut()) {
        let a = *xp;
        let b = *xq * back;
        *xp = a * c - b * s;
        *xq = a * s + b * c;
    }
}

/// Re-orthonormalizes `candidate` against `basis`. Columns belonging to
/// vanishing singular values carry no reliable direction and are replaced by
/// the first unit vector that survives projection.
fn orthonormal_completion(basis: &[Vec<Complex64>], candidate: Vec<Complex64>, tiny: bool, n: usize) -> Vec<Complex64> {
    let project = |mut x: Vec<Complex64>| {
        for _pass in 0..2 {
            for b in basis {
                let coeff = inner(b, &x);
                for (xk, bk) in x.iter_mut().zip(b) {
                    *xk -= coeff * bk;
                }
            }
        }
        x
    };
    if !tiny && !candidate.is_empty() {
        let x = project(candidate);
        let norm = vector_norm(&x);
        if norm > 0.5 {
            return x.into_iter().map(|z| z / norm).collect();
        }
    }
    for k in 0..n {
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        e[k] = Complex64::new(1.0, 0.0);
        let x = project(e);
        let norm = vector_norm(&x);
        if norm > 0.5 {
            return x.into_iter().map(|z| z / norm).collect();
        }
    }
    unreachable!("an orthonormal set of fewer than n vectors always has a completion")
}
