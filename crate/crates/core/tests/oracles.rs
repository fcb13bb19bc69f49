//! Factorizations and capacities checked against independent computations.

use nalgebra::DMatrix;
use num_complex::Complex64;
use sefdm::factorizations::{mgs_qr, svd_complex};
use sefdm::linalg::ComplexMatrix;
use sefdm::rates::{capacity_from_allocation, waterfill, Spectrum};
use sefdm::signal::build_subcarrier_matrix;

fn to_nalgebra(m: &ComplexMatrix) -> DMatrix<Complex64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

fn r_factor(n: usize, alpha: f64) -> ComplexMatrix {
    mgs_qr(&build_subcarrier_matrix(n, alpha).unwrap()).unwrap().r
}

#[test]
fn squared_singular_values_match_hermitian_eigensolver() {
    for &alpha in &[0.8, 0.85, 0.9, 1.0] {
        for n in 1..=8 {
            let r = r_factor(n, alpha);
            let sigma = svd_complex(&r).unwrap().sigma;
            let rn = to_nalgebra(&r);
            let gram = rn.adjoint() * &rn;
            let mut eig: Vec<f64> = gram.symmetric_eigen().eigenvalues.iter().copied().collect();
            eig.sort_by(|a, b| b.total_cmp(a));
            for (s, e) in sigma.iter().zip(&eig) {
                let rel = (s * s - e).abs() / e.abs();
                assert!(rel < 1e-8, "alpha {alpha}, N {n}: σ² = {} vs λ = {e}", s * s);
            }
        }
    }
}

#[test]
fn singular_value_product_matches_lu_determinant() {
    for &alpha in &[0.8, 0.85, 0.9] {
        for n in 2..=12 {
            let r = r_factor(n, alpha);
            let product: f64 = svd_complex(&r).unwrap().sigma.iter().product();
            let det = to_nalgebra(&r).determinant().norm();
            assert!((product - det).abs() <= 1e-9 * det, "alpha {alpha}, N {n}: {product} vs {det}");
            let f_det = to_nalgebra(&build_subcarrier_matrix(n, alpha).unwrap()).determinant().norm();
            assert!((f_det - det).abs() <= 1e-8 * det);
        }
    }
}

#[test]
fn residuals_across_the_parameter_grid() {
    for &alpha in &[0.8, 0.85, 0.9, 1.0] {
        for n in [12, 24, 36, 48, 60, 64] {
            let f = build_subcarrier_matrix(n, alpha).unwrap();
            let qr = mgs_qr(&f).unwrap();
            assert!(qr.q.matmul(&qr.r).unwrap().distance(&f) < 1e-10);
            assert!(qr.q.orthonormality_defect() < 1e-10, "alpha {alpha}, N {n}");
            assert!(qr.r.is_upper_triangular());
            let svd = svd_complex(&qr.r).unwrap();
            assert!(svd.reconstruct().distance(&qr.r) < 1e-9);
            assert!(svd.u.orthonormality_defect() < 1e-9);
            assert!(svd.v.orthonormality_defect() < 1e-9);
            assert!(svd.sigma.windows(2).all(|w| w[0] >= w[1]));
        }
    }
}

/// Maximizes a concave function on `[lo, hi]` by golden-section search.
fn golden_max(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) < f(d) {
            a = c;
        } else {
            b = d;
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

fn rate_sum(sigma: &[f64], p: &[f64], n0: f64) -> f64 {
    sigma.iter().zip(p).map(|(s, p)| (1.0 + s * s * p / n0).log2()).sum()
}

#[test]
fn capacity_matches_brute_force_allocation() {
    let n0 = 1.0;
    for &alpha in &[0.8, 0.9] {
        for &p in &[0.05, 1.0, 20.0] {
            let s2 = Spectrum::compute(2, alpha).unwrap();
            let budget = 2.0 * p;
            let (_, best) = golden_max(0.0, budget, |p1| rate_sum(&s2.sigma, &[p1, budget - p1], n0));
            let brute = best / (alpha * 2.0);
            assert!((s2.capacity(p, n0).unwrap() - brute).abs() < 1e-9, "N=2 alpha {alpha} P {p}");

            let s3 = Spectrum::compute(3, alpha).unwrap();
            let budget = 3.0 * p;
            let inner = |p1: f64| golden_max(0.0, budget - p1, |p2| rate_sum(&s3.sigma, &[p1, p2, budget - p1 - p2], n0)).1;
            let (_, best) = golden_max(0.0, budget, inner);
            let brute = best / (alpha * 3.0);
            assert!((s3.capacity(p, n0).unwrap() - brute).abs() < 1e-8, "N=3 alpha {alpha} P {p}");
        }
    }
}

#[test]
fn waterfill_agrees_with_water_level_bisection() {
    let sigma = [1.7, 0.9, 0.31, 0.05, 0.004];
    for &(n0, total) in &[(1.0, 0.5), (0.1, 3.0), (0.01, 100.0), (2.0, 0.01)] {
        let used = |mu: f64| sigma.iter().map(|s| (mu - n0 / (s * s)).max(0.0)).sum::<f64>();
        let (mut lo, mut hi) = (0.0, total + n0 / (sigma[sigma.len() - 1].powi(2)));
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if used(mid) < total {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mu = 0.5 * (lo + hi);
        let alloc = waterfill(&sigma, n0, total).unwrap();
        assert!((alloc.mu - mu).abs() < 1e-9 * mu);
        for (s, p) in sigma.iter().zip(&alloc.p) {
            assert!((p - (mu - n0 / (s * s)).max(0.0)).abs() < 1e-9 * total);
        }
        let c = capacity_from_allocation(&sigma, &alloc, n0, 1.0);
        let p_ref: Vec<f64> = sigma.iter().map(|s| (mu - n0 / (s * s)).max(0.0)).collect();
        assert!((c - rate_sum(&sigma, &p_ref, n0) / sigma.len() as f64).abs() < 1e-9);
    }
}
