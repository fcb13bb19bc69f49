//! Waterfilling, SEFDM capacity, equal-power rate and the capacity sweeps.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Result, SefdmError};
use crate::factorizations::{mgs_qr, svd_complex};
use crate::signal::{build_subcarrier_matrix, SefdmConfig};

/// Output of [`waterfill`], aligned with the input singular values.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub p: Vec<f64>,
    /// Water level μ.
    pub mu: f64,
    /// Number of channels with nonzero power.
    pub active_count: usize,
}

impl PowerAllocation {
    pub fn total(&self) -> f64 {
        self.p.iter().sum()
    }
}

/// One row of a capacity sweep. All three rates are evaluated at the row's
/// Eb/N0, each with its own self-consistent SNR.
#[derive(Debug, Clone, PartialEq)]
pub struct RatePoint {
    pub alpha: f64,
    pub n: usize,
    pub ebn0_db: f64,
    /// P/N0 on the capacity curve.
    pub snr: f64,
    pub c_sefdm: f64,
    pub r_sefdm: f64,
    pub c_ofdm: f64,
    /// P/N0 on the equal-power rate curve.
    pub snr_rate: f64,
    /// P/N0 on the OFDM curve.
    pub snr_ofdm: f64,
}

/// Power allocation `p_i = (μ − N0/σ_i²)^+` with `Σ p_i = total_power`.
///
/// Exact: channels are sorted by gain and the largest active set whose
/// weakest member still receives positive power is accepted.
pub fn waterfill(sigma: &[f64], n0: f64, total_power: f64) -> Result<PowerAllocation> {
    if sigma.is_empty() {
        return Err(SefdmError::Degenerate("no channels to allocate power over".into()));
    }
    if sigma.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(SefdmError::param("singular values must be finite and nonnegative"));
    }
    if !(n0 > 0.0 && n0.is_finite()) || !(total_power > 0.0 && total_power.is_finite()) {
        return Err(SefdmError::param("noise level and power budget must be positive"));
    }
    if sigma.iter().all(|&s| s == 0.0) {
        return Err(SefdmError::Degenerate("all singular values are zero".into()));
    }

    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]).then(i.cmp(&j)));
    let floor: Vec<f64> = order
        .iter()
        .map(|&i| if sigma[i] > 0.0 { n0 / (sigma[i] * sigma[i]) } else { f64::INFINITY })
        .collect();

    let alive = floor.iter().take_while(|f| f.is_finite()).count();
    let mut prefix = vec![0.0; alive + 1];
    for m in 0..alive {
        prefix[m + 1] = prefix[m] + floor[m];
    }
    let mut mu = f64::NAN;
    let mut active = 0;
    for m in (1..=alive).rev() {
        let level = (total_power + prefix[m]) / m as f64;
        if level - floor[m - 1] > 0.0 {
            mu = level;
            active = m;
            break;
        }
    }
    // m = 1 always succeeds since total_power > 0.
    debug_assert!(active >= 1);

    let mut p = vec![0.0; sigma.len()];
    for (rank, &i) in order.iter().enumerate().take(active) {
        p[i] = mu - floor[rank];
    }
    Ok(PowerAllocation {
        p,
        mu,
        active_count: active,
    })
}

/// Singular values of `R` for one `(N, α)`; SNR independent.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub n: usize,
    pub alpha: f64,
    pub sigma: Vec<f64>,
}

impl Spectrum {
    /// `F^α → QR → SVD(R)`.
    pub fn compute(n: usize, alpha: f64) -> Result<Self> {
        let f = build_subcarrier_matrix(n, alpha)?;
        let qr = mgs_qr(&f)?;
        let svd = svd_complex(&qr.r)?;
        Ok(Self { n, alpha, sigma: svd.sigma })
    }

    /// Waterfilled capacity in bits/s/Hz at per-subcarrier power `p` and noise `n0`.
    pub fn capacity(&self, p: f64, n0: f64) -> Result<f64> {
        let alloc = waterfill(&self.sigma, n0, self.n as f64 * p)?;
        Ok(capacity_from_allocation(&self.sigma, &alloc, n0, self.alpha))
    }

    /// Equal-power rate in bits/s/Hz.
    pub fn equal_power_rate(&self, p: f64, n0: f64) -> f64 {
        let sum: f64 = self.sigma.iter().map(|s| (1.0 + s * s * p / n0).log2()).sum();
        sum / (self.alpha * self.n as f64)
    }
}

/// `(1/(αN)) Σ log2(1 + σ_i² p_i / N0)`.
pub fn capacity_from_allocation(sigma: &[f64], alloc: &PowerAllocation, n0: f64, alpha: f64) -> f64 {
    let sum: f64 = sigma
        .iter()
        .zip(&alloc.p)
        .filter(|(_, &p)| p > 0.0)
        .map(|(s, p)| (1.0 + s * s * p / n0).log2())
        .sum();
    sum / (alpha * sigma.len() as f64)
}

pub fn capacity_sefdm(cfg: &SefdmConfig, power_per_subcarrier: f64) -> Result<f64> {
    cfg.validate()?;
    check_power(power_per_subcarrier)?;
    Spectrum::compute(cfg.n_subcarriers, cfg.alpha)?.capacity(power_per_subcarrier, cfg.n0)
}

pub fn rate_equal_power(cfg: &SefdmConfig, power_per_subcarrier: f64) -> Result<f64> {
    cfg.validate()?;
    check_power(power_per_subcarrier)?;
    Ok(Spectrum::compute(cfg.n_subcarriers, cfg.alpha)?.equal_power_rate(power_per_subcarrier, cfg.n0))
}

fn check_power(p: f64) -> Result<()> {
    if p > 0.0 && p.is_finite() {
        Ok(())
    } else {
        Err(SefdmError::param(format!("power per subcarrier must be positive, got {p}")))
    }
}

/// Orthogonal FDM baseline `log2(1 + P/N0)`.
pub fn ofdm_reference(power: f64, n0: f64) -> f64 {
    (power / n0).ln_1p() / std::f64::consts::LN_2
}

/// Solves `snr / η(snr) = ebn0` for the SNR of a curve with spectral
/// efficiency `η`. `snr/η(snr)` is increasing for concave `η` with `η(0) = 0`,
/// so bisection in dB is safe. Returns `None` below the curve's Eb/N0 floor.
pub fn snr_for_ebn0(ebn0_db: f64, eta: impl Fn(f64) -> f64) -> Option<f64> {
    let target = 10f64.powf(ebn0_db / 10.0);
    let ratio = |snr_db: f64| {
        let snr = 10f64.powf(snr_db / 10.0);
        snr / eta(snr)
    };
    let (mut lo, mut hi) = (-80.0f64, 120.0f64);
    if ratio(lo) >= target || ratio(hi) <= target {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ratio(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Some(10f64.powf(0.5 * (lo + hi) / 10.0))
}

/// Rate table over `alphas × ns × ebn0_grid_db`, rows ordered `(α, N, Eb/N0)`.
///
/// Factorizations are computed once per `(N, α)` and shared across the
/// Eb/N0 grid.
pub fn sweep(alphas: &[f64], ns: &[usize], ebn0_grid_db: &[f64]) -> Result<Vec<RatePoint>> {
    if alphas.is_empty() || ns.is_empty() || ebn0_grid_db.is_empty() {
        return Err(SefdmError::param("sweep grids must be nonempty"));
    }
    let pairs: Vec<(f64, usize)> = alphas.iter().flat_map(|&a| ns.iter().map(move |&n| (a, n))).collect();
    let spectra: Vec<Spectrum> = pairs
        .par_iter()
        .map(|&(a, n)| Spectrum::compute(n, a))
        .collect::<Result<_>>()?;
    let cache: HashMap<(u64, usize), &Spectrum> = spectra.iter().map(|s| ((s.alpha.to_bits(), s.n), s)).collect();

    let rows: Vec<Vec<RatePoint>> = pairs
        .par_iter()
        .map(|&(alpha, n)| {
            let spec = cache[&(alpha.to_bits(), n)];
            ebn0_grid_db
                .iter()
                .map(|&ebn0_db| rate_point(spec, ebn0_db))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

fn rate_point(spec: &Spectrum, ebn0_db: f64) -> Result<RatePoint> {
    let below = |what: &str| {
        SefdmError::Range(format!(
            "Eb/N0 = {ebn0_db} dB is below the {what} floor for N = {}, alpha = {}",
            spec.n, spec.alpha
        ))
    };
    let cap = |snr: f64| spec.capacity(snr, 1.0).unwrap_or(f64::NAN);
    let snr = snr_for_ebn0(ebn0_db, cap).ok_or_else(|| below("capacity"))?;
    let snr_rate = snr_for_ebn0(ebn0_db, |s| spec.equal_power_rate(s, 1.0)).ok_or_else(|| below("rate"))?;
    let snr_ofdm = snr_for_ebn0(ebn0_db, |s| ofdm_reference(s, 1.0)).ok_or_else(|| below("OFDM"))?;
    Ok(RatePoint {
        alpha: spec.alpha,
        n: spec.n,
        ebn0_db,
        snr,
        c_sefdm: spec.capacity(snr, 1.0)?,
        r_sefdm: spec.equal_power_rate(snr_rate, 1.0),
        c_ofdm: ofdm_reference(snr_ofdm, 1.0),
        snr_rate,
        snr_ofdm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn waterfill_symmetric_channels() {
        let a = waterfill(&[1.0; 4], 1.0, 4.0).unwrap();
        assert_eq!(a.p, vec![1.0; 4]);
        assert_eq!(a.mu, 2.0);
        assert_eq!(a.active_count, 4);
    }

    #[test]
    fn waterfill_dead_channel() {
        let a = waterfill(&[1.0, 1e-6], 1.0, 1.0).unwrap();
        assert_eq!(a.active_count, 1);
        assert!((a.p[0] - 1.0).abs() < 1e-15);
        assert_eq!(a.p[1], 0.0);
    }

    #[test]
    fn waterfill_two_channel_closed_form() {
        let a = waterfill(&[2.0, 1.0], 1.0, 1.0).unwrap();
        assert_eq!(a.mu, 9.0 / 8.0);
        assert_eq!(a.p, vec![7.0 / 8.0, 1.0 / 8.0]);
        // Order follows the input, not the sorted gains.
        let b = waterfill(&[1.0, 2.0], 1.0, 1.0).unwrap();
        assert_eq!(b.p, vec![1.0 / 8.0, 7.0 / 8.0]);
    }

    #[test]
    fn waterfill_errors() {
        assert!(matches!(waterfill(&[0.0, 0.0], 1.0, 1.0), Err(SefdmError::Degenerate(_))));
        assert!(waterfill(&[], 1.0, 1.0).is_err());
        assert!(waterfill(&[1.0, -1.0], 1.0, 1.0).is_err());
        assert!(waterfill(&[1.0], 0.0, 1.0).is_err());
        // Zero channels alongside live ones are simply inactive.
        let a = waterfill(&[0.0, 1.0], 1.0, 2.0).unwrap();
        assert_eq!(a.p, vec![0.0, 2.0]);
    }

    proptest! {
        #[test]
        fn waterfill_satisfies_kkt(
            sigma in prop::collection::vec(0.0f64..3.0, 1..40),
            n0 in 0.01f64..10.0,
            total in 0.01f64..100.0,
        ) {
            prop_assume!(sigma.iter().any(|&s| s > 1e-6));
            let a = waterfill(&sigma, n0, total).unwrap();
            prop_assert!((a.total() - total).abs() < 1e-9 * total);
            for (s, p) in sigma.iter().zip(&a.p) {
                prop_assert!(*p >= 0.0);
                if *p > 0.0 {
                    prop_assert!((p - (a.mu - n0 / (s * s))).abs() < 1e-9 * a.mu.max(1.0));
                } else if *s > 0.0 {
                    prop_assert!(a.mu <= n0 / (s * s) + 1e-9);
                }
            }
            prop_assert_eq!(a.active_count, a.p.iter().filter(|&&p| p > 0.0).count());
        }
    }

    #[test]
    fn ofdm_reference_values() {
        assert_eq!(ofdm_reference(1.0, 1.0), 1.0);
        assert_eq!(ofdm_reference(15.0, 1.0), 4.0);
        assert!(ofdm_reference(1e-300, 1.0) < 1e-290);
    }

    #[test]
    fn unit_alpha_degenerates_to_ofdm() {
        for n in [1, 4, 12, 48] {
            let cfg = SefdmConfig::qpsk(n, 1.0, 1.0).unwrap();
            assert!((capacity_sefdm(&cfg, 1.0).unwrap() - 1.0).abs() < 1e-10);
            assert!((capacity_sefdm(&cfg, 3.0).unwrap() - 2.0).abs() < 1e-10);
            assert!((rate_equal_power(&cfg, 1.0).unwrap() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn snr_solver_inverts_the_ofdm_curve() {
        let snr = snr_for_ebn0(10.0, |s| ofdm_reference(s, 1.0)).unwrap();
        let eta = ofdm_reference(snr, 1.0);
        assert!((snr / eta - 10.0).abs() < 1e-9);
        // Below ln 2 (−1.59 dB) no SNR reaches the requested Eb/N0.
        assert!(snr_for_ebn0(-3.0, |s| ofdm_reference(s, 1.0)).is_none());
    }

    #[test]
    fn sweep_shape_and_degenerate_rows() {
        let rows = sweep(&[1.0, 0.8], &[12], &[0.0, 10.0, 20.0]).unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[0].alpha, 1.0);
        assert_eq!(rows[3].alpha, 0.8);
        for r in &rows[..3] {
            assert!((r.c_sefdm - r.c_ofdm).abs() < 1e-9);
            assert!((r.r_sefdm - r.c_ofdm).abs() < 1e-9);
        }
        for r in &rows {
            assert!(r.c_sefdm >= 0.0 && r.r_sefdm >= 0.0 && r.c_ofdm >= 0.0);
            let eb = 10f64.powf(r.ebn0_db / 10.0);
            assert!((r.snr / r.c_sefdm - eb).abs() < 1e-9 * eb);
        }
        assert!(sweep(&[], &[12], &[0.0]).is_err());
    }

    #[test]
    fn uncoded_rate_is_higher_for_small_n() {
        let rows = sweep(&[0.8], &[12, 60], &[20.0]).unwrap();
        assert!(rows[0].r_sefdm >= rows[1].r_sefdm);
    }
}
