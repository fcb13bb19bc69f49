//! Fast invariant suite behind `sefdm check`.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sefdm::cnn::{gradient_check, observations_to_tensor, Architecture, GradFault, Model};
use sefdm::detectors::detect_mld;
use sefdm::factorizations::{mgs_qr, svd_complex};
use sefdm::linalg::ComplexMatrix;
use sefdm::rates::{ofdm_reference, waterfill, Spectrum};
use sefdm::signal::{build_subcarrier_matrix, ebn0_to_n0, Link, SefdmConfig, SymbolFrame, QPSK_ORDER};
use sefdm::Result;

use crate::CliError;

type Check = Box<dyn Fn() -> Result<(bool, String)>>;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }
}

/// Runs every check, printing one `PASS`/`FAIL` line each. Internal errors
/// count as failures rather than aborting the suite.
pub fn cmd_check(inject_fault: bool, out: &mut dyn Write) -> Result<Vec<CheckOutcome>, CliError> {
    let checks: [(&'static str, Check); 5] = [
        ("factorization residuals", Box::new(factorizations)),
        ("waterfilling KKT", Box::new(waterfilling)),
        ("gradient check", Box::new(move || gradients(inject_fault))),
        ("orthogonal degeneracy", Box::new(degeneracy)),
        ("noiseless MLD recovery", Box::new(noiseless_mld)),
    ];
    let mut outcomes = Vec::new();
    for (name, check) in checks {
        let start = Instant::now();
        let outcome = match check() {
            Ok((passed, detail)) => CheckOutcome::new(name, passed, detail),
            Err(e) => CheckOutcome::new(name, false, format!("error: {e}")),
        };
        writeln!(
            out,
            "{} {name}: {} ({:.2} s)",
            if outcome.passed { "PASS" } else { "FAIL" },
            outcome.detail,
            start.elapsed().as_secs_f64()
        )
        .map_err(|e| CliError::io("<stdout>", e))?;
        outcomes.push(outcome);
    }
    Ok(outcomes)
}

fn factorizations() -> Result<(bool, String)> {
    let mut worst_qr = 0.0f64;
    let mut worst_svd = 0.0f64;
    for &alpha in &[0.8, 0.85, 0.9, 1.0] {
        for &n in &[4, 12, 24, 48] {
            let f = build_subcarrier_matrix(n, alpha)?;
            let qr = mgs_qr(&f)?;
            let qr_res = qr.q.matmul(&qr.r)?.distance(&f).max(qr.q.orthonormality_defect());
            let svd = svd_complex(&qr.r)?;
            let svd_res = svd
                .reconstruct()
                .distance(&qr.r)
                .max(svd.u.orthonormality_defect())
                .max(svd.v.orthonormality_defect());
            worst_qr = worst_qr.max(qr_res);
            worst_svd = worst_svd.max(svd_res);
        }
    }
    Ok((
        worst_qr < 1e-10 && worst_svd < 1e-9,
        format!("max QR residual {worst_qr:.1e}, max SVD residual {worst_svd:.1e}"),
    ))
}

fn waterfilling() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let len = rng.random_range(1..=64);
        let sigma: Vec<f64> = (0..len).map(|_| 10f64.powf(rng.random_range(-3.0..1.0))).collect();
        let n0 = 10f64.powf(rng.random_range(-3.0..1.0));
        let total = 10f64.powf(rng.random_range(-2.0..3.0));
        let a = waterfill(&sigma, n0, total)?;
        worst = worst.max((a.total() - total).abs() / total);
        for (s, p) in sigma.iter().zip(&a.p) {
            let floor = n0 / (s * s);
            let v = if *p > 0.0 { (p + floor - a.mu).abs() } else { (a.mu - floor).max(0.0) };
            worst = worst.max(v / a.mu);
        }
    }
    Ok((worst < 1e-9, format!("max relative budget/KKT residual {worst:.1e} over 1000 spectra")))
}

fn gradients(inject_fault: bool) -> Result<(bool, String)> {
    let (n, alpha) = (4, 0.8);
    let model = Model::<f64>::initialized(n, alpha, Architecture::new(vec![4, 8], 1, 3)?, QPSK_ORDER, 3)?;
    let link = Link::new(n, alpha)?;
    let cfg = SefdmConfig::qpsk(n, alpha, ebn0_to_n0(4.0, 2, 1.0))?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut ys = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..3 {
        let frame = SymbolFrame::random(n, &mut rng);
        ys.push(link.transmit(&frame, cfg, &mut rng)?);
        labels.extend(frame.classes());
    }
    let fault = inject_fault.then_some(GradFault {
        layer: 0,
        index: 0,
        delta: 1e-2,
    });
    let report = gradient_check(&model, &observations_to_tensor::<f64>(&ys), &labels, 1e-5, fault)?;
    Ok((
        report.max_rel_error < 1e-5,
        format!(
            "max relative error {:.1e} over {} parameters (layer {}, entry {})",
            report.max_rel_error, report.checked, report.layer, report.index
        ),
    ))
}

fn degeneracy() -> Result<(bool, String)> {
    let n = 12;
    let link = Link::new(n, 1.0)?;
    let r_err = link.qr.r.distance(&ComplexMatrix::identity(n));
    let spec = Spectrum::compute(n, 1.0)?;
    let mut c_err = 0.0f64;
    for &snr in &[0.1, 1.0, 10.0, 100.0] {
        c_err = c_err.max((spec.capacity(snr, 1.0)? - ofdm_reference(snr, 1.0)).abs());
    }
    Ok((
        r_err < 1e-10 && c_err < 1e-10,
        format!("‖R − I‖ = {r_err:.1e}, |C − log2(1+P/N0)| = {c_err:.1e} at alpha = 1"),
    ))
}

fn noiseless_mld() -> Result<(bool, String)> {
    let (n, alpha) = (4, 0.8);
    let link = Link::new(n, alpha)?;
    let cfg = SefdmConfig::qpsk(n, alpha, 1.0)?;
    let frames = QPSK_ORDER.pow(n as u32);
    let mut wrong = 0;
    for index in 0..frames {
        let bits: Vec<u8> = (0..2 * n).rev().map(|k| ((index >> k) & 1) as u8).collect();
        let frame = SymbolFrame::from_bits(bits)?;
        let y = link.noiseless(&frame, cfg)?;
        if detect_mld(&y, &link.qr.r, n)? != frame.bits {
            wrong += 1;
        }
    }
    Ok((wrong == 0, format!("{wrong} of {frames} frames misdetected (N = 4, alpha = 0.8)")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_build_passes() {
        let mut out = Vec::new();
        let outcomes = cmd_check(false, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(outcomes.iter().all(|o| o.passed), "{text}");
        assert_eq!(text.lines().count(), outcomes.len());
    }

    #[test]
    fn injected_fault_fails_only_the_gradient_check() {
        let mut out = Vec::new();
        let outcomes = cmd_check(true, &mut out).unwrap();
        for o in outcomes {
            assert_eq!(o.passed, o.name != "gradient check", "{o:?}");
        }
    }
}
