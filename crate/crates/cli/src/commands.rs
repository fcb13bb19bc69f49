//! The `capacity`, `train` and `ber` commands.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use sefdm::cnn::{load_model, save_model, CnnDetector, Model, TrainConfig, Trainer};
use sefdm::detectors::{Detector, HardDetector, MldDetector};
use sefdm::harness::{format_float, run_ber_with, write_ber_rows, write_theory_rows, BerCurve, BerOptions, BER_CSV_HEADER};
use sefdm::rates::sweep;
use sefdm::signal::{Link, SefdmConfig};
use sefdm::SefdmError;

use crate::{CliError, DetectorKind, RunSpec};

pub const CAPACITY_CSV_HEADER: &str = "alpha,n,ebn0_db,snr_db,c_sefdm,r_sefdm,c_ofdm";

/// Loss is logged every this many steps.
const PROGRESS_EVERY: usize = 1000;

fn out_err(e: std::io::Error) -> CliError {
    CliError::io("<output>", e)
}

/// Writes the capacity table; returns the number of data rows.
pub fn cmd_capacity(spec: &RunSpec, out: &mut dyn Write) -> Result<usize, CliError> {
    let rows = sweep(&spec.alphas, &spec.ns, &spec.grid()?)?;
    writeln!(out, "{CAPACITY_CSV_HEADER}").map_err(out_err)?;
    for r in &rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            format_float(r.alpha),
            r.n,
            format_float(r.ebn0_db),
            format_float(10.0 * r.snr.log10()),
            format_float(r.c_sefdm),
            format_float(r.r_sefdm),
            format_float(r.c_ofdm)
        )
        .map_err(out_err)?;
    }
    Ok(rows.len())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub steps: usize,
    pub final_loss: Option<f64>,
    pub model_path: PathBuf,
    pub trace_path: PathBuf,
}

/// Trains a detector, writing the model file and a `step,loss` trace.
/// The trace defaults to `<model>.loss.csv`.
pub fn cmd_train(spec: &RunSpec, log: &mut dyn Write) -> Result<TrainSummary, CliError> {
    let model_path = spec
        .model
        .clone()
        .ok_or_else(|| CliError::Usage("train needs --model <path> for the output model".into()))?;
    let trace_path = spec.out.clone().unwrap_or_else(|| {
        let mut p = model_path.clone().into_os_string();
        p.push(".loss.csv");
        PathBuf::from(p)
    });
    let cfg = SefdmConfig::qpsk(spec.ns[0], spec.alphas[0], 1.0)?;
    let tcfg = TrainConfig {
        steps: spec.steps,
        batch: spec.batch,
        learning_rate: spec.lr,
        train_ebn0_db: spec.train_ebn0,
        seed: spec.seed,
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(&cfg, &tcfg)?;
    let trace_file = File::create(&trace_path).map_err(|e| CliError::io(&trace_path, e))?;
    let mut trace = BufWriter::new(trace_file);
    let trace_err = |e| CliError::io(&trace_path, e);
    writeln!(trace, "step,loss").map_err(trace_err)?;

    let mut final_loss = None;
    for step in 1..=spec.steps {
        let loss = trainer.step()?;
        writeln!(trace, "{step},{}", format_float(loss)).map_err(trace_err)?;
        if step % PROGRESS_EVERY == 0 || step == spec.steps {
            writeln!(log, "step {step}/{} loss {loss:.6}", spec.steps).map_err(|e| CliError::io("<log>", e))?;
        }
        final_loss = Some(loss);
    }
    trace.flush().map_err(trace_err)?;
    save_model(&trainer.model, &model_path).map_err(|e| match e {
        SefdmError::Io(io) => CliError::io(&model_path, io),
        other => other.into(),
    })?;
    Ok(TrainSummary {
        steps: spec.steps,
        final_loss,
        model_path,
        trace_path,
    })
}

/// Loads the model for `--detector cnn` and fills `N`/`alpha` from it when
/// they were not given.
pub fn prepare_ber(spec: &mut RunSpec) -> Result<Option<Model>, CliError> {
    if spec.detector != Some(DetectorKind::Cnn) {
        return Ok(None);
    }
    let path = spec
        .model
        .as_ref()
        .ok_or_else(|| CliError::Usage("--detector cnn needs --model <path>".into()))?;
    let model = load_model(path).map_err(|e| match e {
        SefdmError::Io(io) => CliError::io(path, io),
        other => other.into(),
    })?;
    if spec.ns.is_empty() {
        spec.ns = vec![model.n];
    }
    if spec.alphas.is_empty() {
        spec.alphas = vec![model.alpha];
    }
    Ok(Some(model))
}

/// BER curves for every `(alpha, N)` plus closed-form QPSK companion rows.
pub fn cmd_ber(spec: &RunSpec, model: Option<&Model>, out: &mut dyn Write) -> Result<Vec<BerCurve>, CliError> {
    let kind = spec
        .detector
        .ok_or_else(|| CliError::Usage("ber needs --detector hard|mld|cnn".into()))?;
    if spec.ns.is_empty() || spec.alphas.is_empty() {
        return Err(CliError::Usage("ber needs at least one --n and --alpha".into()));
    }
    let grid = spec.grid()?;
    let opts = BerOptions::new(spec.min_bits, spec.min_errors, spec.seed);
    writeln!(out, "{BER_CSV_HEADER}").map_err(out_err)?;
    let mut curves = Vec::new();
    for &alpha in &spec.alphas {
        for &n in &spec.ns {
            let cfg = SefdmConfig::qpsk(n, alpha, 1.0)?;
            let detector: Box<dyn Detector> = match kind {
                DetectorKind::Hard => Box::new(HardDetector),
                DetectorKind::Mld => Box::new(MldDetector::new(Link::new(n, alpha)?.qr.r)?),
                DetectorKind::Cnn => {
                    let model = model.ok_or_else(|| CliError::Usage("--detector cnn needs --model <path>".into()))?;
                    if model.alpha != alpha {
                        return Err(SefdmError::Parameter(format!(
                            "model was trained for alpha = {}, asked to evaluate alpha = {alpha}",
                            model.alpha
                        ))
                        .into());
                    }
                    Box::new(CnnDetector::new(model.clone()))
                }
            };
            let curve = run_ber_with(detector.as_ref(), &cfg, &grid, &opts)?;
            write_ber_rows(out, &curve).map_err(out_err)?;
            write_theory_rows(out, alpha, n, &grid, spec.seed).map_err(out_err)?;
            curves.push(curve);
        }
    }
    Ok(curves)
}
