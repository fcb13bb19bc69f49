//! `key=value` run files and the resolved [`RunSpec`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::{CliError, DetectorKind};

/// Keys accepted in a config file, matching the long flag names.
pub const KEYS: &[&str] = &[
    "detector",
    "n",
    "alpha",
    "ebn0-min",
    "ebn0-max",
    "ebn0-step",
    "steps",
    "batch",
    "lr",
    "train-ebn0",
    "seed",
    "min-bits",
    "min-errors",
    "model",
    "out",
    "threads",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Capacity,
    Train,
    Ber,
    Check,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Capacity => "capacity",
            Command::Train => "train",
            Command::Ber => "ber",
            Command::Check => "check",
        }
    }
}

/// Partially specified settings, as given by flags or a config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub detector: Option<DetectorKind>,
    pub n: Option<Vec<usize>>,
    pub alpha: Option<Vec<f64>>,
    pub ebn0_min: Option<f64>,
    pub ebn0_max: Option<f64>,
    pub ebn0_step: Option<f64>,
    pub steps: Option<usize>,
    pub batch: Option<usize>,
    pub lr: Option<f64>,
    pub train_ebn0: Option<f64>,
    pub seed: Option<u64>,
    pub min_bits: Option<u64>,
    pub min_errors: Option<u64>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl Settings {
    /// Parses `key=value` lines; `#` starts a comment, blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut seen = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value, got {raw:?}", lineno + 1)))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(CliError::Usage(format!("config line {}: unknown key {key:?}", lineno + 1)));
            }
            if seen.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(CliError::Usage(format!("config line {}: duplicate key {key:?}", lineno + 1)));
            }
        }
        let mut s = Settings::default();
        for (key, value) in &seen {
            match key.as_str() {
                "detector" => s.detector = Some(value.parse().map_err(CliError::Usage)?),
                "n" => s.n = Some(list(key, value)?),
                "alpha" => s.alpha = Some(list(key, value)?),
                "ebn0-min" => s.ebn0_min = Some(scalar(key, value)?),
                "ebn0-max" => s.ebn0_max = Some(scalar(key, value)?),
                "ebn0-step" => s.ebn0_step = Some(scalar(key, value)?),
                "steps" => s.steps = Some(scalar(key, value)?),
                "batch" => s.batch = Some(scalar(key, value)?),
                "lr" => s.lr = Some(scalar(key, value)?),
                "train-ebn0" => s.train_ebn0 = Some(scalar(key, value)?),
                "seed" => s.seed = Some(scalar(key, value)?),
                "min-bits" => s.min_bits = Some(scalar(key, value)?),
                "min-errors" => s.min_errors = Some(scalar(key, value)?),
                "model" => s.model = Some(PathBuf::from(value)),
                "out" => s.out = Some(PathBuf::from(value)),
                "threads" => s.threads = Some(scalar(key, value)?),
                _ => unreachable!("key list and match arms agree"),
            }
        }
        Ok(s)
    }

    /// Field-wise `self` if set, else `fallback`.
    pub fn or(self, fallback: Settings) -> Settings {
        Settings {
            detector: self.detector.or(fallback.detector),
            n: self.n.or(fallback.n),
            alpha: self.alpha.or(fallback.alpha),
            ebn0_min: self.ebn0_min.or(fallback.ebn0_min),
            ebn0_max: self.ebn0_max.or(fallback.ebn0_max),
            ebn0_step: self.ebn0_step.or(fallback.ebn0_step),
            steps: self.steps.or(fallback.steps),
            batch: self.batch.or(fallback.batch),
            lr: self.lr.or(fallback.lr),
            train_ebn0: self.train_ebn0.or(fallback.train_ebn0),
            seed: self.seed.or(fallback.seed),
            min_bits: self.min_bits.or(fallback.min_bits),
            min_errors: self.min_errors.or(fallback.min_errors),
            model: self.model.or(fallback.model),
            out: self.out.or(fallback.out),
            threads: self.threads.or(fallback.threads),
        }
    }
}

fn scalar<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Usage(format!("config key {key:?}: cannot parse {value:?}")))
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, CliError> {
    value.split(',').map(|v| scalar(key, v.trim())).collect()
}

/// Fully resolved run parameters. Printing it with [`RunSpec::to_config`]
/// yields a config file that reproduces the run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub command: Command,
    pub detector: Option<DetectorKind>,
    pub ns: Vec<usize>,
    pub alphas: Vec<f64>,
    pub ebn0_min: f64,
    pub ebn0_max: f64,
    pub ebn0_step: f64,
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
    pub train_ebn0: f64,
    pub seed: u64,
    pub min_bits: u64,
    pub min_errors: u64,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl RunSpec {
    /// Fills unset fields with per-command defaults. `env_seed` is the
    /// value of `SEFDM_SEED`, consulted only when no seed was given.
    pub fn resolve(command: Command, s: Settings, env_seed: Option<&str>) -> Result<Self, CliError> {
        let seed = match (s.seed, env_seed) {
            (Some(seed), _) => seed,
            (None, Some(v)) => v
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("SEFDM_SEED: cannot parse {v:?} as an unsigned integer")))?,
            (None, None) => 0,
        };
        let (default_ns, default_alphas, default_max): (Vec<usize>, Vec<f64>, f64) = match command {
            Command::Capacity => (vec![12, 48], vec![0.8, 0.85, 0.9, 1.0], 20.0),
            Command::Train => (vec![12], vec![0.85], 10.0),
            Command::Ber => match s.detector {
                // Taken from the model file when not overridden.
                Some(DetectorKind::Cnn) => (vec![], vec![], 10.0),
                _ => (vec![12, 24, 36, 48, 60], vec![0.8, 0.85, 0.9], 10.0),
            },
            Command::Check => (vec![], vec![], 0.0),
        };
        let spec = RunSpec {
            command,
            detector: s.detector,
            ns: s.n.unwrap_or(default_ns),
            alphas: s.alpha.unwrap_or(default_alphas),
            ebn0_min: s.ebn0_min.unwrap_or(0.0),
            ebn0_max: s.ebn0_max.unwrap_or(default_max),
            ebn0_step: s.ebn0_step.unwrap_or(1.0),
            steps: s.steps.unwrap_or(100_000),
            batch: s.batch.unwrap_or(256),
            lr: s.lr.unwrap_or(1e-3),
            train_ebn0: s.train_ebn0.unwrap_or(0.0),
            seed,
            min_bits: s.min_bits.unwrap_or(100_000),
            min_errors: s.min_errors.unwrap_or(100),
            model: s.model,
            out: s.out,
            threads: s.threads,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.command == Command::Ber && self.detector.is_none() {
            return Err(CliError::Usage("ber needs --detector hard|mld|cnn".into()));
        }
        if self.command == Command::Train && (self.ns.len() != 1 || self.alphas.len() != 1) {
            return Err(CliError::Usage("train takes exactly one --n and one --alpha".into()));
        }
        if self.threads == Some(0) {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        if matches!(self.command, Command::Capacity | Command::Ber) {
            self.grid()?;
        }
        Ok(())
    }

    /// `ebn0_min, ebn0_min + step, …` up to `ebn0_max` inclusive.
    pub fn grid(&self) -> Result<Vec<f64>, CliError> {
        ebn0_grid(self.ebn0_min, self.ebn0_max, self.ebn0_step)
    }

    pub fn to_config(&self) -> String {
        let join = |v: Vec<String>| v.join(",");
        let mut out = format!("# sefdm {}\n", self.command.name());
        if let Some(d) = self.detector {
            writeln!(out, "detector={}", d.name()).unwrap();
        }
        if !self.ns.is_empty() {
            writeln!(out, "n={}", join(self.ns.iter().map(|n| n.to_string()).collect())).unwrap();
        }
        if !self.alphas.is_empty() {
            writeln!(out, "alpha={}", join(self.alphas.iter().map(|a| a.to_string()).collect())).unwrap();
        }
        writeln!(out, "ebn0-min={}", self.ebn0_min).unwrap();
        writeln!(out, "ebn0-max={}", self.ebn0_max).unwrap();
        writeln!(out, "ebn0-step={}", self.ebn0_step).unwrap();
        writeln!(out, "steps={}", self.steps).unwrap();
        writeln!(out, "batch={}", self.batch).unwrap();
        writeln!(out, "lr={}", self.lr).unwrap();
        writeln!(out, "train-ebn0={}", self.train_ebn0).unwrap();
        writeln!(out, "seed={}", self.seed).unwrap();
        writeln!(out, "min-bits={}", self.min_bits).unwrap();
        writeln!(out, "min-errors={}", self.min_errors).unwrap();
        if let Some(p) = &self.model {
            writeln!(out, "model={}", p.display()).unwrap();
        }
        if let Some(p) = &self.out {
            writeln!(out, "out={}", p.display()).unwrap();
        }
        if let Some(t) = self.threads {
            writeln!(out, "threads={t}").unwrap();
        }
        out
    }
}

pub fn ebn0_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>, CliError> {
    if !(min.is_finite() && max.is_finite() && step.is_finite()) || step <= 0.0 || max < min {
        return Err(CliError::Usage(format!(
            "invalid Eb/N0 grid: min {min}, max {max}, step {step} (need min ≤ max, step > 0)"
        )));
    }
    let count = ((max - min) / step + 1e-9).floor() as usize + 1;
    if count > 100_000 {
        return Err(CliError::Usage(format!("Eb/N0 grid has {count} points")));
    }
    Ok((0..count).map(|i| min + i as f64 * step).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_lists_and_blank_lines() {
        let s = Settings::parse("# sweep\nn = 12, 48\n\nalpha=0.8,0.9  # two\nseed=5\nout=/tmp/x.csv\n").unwrap();
        assert_eq!(s.n, Some(vec![12, 48]));
        assert_eq!(s.alpha, Some(vec![0.8, 0.9]));
        assert_eq!(s.seed, Some(5));
        assert_eq!(s.out, Some(PathBuf::from("/tmp/x.csv")));
        assert_eq!(s.lr, None);
    }

    #[test]
    fn rejects_unknown_duplicate_and_malformed_lines() {
        assert!(Settings::parse("colour=blue").is_err());
        assert!(Settings::parse("seed=1\nseed=2").is_err());
        assert!(Settings::parse("seed").is_err());
        assert!(Settings::parse("steps=many").is_err());
    }

    #[test]
    fn flags_override_file_and_env_is_last() {
        let file = Settings::parse("seed=3\nsteps=10").unwrap();
        let flags = Settings {
            seed: Some(9),
            ..Settings::default()
        };
        let spec = RunSpec::resolve(Command::Train, flags.or(file.clone()), Some("77")).unwrap();
        assert_eq!((spec.seed, spec.steps), (9, 10));
        let spec = RunSpec::resolve(Command::Train, Settings::default().or(file), Some("77")).unwrap();
        assert_eq!(spec.seed, 3);
        let spec = RunSpec::resolve(Command::Train, Settings::default(), Some("77")).unwrap();
        assert_eq!(spec.seed, 77);
        assert!(RunSpec::resolve(Command::Train, Settings::default(), Some("x")).is_err());
    }

    #[test]
    fn training_defaults() {
        let spec = RunSpec::resolve(Command::Train, Settings::default(), None).unwrap();
        assert_eq!((spec.steps, spec.batch, spec.lr, spec.train_ebn0), (100_000, 256, 0.001, 0.0));
    }

    #[test]
    fn resolved_spec_round_trips_through_config() {
        let flags = Settings {
            detector: Some(DetectorKind::Mld),
            n: Some(vec![4]),
            alpha: Some(vec![0.8, 0.85]),
            ebn0_step: Some(0.5),
            out: Some(PathBuf::from("ber.csv")),
            threads: Some(1),
            ..Settings::default()
        };
        let spec = RunSpec::resolve(Command::Ber, flags, None).unwrap();
        let again = RunSpec::resolve(Command::Ber, Settings::parse(&spec.to_config()).unwrap(), None).unwrap();
        assert_eq!(spec, again);
    }

    #[test]
    fn grid_is_inclusive_and_drift_free() {
        assert_eq!(ebn0_grid(0.0, 20.0, 1.0).unwrap().len(), 21);
        let g = ebn0_grid(0.0, 1.0, 0.1).unwrap();
        assert_eq!(g.len(), 11);
        assert!((g[10] - 1.0).abs() < 1e-12);
        assert!(ebn0_grid(1.0, 0.0, 1.0).is_err());
        assert!(ebn0_grid(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn ber_needs_a_detector() {
        assert!(matches!(RunSpec::resolve(Command::Ber, Settings::default(), None), Err(CliError::Usage(_))));
    }
}
