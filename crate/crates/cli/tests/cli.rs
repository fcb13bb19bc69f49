use std::path::Path;
use std::process::{Command, Output};

use sefdm::cnn::{default_model, load_model, save_model, TrainConfig};

fn sefdm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sefdm"))
        .args(args)
        .env_remove("SEFDM_SEED")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn capacity_defaults_cover_the_grid_product() {
    let out = sefdm(&["capacity"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("alpha,n,ebn0_db,snr_db,c_sefdm,r_sefdm,c_ofdm"));
    let rows = rows(&text);
    assert_eq!(rows.len(), 4 * 2 * 21);
    for r in rows.iter().filter(|r| r[0].parse::<f64>().unwrap() == 1.0) {
        let (c, o): (f64, f64) = (r[4].parse().unwrap(), r[6].parse().unwrap());
        assert!((c - o).abs() < 1e-9);
    }
    let at = |alpha: f64, col: usize| -> f64 {
        rows.iter()
            .find(|r| r[0].parse::<f64>().unwrap() == alpha && r[1] == "48" && r[2].parse::<f64>().unwrap() == 20.0)
            .unwrap()[col]
            .parse()
            .unwrap()
    };
    assert!(at(0.8, 4) > at(0.9, 4) && at(0.9, 4) > at(0.8, 6));
}

#[test]
fn resolved_spec_is_logged_and_replayable() {
    let dir = tempfile::tempdir().unwrap();
    let out = sefdm(&["capacity", "--n", "4", "--alpha", "0.9", "--ebn0-max", "2"]);
    let log = String::from_utf8(out.stderr).unwrap();
    assert!(log.contains("n=4") && log.contains("alpha=0.9") && log.contains("ebn0-max=2"));
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, &log).unwrap();
    let replay = sefdm(&["capacity", "--config", s(&cfg)]);
    assert_eq!(replay.stdout, out.stdout);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# small sweep\nn=4\nalpha=0.8\nebn0-max=3\n").unwrap();
    let out = sefdm(&["capacity", "--config", s(&cfg), "--ebn0-max", "1"]);
    assert!(out.status.success());
    assert_eq!(rows(&String::from_utf8(out.stdout).unwrap()).len(), 2);
}

#[test]
fn zero_step_training_writes_the_initialized_model() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.sfdm");
    let out = sefdm(&["train", "--n", "4", "--alpha", "0.8", "--steps", "0", "--seed", "5", "--model", s(&model)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let expected = sefdm::cnn::Model::initialized(4, 0.8, TrainConfig::default().arch, 4, 5).unwrap();
    assert_eq!(load_model(&model).unwrap(), expected);
    let trace = std::fs::read_to_string(dir.path().join("m.sfdm.loss.csv")).unwrap();
    assert_eq!(trace, "step,loss\n");
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.sfdm");
    let b = dir.path().join("b.sfdm");
    let out = Command::new(env!("CARGO_BIN_EXE_sefdm"))
        .args(["train", "--n", "4", "--steps", "0", "--model", s(&a)])
        .env("SEFDM_SEED", "31")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(sefdm(&["train", "--n", "4", "--steps", "0", "--seed", "31", "--model", s(&b)]).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn ber_csv_has_detector_and_theory_rows() {
    let out = sefdm(&["ber", "--detector", "mld", "--n", "4", "--alpha", "0.8", "--ebn0-min", "60", "--ebn0-max", "60", "--min-bits", "10000", "--min-errors", "1", "--threads", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("detector,alpha,n,ebn0_db,bits,errors,ber,seed"));
    let rows = rows(&text);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], "mld");
    assert_eq!(rows[0][5], "0");
    assert_eq!(rows[0][6].parse::<f64>().unwrap(), 0.0);
    assert_eq!(rows[1][0], "theory_qpsk");
}

#[test]
fn hard_decision_at_unit_alpha_tracks_theory() {
    let out = sefdm(&["ber", "--detector", "hard", "--n", "12", "--alpha", "1", "--ebn0-max", "6", "--ebn0-step", "2", "--min-bits", "400000"]);
    assert!(out.status.success());
    let rows = rows(&String::from_utf8(out.stdout).unwrap());
    let (measured, theory): (Vec<_>, Vec<_>) = rows.iter().partition(|r| r[0] == "hard");
    for (m, t) in measured.iter().zip(&theory) {
        let bits: f64 = m[4].parse().unwrap();
        let ber: f64 = m[6].parse().unwrap();
        let p: f64 = t[6].parse().unwrap();
        assert!((ber - p).abs() <= 3.0 * (p * (1.0 - p) / bits).sqrt());
    }
}

#[test]
fn exit_codes_distinguish_failure_classes() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m12.sfdm");
    save_model(&default_model(12, 0.85, 0).unwrap(), &model).unwrap();

    let mismatch = sefdm(&["ber", "--detector", "cnn", "--model", s(&model), "--n", "8", "--min-bits", "10000"]);
    assert_eq!(mismatch.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&mismatch.stderr).contains("N = 12"));

    assert_eq!(sefdm(&["ber", "--detector", "cnn"]).status.code(), Some(2));
    assert_eq!(sefdm(&["ber", "--detector", "mld", "--n", "16", "--alpha", "0.8"]).status.code(), Some(2));
    assert_eq!(sefdm(&["ber", "--detector", "hard", "--min-bits", "10"]).status.code(), Some(2));
    assert_eq!(sefdm(&["capacity", "--ebn0-step", "0"]).status.code(), Some(2));

    let unwritable = dir.path().join("no/such/dir/out.csv");
    assert_eq!(sefdm(&["capacity", "--n", "4", "--out", s(&unwritable)]).status.code(), Some(4));
    let missing = dir.path().join("missing.sfdm");
    assert_eq!(sefdm(&["ber", "--detector", "cnn", "--model", s(&missing)]).status.code(), Some(4));
    let garbage = dir.path().join("garbage.sfdm");
    std::fs::write(&garbage, b"not a model").unwrap();
    assert_eq!(sefdm(&["ber", "--detector", "cnn", "--model", s(&garbage)]).status.code(), Some(4));
}

#[test]
fn check_passes_and_detects_injected_fault() {
    let ok = sefdm(&["check"]);
    assert!(ok.status.success());
    let text = String::from_utf8(ok.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 5);

    let bad = sefdm(&["check", "--inject-fault"]);
    assert_eq!(bad.status.code(), Some(1));
    let text = String::from_utf8(bad.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("FAIL gradient check")));
}
