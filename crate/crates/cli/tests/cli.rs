use std::path::Path;
use std::process::{Command, Output};

use ssdfrc_cli::config::{parse_config, KEYS};
use ssdfrc_cli::{subcommand_help, subcommand_names};
use ssdfrc_core::experiments::{read_sweep_csv, read_trial_csv};

fn ssdfrc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssdfrc"))
        .args(args)
        .env_remove("SSDFRC_SEED")
        .output()
        .expect("binary runs")
}

fn strip_timing(text: &str, timing_cols: &[usize]) -> String {
    text.lines()
        .map(|l| {
            l.split(',')
                .enumerate()
                .map(|(i, f)| if timing_cols.contains(&i) { "" } else { f })
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn parse_config_defaults_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.cfg");
    std::fs::write(&path, "").unwrap();
    let cfg = parse_config(Some(&path), &[], None).unwrap();
    assert_eq!(cfg.system.n_receive, 32);
    assert_eq!(cfg.system.n_transmit, 32);
    assert_eq!(cfg.system.n_active, 6);
    assert_eq!(cfg.system.n_subcarriers, 64);
    assert_eq!(cfg.system.subcarrier_spacing_hz, 0.25e6);
    assert_eq!(cfg.system.snr_db, 0.0);

    let cfg = parse_config(None, &["n_receive=28".into()], None).unwrap();
    assert_eq!(cfg.system.n_receive, 28);

    std::fs::write(&path, "n_receive = 40\n").unwrap();
    let cfg = parse_config(Some(&path), &["n_receive=44".into()], None).unwrap();
    assert_eq!(cfg.system.n_receive, 44);

    assert!(parse_config(None, &["n_active=40".into()], None).is_err());
    assert!(parse_config(None, &["colour=blue".into()], None).is_err());
}

#[test]
fn seed_precedence() {
    let cfg = parse_config(None, &[], Some("77")).unwrap();
    assert_eq!(cfg.system.base_seed, 77);
    let cfg = parse_config(None, &["base_seed=5".into()], Some("77")).unwrap();
    assert_eq!(cfg.system.base_seed, 5);
}

#[test]
fn help_documents_every_key() {
    for name in subcommand_names() {
        let help = subcommand_help(name).unwrap();
        for (key, _) in KEYS {
            assert!(help.contains(key), "`{name} --help` lacks `{key}`");
        }
    }
    let out = ssdfrc(&["sweep-m", "--help"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("bpdn_support_threshold"));
}

#[test]
fn sweep_m_writes_grid() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = ssdfrc(&["sweep-m", "--trials", "100", "--output-dir", d]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = dir.path().join("sweep_m.csv");
    assert!(String::from_utf8_lossy(&out.stdout).contains("sweep_m.csv"));
    let points = read_sweep_csv(&csv).unwrap();
    assert_eq!(points.len(), 25);
    let ms: Vec<usize> = points.iter().map(|p| p.m).collect();
    assert_eq!(ms, (16..=64).step_by(2).collect::<Vec<_>>());
    assert!(points.iter().all(|p| p.n_trials == 100));
}

#[test]
fn reruns_are_identical_modulo_timing() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, workers) in [(a.path(), "1"), (b.path(), "2")] {
        let out = ssdfrc(&[
            "simulate",
            "--trials",
            "20",
            "--seed",
            "9",
            "--workers",
            workers,
            "--set",
            "n_receive=40",
            "--output-dir",
            dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let read = |p: &Path| std::fs::read_to_string(p.join("trials.csv")).unwrap();
    assert_eq!(strip_timing(&read(a.path()), &[6]), strip_timing(&read(b.path()), &[6]));
    let records = read_trial_csv(&a.path().join("trials.csv")).unwrap();
    assert_eq!(records.len(), 20);
}

#[test]
fn rate_report_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = ssdfrc(&["rate-report", "--output-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("rate_report.txt")).unwrap();
    assert!(text.contains("capacity_bits_per_symbol=55"));
    assert!(text.contains("rate_loss_bits_per_symbol=60"));
    assert!(text.contains("recovered_rate_bps=11000000"));
    assert!(text.contains("loss_rate_bps=12000000"));
}

#[test]
fn exit_codes() {
    assert_eq!(ssdfrc(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(ssdfrc(&[]).status.code(), Some(1));
    assert_eq!(ssdfrc(&["rate-report", "--set", "n_active=40"]).status.code(), Some(1));
    assert_eq!(ssdfrc(&["rate-report", "--set", "nonsense=1"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let target = blocker.join("sub");
    let out = ssdfrc(&["rate-report", "--output-dir", target.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let missing = dir.path().join("absent.cfg");
    assert_eq!(ssdfrc(&["rate-report", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn config_file_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    std::fs::write(&path, "# header\nn_receive = 28\nwidth = 3\n").unwrap();
    let out = ssdfrc(&["rate-report", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}
