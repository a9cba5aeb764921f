//! End-to-end checks of the command-line pipeline: flag precedence, output
//! file consistency, ablation switches, and failure reporting.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_p2ptv-sim"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary launches");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Parses trials.csv into (rounds, trial, seed, incentives_paid, gain) rows;
/// a flagged trial has gain None.
fn parse_trials(text: &str) -> Vec<(u32, u32, u64, f64, Option<f64>)> {
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("rounds,trial,seed,p2ptv_profit,unicast_profit,incentives_paid,gain_pct,flagged")
    );
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f.len(), 8, "bad row: {l}");
            let gain = if f[6].is_empty() { None } else { Some(f[6].parse().unwrap()) };
            assert_eq!(f[7], if gain.is_none() { "true" } else { "false" });
            (
                f[0].parse().unwrap(),
                f[1].parse().unwrap(),
                f[2].parse().unwrap(),
                f[5].parse().unwrap(),
                gain,
            )
        })
        .collect()
}

#[test]
fn simulate_emits_every_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_ok(bin().args([
        "simulate",
        "--trials",
        "40",
        "--rounds",
        "3",
        "--audit-inputs",
        "--out",
    ]).arg(dir.path()));

    for name in [
        "sweep.csv",
        "trials.csv",
        "histogram.csv",
        "summary.json",
        "topology.txt",
        "elasticity.csv",
        "wtp.csv",
    ] {
        assert!(dir.path().join(name).is_file(), "{name} missing");
    }
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("rounds   3"), "report line missing: {stdout}");
    assert_eq!(parse_trials(&read(dir.path(), "trials.csv")).len(), 40);
}

#[test]
fn sweep_aggregates_match_trial_rows() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(bin().args([
        "sweep",
        "--trials",
        "80",
        "--rounds-list",
        "1,5",
        "--out",
    ]).arg(dir.path()));

    let trials = parse_trials(&read(dir.path(), "trials.csv"));
    assert_eq!(trials.len(), 160);

    let sweep = read(dir.path(), "sweep.csv");
    let mut rows = sweep.lines();
    assert_eq!(rows.next(), Some("rounds,mean_gain_pct,stddev_gain_pct,trials,excluded"));
    for row in rows {
        let f: Vec<&str> = row.split(',').collect();
        let rounds: u32 = f[0].parse().unwrap();
        let gains: Vec<f64> = trials
            .iter()
            .filter(|t| t.0 == rounds)
            .filter_map(|t| t.4)
            .collect();
        let mean = gains.iter().sum::<f64>() / gains.len() as f64;
        let var =
            gains.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (gains.len() - 1) as f64;
        // Identical summation order, so the aggregates match to the bit.
        assert_eq!(f[1].parse::<f64>().unwrap(), mean, "mean mismatch at rounds {rounds}");
        assert_eq!(
            f[2].parse::<f64>().unwrap(),
            var.sqrt(),
            "stddev mismatch at rounds {rounds}"
        );
        assert_eq!(f[3].parse::<u32>().unwrap(), 80);
        assert_eq!(f[4].parse::<usize>().unwrap(), 80 - gains.len());
    }
}

#[test]
fn cli_flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, "experiment.trials = 7\npricing.price_floor = 1.10\n").unwrap();

    run_ok(
        bin()
            .args(["simulate", "--rounds", "2", "--trials", "9", "--config"])
            .arg(&conf)
            .arg("--out")
            .arg(dir.path()),
    );

    let summary: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "summary.json")).unwrap();
    let config = &summary["config"];
    assert_eq!(config["trials"], 9, "CLI value must beat the file");
    assert_eq!(config["price_floor"], 1.10, "file value must beat the default");
    assert_eq!(config["rounds"], 2);
    assert_eq!(summary["total_trials"], 9);
}

#[test]
fn unknown_config_key_fails_with_error_line() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("bad.conf");
    std::fs::write(&conf, "pricing.micro_stepp = 0.1\n").unwrap();

    let out = bin()
        .args(["sweep", "--config"])
        .arg(&conf)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    let line = stderr.lines().next().unwrap_or("");
    let json = line.strip_prefix("error: ").expect("machine-readable prefix");
    let parsed: serde_json::Value = serde_json::from_str(json).unwrap();
    assert!(parsed["message"].as_str().unwrap().contains("micro_stepp"));
}

#[test]
fn invalid_step_sizes_fail_validation() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("bad.conf");
    std::fs::write(&conf, "pricing.micro_step = 0.5\npricing.macro_step = 0.2\n").unwrap();

    let out = bin()
        .args(["simulate", "--config"])
        .arg(&conf)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.starts_with("error: "), "unexpected stderr: {stderr}");
}

#[test]
fn zero_rounds_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["simulate", "--rounds", "0", "--trials", "5", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn unicast_only_gains_are_zero() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(bin().args([
        "simulate",
        "--unicast-only",
        "--trials",
        "30",
        "--rounds",
        "4",
        "--out",
    ]).arg(dir.path()));

    let trials = parse_trials(&read(dir.path(), "trials.csv"));
    assert_eq!(trials.len(), 30);
    for (_, trial, _, _, gain) in trials {
        assert_eq!(gain, Some(0.0), "trial {trial} gained without peer serving");
    }
}

#[test]
fn no_incentives_zeroes_payouts() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(bin().args([
        "simulate",
        "--no-incentives",
        "--trials",
        "30",
        "--rounds",
        "4",
        "--out",
    ]).arg(dir.path()));

    for (_, trial, _, paid, _) in parse_trials(&read(dir.path(), "trials.csv")) {
        assert_eq!(paid, 0.0, "trial {trial} paid incentives while disabled");
    }
}

#[test]
fn trial_seeds_are_base_plus_index() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(bin().args([
        "simulate",
        "--seed",
        "777",
        "--trials",
        "25",
        "--rounds",
        "2",
        "--out",
    ]).arg(dir.path()));

    for (_, trial, seed, _, _) in parse_trials(&read(dir.path(), "trials.csv")) {
        assert_eq!(seed, 777 + trial as u64);
    }
}

#[test]
fn wtp_mode_flag_changes_results() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    for (dir, mode) in [(&dir_a, "staircase"), (&dir_b, "random")] {
        run_ok(bin().args([
            "simulate",
            "--wtp-mode",
            mode,
            "--trials",
            "20",
            "--rounds",
            "3",
            "--out",
        ]).arg(dir.path()));
    }
    assert_ne!(
        read(dir_a.path(), "trials.csv"),
        read(dir_b.path(), "trials.csv"),
        "the two schemes should not produce identical trials"
    );
}
