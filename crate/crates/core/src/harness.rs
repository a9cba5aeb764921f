//! Experiment driver: assembles one seeded trial from all the pieces, runs
//! the paired peer-assisted and unicast arms, sweeps the number of rounds
//! across many trials in parallel, and writes the output files.
//!
//! Determinism contract: every output is a pure function of the config and
//! base seed. Trial `t` uses seed `base_seed + t`; both arms of a trial
//! re-derive identical world substreams (topology, elasticity, demand caps,
//! WTP), while each arm's visit order is keyed by its peer-serving mode.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, WtpMode};
use crate::demand::{generate_wtp_random, generate_wtp_staircase, ElasticityMatrix, WtpTable};
use crate::error::{Result, SimError};
use crate::market::{run_round, MarketState, NetworkModel, RoundParams, UserAgent};
use crate::pricing::{derive_targets, initial_prices, StepPolicy};
use crate::rng::{
    derive_seed, shuffle_stream, stream_rng, STREAM_ELASTICITY, STREAM_MAX_DEMAND,
    STREAM_TOPOLOGY, STREAM_WTP,
};
use crate::settlement::{profit_gain_pct, settle, TrialResult};
use crate::topology::{generate_topology, LinkCostModel, Topology};

/// Aggregate over one sweep cell. Mean and standard deviation cover the
/// non-flagged trials only; `excluded` counts the flagged ones.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub rounds: u32,
    pub mean_gain_pct: f64,
    pub stddev_gain_pct: f64,
    pub trials: u32,
    pub excluded: u32,
}

/// One trial's result tagged with its sweep cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub rounds: u32,
    pub trial: u32,
    pub result: TrialResult,
}

/// Everything a sweep produces, ready for `emit_outputs`.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub trials: Vec<TrialRecord>,
}

/// The generated world of a single trial, before any rounds run.
pub struct TrialInputs {
    pub topology: Topology,
    pub elasticity: ElasticityMatrix,
    pub d_max: Vec<f64>,
    pub wtp: WtpTable,
    pub targets: Vec<f64>,
    pub initial_prices: Vec<f64>,
    pub policy: StepPolicy,
    pub incentive_rate: f64,
    pub net: NetworkModel,
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Sample (n−1) standard deviation; 0 by convention for fewer than two
/// usable values.
fn sample_stddev(values: &[f64], mean: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Generates the trial's world from per-purpose substreams of `trial_seed`:
/// topology, elasticity matrix, max-demand profile, WTP table, targets, and
/// target-consistent starting prices. Fractional step sizes and the
/// incentive rate resolve against the mean initial price here.
pub fn build_trial_inputs(config: &ExperimentConfig, trial_seed: u64) -> Result<TrialInputs> {
    config.validate()?;
    let topology = generate_topology(
        config.num_users,
        config.density,
        config.region_size,
        derive_seed(trial_seed, STREAM_TOPOLOGY),
    )?;

    let mut h_rng = stream_rng(trial_seed, STREAM_ELASTICITY);
    let elasticity = ElasticityMatrix::generate(config.num_programs, &mut h_rng);

    let mut d_rng = stream_rng(trial_seed, STREAM_MAX_DEMAND);
    let d_cap = config.max_demand_fraction * config.num_users as f64;
    let d_max: Vec<f64> = (0..config.num_programs)
        .map(|_| d_rng.random_range(0.0..d_cap))
        .collect();

    let wtp_seed = derive_seed(trial_seed, STREAM_WTP);
    let wtp = match config.wtp_mode {
        WtpMode::Staircase => generate_wtp_staircase(
            &d_max,
            &elasticity,
            config.num_users,
            config.reference_price,
            wtp_seed,
        )?,
        WtpMode::Random => generate_wtp_random(
            &d_max,
            &elasticity,
            config.num_users,
            config.reference_price,
            wtp_seed,
        )?,
    };

    let targets = derive_targets(&d_max, config.num_users);
    let initial = initial_prices(&elasticity, &targets, config.price_floor)?;
    let scale = mean(&initial);
    let policy = StepPolicy::from_fractions(
        scale,
        config.micro_step,
        config.macro_step,
        config.price_floor,
        config.relative_gap,
    )?;
    let incentive_rate = if config.incentives_enabled {
        config.incentive_rate * scale.max(1e-6)
    } else {
        0.0
    };
    let net = NetworkModel::new(
        LinkCostModel {
            fixed_cost: config.fixed_cost,
            per_distance_rate: config.distance_rate,
        },
        config.unicast_multiplier,
        config.data_volume,
    );

    Ok(TrialInputs {
        topology,
        elasticity,
        d_max,
        wtp,
        targets,
        initial_prices: initial,
        policy,
        incentive_rate,
        net,
    })
}

fn run_arm(
    config: &ExperimentConfig,
    inputs: &TrialInputs,
    trial_seed: u64,
    peer_serving: bool,
) -> (MarketState, Vec<UserAgent>) {
    let mut state = MarketState::new(
        inputs.initial_prices.clone(),
        inputs.targets.clone(),
        config.num_users as usize,
    );
    let mut agents: Vec<UserAgent> = (0..config.num_users as usize)
        .map(|id| UserAgent::new(id, inputs.wtp.row(id).to_vec()))
        .collect();
    // Keyed by the arm's mode: two arms in the same mode see identical visit
    // orders (a self-comparison cancels exactly), while the peer-assisted arm
    // and its unicast baseline evolve as independent runs of the same world.
    let mut shuffle_rng = stream_rng(trial_seed, shuffle_stream(peer_serving));
    let params = RoundParams {
        topology: &inputs.topology,
        net: &inputs.net,
        policy: &inputs.policy,
        micro_scope: config.micro_scope,
        peer_serving,
    };
    for _ in 0..config.rounds {
        run_round(&mut state, &mut agents, &params, &mut shuffle_rng);
    }
    (state, agents)
}

/// Runs one paired trial: the peer-assisted arm and the unicast baseline on
/// identical worlds and random streams, then settles each arm's final state.
pub fn run_trial(config: &ExperimentConfig, trial_seed: u64) -> Result<TrialResult> {
    let inputs = build_trial_inputs(config, trial_seed)?;

    let (p2p_state, p2p_agents) = run_arm(config, &inputs, trial_seed, config.peer_serving);
    let (uni_state, uni_agents) = run_arm(config, &inputs, trial_seed, false);

    let p2p = settle(
        &p2p_state,
        &p2p_agents,
        &inputs.topology,
        &inputs.net,
        config.margin,
        inputs.incentive_rate,
        config.peer_serving,
    );
    let uni = settle(&uni_state, &uni_agents, &inputs.topology, &inputs.net, 0.0, 0.0, false);

    let p2ptv_profit = p2p.profit();
    let unicast_profit = uni.profit();
    Ok(TrialResult {
        p2ptv_profit,
        unicast_profit,
        incentives_paid: p2p.incentives_paid,
        gain_pct: profit_gain_pct(p2ptv_profit, unicast_profit),
        rounds_used: config.rounds,
        seed: trial_seed,
    })
}

/// Runs `trials` seeded trials for every rounds value. Trials execute on the
/// rayon pool; results are collected in trial order, so the outcome is
/// independent of scheduling.
pub fn sweep_rounds(
    config: &ExperimentConfig,
    rounds_list: &[u32],
    trials: u32,
) -> Result<SweepOutcome> {
    if rounds_list.is_empty() {
        return Err(SimError::InvalidConfig("rounds list must be non-empty".into()));
    }
    if trials < 1 {
        return Err(SimError::InvalidConfig("trials must be ≥ 1".into()));
    }
    let mut rows = Vec::with_capacity(rounds_list.len());
    let mut records = Vec::with_capacity(rounds_list.len() * trials as usize);
    for &rounds in rounds_list {
        let mut cell = config.clone();
        cell.rounds = rounds;
        cell.trials = trials;
        let results: Result<Vec<TrialResult>> = (0..trials)
            .into_par_iter()
            .map(|t| run_trial(&cell, cell.base_seed.wrapping_add(t as u64)))
            .collect();
        let results = results?;

        let gains: Vec<f64> = results.iter().filter_map(|r| r.gain_pct).collect();
        let excluded = trials - gains.len() as u32;
        let m = mean(&gains);
        rows.push(SweepRow {
            rounds,
            mean_gain_pct: m,
            stddev_gain_pct: sample_stddev(&gains, m),
            trials,
            excluded,
        });
        records.extend(
            results
                .into_iter()
                .enumerate()
                .map(|(t, result)| TrialRecord { rounds, trial: t as u32, result }),
        );
    }
    Ok(SweepOutcome { rows, trials: records })
}

// ─────────────────────────────── outputs ─────────────────────────────────

/// Writes via a temp file plus rename, so readers never see partial output.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    std::fs::write(tmp, contents)?;
    std::fs::rename(tmp, path)?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|g| g.to_string()).unwrap_or_default()
}

pub fn render_sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("rounds,mean_gain_pct,stddev_gain_pct,trials,excluded\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.rounds, r.mean_gain_pct, r.stddev_gain_pct, r.trials, r.excluded
        );
    }
    out
}

pub fn render_trials_csv(records: &[TrialRecord]) -> String {
    let mut out = String::from(
        "rounds,trial,seed,p2ptv_profit,unicast_profit,incentives_paid,gain_pct,flagged\n",
    );
    for r in records {
        let t = &r.result;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.rounds,
            r.trial,
            t.seed,
            t.p2ptv_profit,
            t.unicast_profit,
            t.incentives_paid,
            fmt_opt(t.gain_pct),
            t.gain_pct.is_none()
        );
    }
    out
}

/// Width-5 histogram of the non-flagged gains; only occupied bins appear,
/// sorted ascending. A gain g lands in [5·⌊g/5⌋, 5·⌊g/5⌋ + 5).
pub fn render_histogram_csv(records: &[TrialRecord]) -> String {
    let mut bins: BTreeMap<i64, u64> = BTreeMap::new();
    for r in records {
        if let Some(g) = r.result.gain_pct {
            *bins.entry((g / 5.0).floor() as i64).or_default() += 1;
        }
    }
    let mut out = String::from("bin_start,bin_end,count\n");
    for (bin, count) in bins {
        let _ = writeln!(out, "{},{},{}", bin * 5, (bin + 1) * 5, count);
    }
    out
}

#[derive(Serialize)]
struct Summary<'a> {
    config: &'a ExperimentConfig,
    rows: &'a [SweepRow],
    total_trials: usize,
    total_excluded: u32,
    max_mean_gain_pct: Option<f64>,
}

pub fn render_summary_json(config: &ExperimentConfig, outcome: &SweepOutcome) -> String {
    let max_mean = outcome
        .rows
        .iter()
        .map(|r| r.mean_gain_pct)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
    let summary = Summary {
        config,
        rows: &outcome.rows,
        total_trials: outcome.trials.len(),
        total_excluded: outcome.rows.iter().map(|r| r.excluded).sum(),
        max_mean_gain_pct: max_mean,
    };
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    text.push('\n');
    text
}

/// Writes sweep.csv, trials.csv, histogram.csv, and summary.json into
/// `out_dir` (created if missing). All writes are atomic; reruns with the
/// same config and seed produce byte-identical files.
pub fn emit_outputs(
    config: &ExperimentConfig,
    outcome: &SweepOutcome,
    out_dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    write_atomic(&out_dir.join("sweep.csv"), &render_sweep_csv(&outcome.rows))?;
    write_atomic(&out_dir.join("trials.csv"), &render_trials_csv(&outcome.trials))?;
    write_atomic(
        &out_dir.join("histogram.csv"),
        &render_histogram_csv(&outcome.trials),
    )?;
    write_atomic(
        &out_dir.join("summary.json"),
        &render_summary_json(config, outcome),
    )?;
    Ok(())
}
