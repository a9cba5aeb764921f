use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use p2ptv_sim::config::{ExperimentConfig, WtpMode};
use p2ptv_sim::harness::{build_trial_inputs, emit_outputs, sweep_rounds, SweepOutcome};
use p2ptv_sim::Result;

#[derive(Parser)]
#[command(
    name = "p2ptv-sim",
    version,
    about = "Seeded simulator of a peer-assisted TV content marketplace"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment cell at a fixed number of rounds.
    Simulate(SimulateArgs),
    /// Sweep the number of rounds, aggregating profit gains per cell.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Flat key=value config file; CLI flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trials per cell (trial t runs with seed base_seed + t).
    #[arg(long)]
    trials: Option<u32>,
    /// Base seed for the whole experiment.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for sweep.csv, trials.csv, histogram.csv, summary.json.
    #[arg(long)]
    out: PathBuf,
    /// Willingness-to-pay generation scheme.
    #[arg(long, value_name = "staircase|random")]
    wtp_mode: Option<WtpMode>,
    /// Disable peer serving in both arms (baseline self-comparison).
    #[arg(long)]
    unicast_only: bool,
    /// Force the incentive rate to zero.
    #[arg(long)]
    no_incentives: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of revisit rounds.
    #[arg(long)]
    rounds: Option<u32>,
    /// Also dump the first trial's generated inputs (topology.txt,
    /// elasticity.csv, wtp.csv) for audit.
    #[arg(long)]
    audit_inputs: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated rounds values, one sweep cell each.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "1,2,3,4,5,6,7,8,10,15,20,30,50"
    )]
    rounds_list: Vec<u32>,
}

fn build_config(common: &CommonArgs) -> Result<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(trials) = common.trials {
        config.trials = trials;
    }
    if let Some(seed) = common.seed {
        config.base_seed = seed;
    }
    if let Some(mode) = common.wtp_mode {
        config.wtp_mode = mode;
    }
    if common.unicast_only {
        config.peer_serving = false;
    }
    if common.no_incentives {
        config.incentives_enabled = false;
    }
    Ok(config)
}

fn report(outcome: &SweepOutcome, out: &PathBuf) {
    for row in &outcome.rows {
        println!(
            "rounds {:>3}: mean gain {:>7.2}%  stddev {:>6.2}  ({} trials, {} excluded)",
            row.rounds, row.mean_gain_pct, row.stddev_gain_pct, row.trials, row.excluded
        );
    }
    println!(
        "wrote sweep.csv, trials.csv, histogram.csv, summary.json to {}",
        out.display()
    );
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate(args) => {
            let mut config = build_config(&args.common)?;
            if let Some(rounds) = args.rounds {
                config.rounds = rounds;
            }
            let outcome = sweep_rounds(&config, &[config.rounds], config.trials)?;
            emit_outputs(&config, &outcome, &args.common.out)?;
            if args.audit_inputs {
                let inputs = build_trial_inputs(&config, config.base_seed)?;
                let dir = &args.common.out;
                std::fs::write(dir.join("topology.txt"), inputs.topology.to_text())?;
                std::fs::write(dir.join("elasticity.csv"), inputs.elasticity.to_csv())?;
                std::fs::write(dir.join("wtp.csv"), inputs.wtp.to_csv())?;
            }
            report(&outcome, &args.common.out);
        }
        Command::Sweep(args) => {
            let config = build_config(&args.common)?;
            let outcome = sweep_rounds(&config, &args.rounds_list, config.trials)?;
            emit_outputs(&config, &outcome, &args.common.out)?;
            report(&outcome, &args.common.out);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!(
                "error: {}",
                serde_json::json!({ "message": e.to_string() })
            );
            ExitCode::FAILURE
        }
    }
}
