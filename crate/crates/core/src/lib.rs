//! Seeded simulator of a peer-assisted TV content marketplace.
//!
//! A provider sells programs to users placed on a random network. Prices are
//! discovered over revisit rounds: users pick the program with the best
//! surplus over content price plus delivery charge (or abstain), the provider
//! nudges prices toward per-program popularity targets with small in-round
//! and larger end-of-round steps, and nearby peers can carry deliveries in
//! exchange for flat per-round incentives. Every trial is paired with a
//! unicast baseline run on the same world and random streams, and the
//! headline metric is the percentage profit gain over that baseline.
//!
//! Entry points: [`harness::run_trial`] for one paired trial,
//! [`harness::sweep_rounds`] for a Monte Carlo sweep over the number of
//! rounds, and the `p2ptv-sim` binary for the command line.

pub mod config;
pub mod demand;
pub mod error;
pub mod harness;
pub mod market;
pub mod pricing;
pub mod rng;
pub mod settlement;
pub mod topology;

pub use config::{ExperimentConfig, WtpMode};
pub use error::{Result, SimError};
pub use harness::{run_trial, sweep_rounds, SweepOutcome, SweepRow, TrialRecord};
pub use settlement::TrialResult;
