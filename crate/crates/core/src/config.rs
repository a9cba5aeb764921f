//! Experiment configuration: defaults, a flat dotted-key config file format,
//! and validation. CLI flags override file values, which override defaults.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::market::MicroScope;

/// How user willingness-to-pay tables are generated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WtpMode {
    /// Levels placed exactly where the demand curve steps down by one unit.
    Staircase,
    /// Independent draws whose survival function is the demand curve.
    Random,
}

impl FromStr for WtpMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "staircase" => Ok(Self::Staircase),
            "random" => Ok(Self::Random),
            other => Err(format!("unknown wtp mode '{other}' (expected staircase|random)")),
        }
    }
}

impl FromStr for MicroScope {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "changed" => Ok(Self::Changed),
            "all" => Ok(Self::All),
            other => Err(format!("unknown micro scope '{other}' (expected changed|all)")),
        }
    }
}

/// Every knob of one experiment. Step sizes and the incentive rate are
/// fractions of the trial's mean initial price; the price floor is absolute.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub num_users: u32,
    pub num_programs: usize,
    pub rounds: u32,
    pub trials: u32,
    pub base_seed: u64,
    pub wtp_mode: WtpMode,
    pub reference_price: f64,
    /// Per-program max expected demand is drawn from U[0, max_demand_fraction × M].
    pub max_demand_fraction: f64,
    pub density: f64,
    pub region_size: f64,
    pub fixed_cost: f64,
    pub distance_rate: f64,
    pub data_volume: f64,
    pub unicast_multiplier: f64,
    pub micro_step: f64,
    pub macro_step: f64,
    pub price_floor: f64,
    pub relative_gap: bool,
    pub micro_scope: MicroScope,
    pub incentive_rate: f64,
    pub margin: f64,
    pub peer_serving: bool,
    pub incentives_enabled: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            num_users: 60,
            num_programs: 15,
            rounds: 5,
            trials: 500,
            base_seed: 11,
            wtp_mode: WtpMode::Staircase,
            reference_price: 0.0,
            max_demand_fraction: 0.31,
            density: 2.2,
            region_size: 100.0,
            fixed_cost: 0.05,
            distance_rate: 0.013,
            data_volume: 1.0,
            unicast_multiplier: 2.0,
            micro_step: 0.168,
            macro_step: 0.4,
            price_floor: 1.62,
            relative_gap: true,
            micro_scope: MicroScope::Changed,
            incentive_rate: 0.004,
            margin: 0.3,
            peer_serving: true,
            incentives_enabled: true,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| {
        SimError::InvalidConfig(format!("bad value '{value}' for {key}: {e}"))
    })
}

impl ExperimentConfig {
    /// Applies one dotted-key assignment. Unknown keys are rejected so that
    /// typos fail loudly instead of silently running the defaults.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "experiment.num_users" => self.num_users = parse(key, value)?,
            "experiment.num_programs" => self.num_programs = parse(key, value)?,
            "experiment.rounds" => self.rounds = parse(key, value)?,
            "experiment.trials" => self.trials = parse(key, value)?,
            "experiment.base_seed" => self.base_seed = parse(key, value)?,
            "experiment.wtp_mode" => self.wtp_mode = parse(key, value)?,
            "experiment.reference_price" => self.reference_price = parse(key, value)?,
            "demand.max_fraction" => self.max_demand_fraction = parse(key, value)?,
            "topology.density" => self.density = parse(key, value)?,
            "topology.region_size" => self.region_size = parse(key, value)?,
            "link_cost.fixed_cost" => self.fixed_cost = parse(key, value)?,
            "link_cost.distance_rate" => self.distance_rate = parse(key, value)?,
            "link_cost.data_volume" => self.data_volume = parse(key, value)?,
            "pricing.micro_step" => self.micro_step = parse(key, value)?,
            "pricing.macro_step" => self.macro_step = parse(key, value)?,
            "pricing.price_floor" => self.price_floor = parse(key, value)?,
            "pricing.relative_gap" => self.relative_gap = parse(key, value)?,
            "market.micro_scope" => self.micro_scope = parse(key, value)?,
            "settlement.incentive_rate" => self.incentive_rate = parse(key, value)?,
            "settlement.margin" => self.margin = parse(key, value)?,
            "settlement.unicast_multiplier" => self.unicast_multiplier = parse(key, value)?,
            "settlement.peer_serving" => self.peer_serving = parse(key, value)?,
            "settlement.incentives_enabled" => self.incentives_enabled = parse(key, value)?,
            other => {
                return Err(SimError::InvalidConfig(format!("unknown config key '{other}'")))
            }
        }
        Ok(())
    }

    /// Loads `key = value` lines over the defaults. `#` starts a comment;
    /// blank lines are ignored.
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut config = Self::default();
        config.apply_file(path)?;
        Ok(config)
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(SimError::InvalidConfig(format!(
                    "{}:{}: expected 'key = value', got '{raw}'",
                    path.display(),
                    lineno + 1
                )));
            };
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(SimError::InvalidConfig(msg.to_string()))
            }
        };
        check(self.num_users >= 1, "experiment.num_users must be ≥ 1")?;
        check(self.num_programs >= 1, "experiment.num_programs must be ≥ 1")?;
        check(self.rounds >= 1, "experiment.rounds must be ≥ 1")?;
        check(self.trials >= 1, "experiment.trials must be ≥ 1")?;
        check(self.reference_price >= 0.0, "experiment.reference_price must be ≥ 0")?;
        check(
            self.max_demand_fraction > 0.0 && self.max_demand_fraction <= 1.0,
            "demand.max_fraction must be in (0, 1]",
        )?;
        check(self.density >= 0.0, "topology.density must be ≥ 0")?;
        check(self.region_size > 0.0, "topology.region_size must be > 0")?;
        check(self.fixed_cost >= 0.0, "link_cost.fixed_cost must be ≥ 0")?;
        check(self.distance_rate >= 0.0, "link_cost.distance_rate must be ≥ 0")?;
        check(self.data_volume > 0.0, "link_cost.data_volume must be > 0")?;
        check(self.unicast_multiplier >= 1.0, "settlement.unicast_multiplier must be ≥ 1")?;
        check(
            self.micro_step > 0.0 && self.macro_step > self.micro_step,
            "pricing steps must satisfy 0 < micro_step < macro_step",
        )?;
        check(self.price_floor >= 0.0, "pricing.price_floor must be ≥ 0")?;
        check(self.incentive_rate >= 0.0, "settlement.incentive_rate must be ≥ 0")?;
        check(
            (0.0..=1.0).contains(&self.margin),
            "settlement.margin must be in [0, 1]",
        )?;
        Ok(())
    }
}
