//! Price discovery: demand targets, initial price inversion, and the two
//! adjustment rules. Small micro steps react to individual selection changes
//! inside a round; larger macro steps close the aggregate gap between rounds.

use crate::demand::{invert_prices, ElasticityMatrix};
use crate::error::{Result, SimError};

/// Step sizes (absolute price units) and the price floor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepPolicy {
    pub micro_step: f64,
    pub macro_step: f64,
    pub price_floor: f64,
    /// Scale macro steps by the relative demand gap instead of a plain
    /// fixed-size step in the gap's direction.
    pub relative_gap: bool,
}

impl StepPolicy {
    pub fn new(micro_step: f64, macro_step: f64, price_floor: f64, relative_gap: bool) -> Result<Self> {
        if !(micro_step > 0.0) || !(macro_step > 0.0) {
            return Err(SimError::InvalidConfig("step sizes must be positive".into()));
        }
        if micro_step >= macro_step {
            return Err(SimError::InvalidConfig(format!(
                "micro step {micro_step} must be smaller than macro step {macro_step}"
            )));
        }
        if price_floor < 0.0 {
            return Err(SimError::InvalidConfig("price floor must be ≥ 0".into()));
        }
        Ok(Self { micro_step, macro_step, price_floor, relative_gap })
    }

    /// Resolves fractional step sizes against a price scale (the mean
    /// initial price of the trial), keeping a tiny positive floor on the
    /// absolute steps so degenerate scales stay valid.
    pub fn from_fractions(
        scale: f64,
        micro_frac: f64,
        macro_frac: f64,
        price_floor: f64,
        relative_gap: bool,
    ) -> Result<Self> {
        let s = scale.max(1e-6);
        Self::new(micro_frac * s, macro_frac * s, price_floor, relative_gap)
    }
}

/// Demand targets: each cap is scaled down uniformly when the caps together
/// exceed what the population can absorb, so targets always satisfy
/// `tᵢ ≤ Dᵢ` and `Σ tᵢ ≤ M`.
pub fn derive_targets(d_max: &[f64], population: u32) -> Vec<f64> {
    let total: f64 = d_max.iter().sum();
    let m = population as f64;
    let scale = if total > m && total > 0.0 { m / total } else { 1.0 };
    d_max.iter().map(|&d| d * scale).collect()
}

/// Starting prices: the price vector whose aggregate demand hits the targets,
/// raised component-wise onto the floor.
pub fn initial_prices(
    h: &ElasticityMatrix,
    targets: &[f64],
    price_floor: f64,
) -> Result<Vec<f64>> {
    let p = invert_prices(h, targets)?;
    Ok(p.into_iter().map(|v| v.max(price_floor)).collect())
}

/// In-round nudge after a selection change: one micro step toward closing
/// the gap, never below the floor. On-target demand leaves the price alone.
pub fn micro_adjust(price: f64, demand: f64, target: f64, policy: &StepPolicy) -> f64 {
    let adjusted = if demand > target {
        price + policy.micro_step
    } else if demand < target {
        price - policy.micro_step
    } else {
        price
    };
    adjusted.max(policy.price_floor)
}

/// End-of-round correction. With relative gaps the step is scaled by
/// `min(1, |demand − target| / max(target, 1))`; otherwise it is a fixed
/// step in the direction of the gap. Floors apply either way.
pub fn macro_adjust(price: f64, demand: f64, target: f64, policy: &StepPolicy) -> f64 {
    let gap = demand - target;
    if gap == 0.0 {
        return price.max(policy.price_floor);
    }
    let magnitude = if policy.relative_gap {
        policy.macro_step * (gap.abs() / target.max(1.0)).min(1.0)
    } else {
        policy.macro_step
    };
    (price + magnitude.copysign(gap)).max(policy.price_floor)
}
