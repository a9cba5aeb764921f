//! Provider-side accounting once the revisit rounds are over and the
//! programs air: content revenue from the final assignments, network margins
//! on peer deliveries, origin delivery costs, incentive payouts earned
//! across the rounds, and the headline profit-gain percentage against the
//! unicast baseline.

use serde::Serialize;

use crate::market::{cheapest_assigned_peer, MarketState, NetworkModel, UserAgent};
use crate::topology::Topology;

/// Outcome of one paired trial. `gain_pct` is None when the unicast profit
/// is exactly zero, which flags the trial for exclusion from aggregates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrialResult {
    pub p2ptv_profit: f64,
    pub unicast_profit: f64,
    pub incentives_paid: f64,
    pub gain_pct: Option<f64>,
    pub rounds_used: u32,
    pub seed: u64,
}

/// Flat per-program serving reward; deliberately independent of content
/// value so cheap programs are as attractive to serve as expensive ones.
pub fn incentive_payout(programs_served: u32, rate: f64) -> f64 {
    debug_assert!(rate >= 0.0);
    programs_served as f64 * rate
}

/// Itemized provider ledger for one regime.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ProfitBreakdown {
    pub revenue: f64,
    pub margin_earned: f64,
    pub origin_costs: f64,
    pub incentives_paid: f64,
}

impl ProfitBreakdown {
    pub fn profit(&self) -> f64 {
        self.revenue + self.margin_earned - self.origin_costs - self.incentives_paid
    }
}

/// Settles the final state: every assigned user pays their program's price
/// once, deliveries resolving to a strictly cheaper peer earn the provider a
/// margin on the carried traffic, all others cost the provider the origin
/// unicast charge, and serving agents collect the incentives they earned
/// across the rounds.
pub fn settle(
    state: &MarketState,
    agents: &[UserAgent],
    topology: &Topology,
    net: &NetworkModel,
    margin: f64,
    incentive_rate: f64,
    peer_serving: bool,
) -> ProfitBreakdown {
    debug_assert!((0.0..=1.0).contains(&margin));
    let mut out = ProfitBreakdown::default();
    for agent in agents {
        out.incentives_paid += incentive_payout(agent.programs_served, incentive_rate);
        let Some(program) = state.assignments[agent.id] else {
            continue;
        };
        out.revenue += state.prices[program];
        let origin = net.origin_cost(topology, agent.id);
        let peer = if peer_serving {
            cheapest_assigned_peer(agent.id, program, &state.assignments, topology, net)
        } else {
            None
        };
        match peer {
            Some((_, cost)) if cost < origin => out.margin_earned += margin * cost,
            _ => out.origin_costs += origin,
        }
    }
    out
}

/// Provider profit under the peer-assisted regime.
pub fn compute_p2ptv_profit(
    state: &MarketState,
    agents: &[UserAgent],
    topology: &Topology,
    net: &NetworkModel,
    margin: f64,
    incentive_rate: f64,
) -> f64 {
    settle(state, agents, topology, net, margin, incentive_rate, true).profit()
}

/// Provider profit under the unicast baseline: no peer serving, no
/// incentives, every delivery at origin cost.
pub fn compute_unicast_profit(
    state: &MarketState,
    agents: &[UserAgent],
    topology: &Topology,
    net: &NetworkModel,
) -> f64 {
    settle(state, agents, topology, net, 0.0, 0.0, false).profit()
}

/// Percentage gain of the peer-assisted profit over the baseline; None when
/// the baseline is exactly zero (undefined, trial gets flagged).
pub fn profit_gain_pct(p2ptv: f64, unicast: f64) -> Option<f64> {
    if unicast == 0.0 {
        None
    } else {
        Some(100.0 * (p2ptv - unicast) / unicast.abs())
    }
}
