//! The agent layer: surplus-maximizing program choice with abstention, the
//! per-round revisit loop, and peer-serving credit.
//!
//! Within a round, agents are visited in a freshly shuffled order. Each agent
//! faces the content price plus a network charge that depends on who else is
//! currently assigned nearby, picks the program with the largest non-negative
//! surplus (or abstains), and every selection change triggers a micro price
//! step. A macro step closes out the round.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::pricing::{macro_adjust, micro_adjust, StepPolicy};
use crate::topology::{link_cost, LinkCostModel, NodeId, Topology};

/// One viewer: a node in the topology with a private WTP row.
#[derive(Clone, Debug, PartialEq)]
pub struct UserAgent {
    pub id: NodeId,
    pub wtp: Vec<f64>,
    /// Rounds in which this agent ended up serving at least one peer.
    pub programs_served: u32,
}

impl UserAgent {
    pub fn new(id: NodeId, wtp: Vec<f64>) -> Self {
        Self { id, wtp, programs_served: 0 }
    }
}

/// Mutable marketplace snapshot. `assignments` (indexed by node id) is the
/// source of truth; `observed_demand` is the per-program count kept in sync
/// incrementally and checkable via `recount_demand`.
#[derive(Clone, Debug, PartialEq)]
pub struct MarketState {
    pub prices: Vec<f64>,
    pub observed_demand: Vec<f64>,
    pub target_popularity: Vec<f64>,
    pub assignments: Vec<Option<usize>>,
    pub round_index: u32,
}

impl MarketState {
    pub fn new(prices: Vec<f64>, target_popularity: Vec<f64>, num_users: usize) -> Self {
        assert_eq!(prices.len(), target_popularity.len());
        let n = prices.len();
        Self {
            prices,
            observed_demand: vec![0.0; n],
            target_popularity,
            assignments: vec![None; num_users],
            round_index: 0,
        }
    }

    pub fn num_programs(&self) -> usize {
        self.prices.len()
    }

    /// Demand recomputed from scratch; equals `observed_demand` by invariant.
    pub fn recount_demand(&self) -> Vec<f64> {
        let mut counts = vec![0.0; self.num_programs()];
        for a in self.assignments.iter().flatten() {
            counts[*a] += 1.0;
        }
        counts
    }

    pub fn participants(&self) -> usize {
        self.assignments.iter().flatten().count()
    }
}

/// Which prices a micro step touches after a selection change.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MicroScope {
    /// Only the program(s) whose demand just changed.
    Changed,
    /// Every program.
    All,
}

/// Peer and origin delivery cost models plus the per-program data volume.
/// The origin server sits at the region center; its per-distance rate is the
/// peer rate scaled by the unicast multiplier (≥ 1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NetworkModel {
    pub peer: LinkCostModel,
    pub origin: LinkCostModel,
    pub data_volume: f64,
}

impl NetworkModel {
    pub fn new(peer: LinkCostModel, unicast_multiplier: f64, data_volume: f64) -> Self {
        debug_assert!(unicast_multiplier >= 1.0);
        let origin = LinkCostModel {
            fixed_cost: peer.fixed_cost,
            per_distance_rate: peer.per_distance_rate * unicast_multiplier,
        };
        Self { peer, origin, data_volume }
    }

    pub fn origin_cost(&self, topology: &Topology, user: NodeId) -> f64 {
        link_cost(topology.origin_distance(user), &self.origin, self.data_volume)
    }

    pub fn peer_cost(&self, topology: &Topology, a: NodeId, b: NodeId) -> f64 {
        link_cost(topology.distance(a, b), &self.peer, self.data_volume)
    }
}

/// Cheapest adjacent peer currently assigned to `program`, with its delivery
/// cost. Ties go to the lowest peer id. Allocation-free neighbor scan.
pub fn cheapest_assigned_peer(
    user: NodeId,
    program: usize,
    assignments: &[Option<usize>],
    topology: &Topology,
    net: &NetworkModel,
) -> Option<(NodeId, f64)> {
    let mut best: Option<(NodeId, f64)> = None;
    for &peer in topology.neighbors(user) {
        if assignments[peer] != Some(program) {
            continue;
        }
        let cost = net.peer_cost(topology, user, peer);
        // Neighbors are sorted ascending, so keeping strict improvements
        // leaves the lowest id in place on cost ties.
        if best.map_or(true, |(_, bc)| cost < bc) {
            best = Some((peer, cost));
        }
    }
    best
}

/// What delivering `program` to `user` costs right now: the cheapest serving
/// peer when one is strictly cheaper than the origin server, else the origin
/// unicast cost. With peer serving disabled it is always the origin cost.
pub fn network_charge(
    user: NodeId,
    program: usize,
    assignments: &[Option<usize>],
    topology: &Topology,
    net: &NetworkModel,
    peer_serving: bool,
) -> f64 {
    let origin = net.origin_cost(topology, user);
    if !peer_serving {
        return origin;
    }
    match cheapest_assigned_peer(user, program, assignments, topology, net) {
        Some((_, cost)) if cost < origin => cost,
        _ => origin,
    }
}

/// Surplus-maximizing choice: argmax of wtp − (price + network charge), with
/// abstention when even the best surplus is negative. Ties break to the
/// lowest program index.
pub fn choose_program(wtp: &[f64], prices: &[f64], network_charges: &[f64]) -> Option<usize> {
    debug_assert_eq!(wtp.len(), prices.len());
    debug_assert_eq!(wtp.len(), network_charges.len());
    let mut best: Option<(usize, f64)> = None;
    for i in 0..wtp.len() {
        let surplus = wtp[i] - (prices[i] + network_charges[i]);
        if best.map_or(true, |(_, bs)| surplus > bs) {
            best = Some((i, surplus));
        }
    }
    best.filter(|&(_, s)| s >= 0.0).map(|(i, _)| i)
}

/// Everything a round needs besides the mutable state.
#[derive(Clone, Copy)]
pub struct RoundParams<'a> {
    pub topology: &'a Topology,
    pub net: &'a NetworkModel,
    pub policy: &'a StepPolicy,
    pub micro_scope: MicroScope,
    pub peer_serving: bool,
}

/// One full round: shuffled revisits with micro steps on each selection
/// change, then a macro step per program, then peer-serving credit.
pub fn run_round(
    state: &mut MarketState,
    agents: &mut [UserAgent],
    params: &RoundParams,
    shuffle_rng: &mut ChaCha8Rng,
) {
    debug_assert!(agents.iter().enumerate().all(|(k, a)| a.id == k));
    let n = state.num_programs();
    let mut order: Vec<usize> = (0..agents.len()).collect();
    order.shuffle(shuffle_rng);

    let mut charges = vec![0.0; n];
    for &idx in &order {
        let agent = &agents[idx];
        for (i, c) in charges.iter_mut().enumerate() {
            *c = network_charge(
                agent.id,
                i,
                &state.assignments,
                params.topology,
                params.net,
                params.peer_serving,
            );
        }
        let choice = choose_program(&agent.wtp, &state.prices, &charges);
        let previous = state.assignments[agent.id];
        if choice == previous {
            continue;
        }
        // The old program's demand drops before the new pick is recorded.
        if let Some(old) = previous {
            state.observed_demand[old] -= 1.0;
        }
        state.assignments[agent.id] = choice;
        if let Some(new) = choice {
            state.observed_demand[new] += 1.0;
        }
        match params.micro_scope {
            MicroScope::Changed => {
                for p in [previous, choice].into_iter().flatten() {
                    state.prices[p] = micro_adjust(
                        state.prices[p],
                        state.observed_demand[p],
                        state.target_popularity[p],
                        params.policy,
                    );
                }
            }
            MicroScope::All => {
                for p in 0..n {
                    state.prices[p] = micro_adjust(
                        state.prices[p],
                        state.observed_demand[p],
                        state.target_popularity[p],
                        params.policy,
                    );
                }
            }
        }
    }

    for p in 0..n {
        state.prices[p] = macro_adjust(
            state.prices[p],
            state.observed_demand[p],
            state.target_popularity[p],
            params.policy,
        );
    }
    state.round_index += 1;

    credit_serving_peers(state, agents, params);
}

/// An agent earns one serving credit for the round when at least one other
/// agent's delivery resolves to them (cheapest assigned peer, strictly
/// cheaper than the origin server).
fn credit_serving_peers(state: &MarketState, agents: &mut [UserAgent], params: &RoundParams) {
    if !params.peer_serving {
        return;
    }
    let mut served_someone = vec![false; agents.len()];
    for agent in agents.iter() {
        if let Some(program) = state.assignments[agent.id] {
            let origin = params.net.origin_cost(params.topology, agent.id);
            if let Some((peer, cost)) = cheapest_assigned_peer(
                agent.id,
                program,
                &state.assignments,
                params.topology,
                params.net,
            ) {
                if cost < origin {
                    served_someone[peer] = true;
                }
            }
        }
    }
    for (agent, served) in agents.iter_mut().zip(&served_someone) {
        if *served {
            agent.programs_served += 1;
        }
    }
}
