//! User network generation, link costs, and locality-based peer selection.
//!
//! Users are placed uniformly at random on a square region. A configured
//! density ratio (links per user) determines how many undirected links are
//! drawn between distinct users; links gate which peers a user may download
//! from. The provider's origin server sits at the region center and serves
//! anyone, at a per-distance rate marked up by the unicast multiplier.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SimError};

pub type NodeId = usize;

/// Linear link-cost model: cost = volume × (fixed + rate × distance).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkCostModel {
    pub fixed_cost: f64,
    pub per_distance_rate: f64,
}

/// Immutable user network for one trial.
#[derive(Clone, Debug, PartialEq)]
pub struct Topology {
    region_size: f64,
    positions: Vec<(f64, f64)>,
    links: Vec<(NodeId, NodeId)>,
    neighbors: Vec<Vec<NodeId>>,
}

impl Topology {
    /// Builds a topology from explicit positions and links, normalizing
    /// link order and adjacency. Useful for hand-crafted scenarios.
    pub fn from_parts(
        region_size: f64,
        positions: Vec<(f64, f64)>,
        mut links: Vec<(NodeId, NodeId)>,
    ) -> Result<Self> {
        if !(region_size > 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "region_size must be > 0, got {region_size}"
            )));
        }
        let n = positions.len();
        for l in &mut links {
            if l.0 > l.1 {
                *l = (l.1, l.0);
            }
            if l.0 == l.1 || l.1 >= n {
                return Err(SimError::InvalidConfig(format!(
                    "link ({}, {}) is not between two distinct known nodes",
                    l.0, l.1
                )));
            }
        }
        links.sort_unstable();
        links.dedup();
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in &links {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        Ok(Self { region_size, positions, links, neighbors })
    }

    pub fn num_nodes(&self) -> usize {
        self.positions.len()
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    pub fn region_size(&self) -> f64 {
        self.region_size
    }

    pub fn position(&self, id: NodeId) -> (f64, f64) {
        self.positions[id]
    }

    pub fn links(&self) -> &[(NodeId, NodeId)] {
        &self.links
    }

    /// Sorted list of nodes sharing a link with `id`.
    pub fn neighbors(&self, id: NodeId) -> &[NodeId] {
        &self.neighbors[id]
    }

    /// Straight-line distance between two users.
    pub fn distance(&self, a: NodeId, b: NodeId) -> f64 {
        let (ax, ay) = self.positions[a];
        let (bx, by) = self.positions[b];
        ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt()
    }

    /// The provider's origin server sits at the region center.
    pub fn origin(&self) -> (f64, f64) {
        (self.region_size / 2.0, self.region_size / 2.0)
    }

    pub fn origin_distance(&self, a: NodeId) -> f64 {
        let (ax, ay) = self.positions[a];
        let (ox, oy) = self.origin();
        ((ax - ox).powi(2) + (ay - oy).powi(2)).sqrt()
    }

    /// Line-oriented text dump for debugging:
    /// `node,<id>,<x>,<y>` per user, then `link,<a>,<b>` per link.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# region_size,{}\n", self.region_size));
        for (id, (x, y)) in self.positions.iter().enumerate() {
            out.push_str(&format!("node,{id},{x},{y}\n"));
        }
        for (a, b) in &self.links {
            out.push_str(&format!("link,{a},{b}\n"));
        }
        out
    }
}

/// Places `num_users` nodes uniformly on the square and draws exactly
/// round(density × num_users) distinct links, uniformly among all node pairs.
pub fn generate_topology(
    num_users: u32,
    density: f64,
    region_size: f64,
    seed: u64,
) -> Result<Topology> {
    if num_users < 1 {
        return Err(SimError::InvalidConfig("num_users must be ≥ 1".into()));
    }
    if !(density >= 0.0) {
        return Err(SimError::InvalidConfig(format!(
            "density must be ≥ 0, got {density}"
        )));
    }
    if !(region_size > 0.0) {
        return Err(SimError::InvalidConfig(format!(
            "region_size must be > 0, got {region_size}"
        )));
    }
    let n = num_users as usize;
    let max_links = n * (n - 1) / 2;
    let requested = (density * num_users as f64).round() as usize;
    if requested > max_links {
        return Err(SimError::TooManyLinks {
            density,
            num_users,
            requested,
            max: max_links,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            let x = rng.random_range(0.0..region_size);
            let y = rng.random_range(0.0..region_size);
            (x, y)
        })
        .collect();

    // Uniform sample without replacement over all unordered pairs.
    let mut pairs: Vec<(NodeId, NodeId)> = Vec::with_capacity(max_links);
    for a in 0..n {
        for b in (a + 1)..n {
            pairs.push((a, b));
        }
    }
    let (chosen, _) = pairs.partial_shuffle(&mut rng, requested);
    let mut links: Vec<(NodeId, NodeId)> = chosen.to_vec();
    links.sort_unstable();

    let mut neighbors = vec![Vec::new(); n];
    for &(a, b) in &links {
        neighbors[a].push(b);
        neighbors[b].push(a);
    }
    for list in &mut neighbors {
        list.sort_unstable();
    }

    Ok(Topology {
        region_size,
        positions,
        links,
        neighbors,
    })
}

/// Cost of moving one program of size `data_volume` across `distance`.
pub fn link_cost(distance: f64, model: &LinkCostModel, data_volume: f64) -> f64 {
    debug_assert!(distance >= 0.0 && data_volume >= 0.0);
    data_volume * (model.fixed_cost + model.per_distance_rate * distance)
}

/// Picks the candidate peer with the lowest link cost to the requester.
/// Ties break toward the lowest NodeId; an empty candidate set means the
/// content is served unicast from the origin server.
pub fn select_serving_peer(
    requester: NodeId,
    candidates: &[NodeId],
    topology: &Topology,
    model: &LinkCostModel,
) -> Option<NodeId> {
    let mut best: Option<(f64, NodeId)> = None;
    for &c in candidates {
        debug_assert_ne!(c, requester);
        let cost = link_cost(topology.distance(requester, c), model, 1.0);
        match best {
            None => best = Some((cost, c)),
            Some((bc, bid)) => {
                if cost < bc || (cost == bc && c < bid) {
                    best = Some((cost, c));
                }
            }
        }
    }
    best.map(|(_, id)| id)
}
