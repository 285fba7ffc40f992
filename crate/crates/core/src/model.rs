//! Node and network state.
//!
//! A network is a fixed population of sensor nodes scattered uniformly over
//! a square field, plus a base station that is not a node and never pays for
//! radio work. Nodes own their residual energy; draining it to exactly zero
//! kills the node for the rest of the run. All placement randomness comes
//! from one seeded generator, drawn in ascending node id order, so a seed
//! fully determines the topology.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::keying::{KeyId, KeyRing};

pub type NodeId = usize;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("model parameter {name} must be finite and non-negative, got {value}")]
    InvalidParam { name: &'static str, value: f64 },
    #[error("node id {0} out of range")]
    NoSuchNode(NodeId),
    #[error("node {0} is dead and cannot be charged")]
    DeadNode(NodeId),
    #[error("energy charge must be finite and non-negative, got {0}")]
    InvalidCharge(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Role {
    #[default]
    Member,
    ClusterHead,
}

/// A cluster head remembered from a full-transmission round, valid for the
/// given number of upcoming rounds (in practice zero or one).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RememberedCh {
    pub ch: NodeId,
    pub rounds_remaining: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub pos: Point,
    pub residual_energy_nj: f64,
    pub max_energy_nj: f64,
    pub alive: bool,
    pub role: Role,
    /// Set once the node has won an election in the current epoch.
    pub served_this_epoch: bool,
    /// Member-side memory of a two-round head it acknowledged.
    pub remembered_ch: Option<RememberedCh>,
    /// Head-side commitment to keep serving without re-election.
    pub serving_rounds_remaining: u8,
    pub key_ring: Option<KeyRing>,
    pub pairwise_bs_key: Option<KeyId>,
}

impl Node {
    fn new(id: NodeId, pos: Point, energy_nj: f64) -> Self {
        Node {
            id,
            pos,
            residual_energy_nj: energy_nj,
            max_energy_nj: energy_nj,
            alive: true,
            role: Role::Member,
            served_this_epoch: false,
            remembered_ch: None,
            serving_rounds_remaining: 0,
            key_ring: None,
            pairwise_bs_key: None,
        }
    }

    #[cfg(test)]
    pub(crate) fn test_node(id: NodeId, energy_nj: f64) -> Self {
        Node::new(id, Point::new(0.0, 0.0), energy_nj)
    }
}

#[derive(Debug, Clone)]
pub struct Network {
    pub nodes: Vec<Node>,
    pub bs_pos: Point,
    pub field_side_m: f64,
    pub radio_range_m: f64,
    pub round_index: u32,
    /// Ids within radio range of each node, self excluded, ascending.
    /// Positions never change, so this is computed once; liveness is
    /// filtered at lookup time.
    in_range: Vec<Vec<NodeId>>,
    rng: ChaCha8Rng,
}

fn check_param(name: &'static str, value: f64) -> Result<(), ModelError> {
    if !value.is_finite() || value < 0.0 {
        return Err(ModelError::InvalidParam { name, value });
    }
    Ok(())
}

impl Network {
    /// Scatters `n` nodes uniformly over a `field_side` square. Each node
    /// consumes exactly two draws (x then y) in ascending id order before
    /// any other use of the generator.
    pub fn deploy(
        n: usize,
        field_side_m: f64,
        bs_pos: Point,
        radio_range_m: f64,
        initial_energy_nj: f64,
        seed: u64,
    ) -> Result<Self, ModelError> {
        check_param("field_side_m", field_side_m)?;
        check_param("radio_range_m", radio_range_m)?;
        check_param("initial_energy_nj", initial_energy_nj)?;
        check_param("bs_x_m", bs_pos.x)?;
        check_param("bs_y_m", bs_pos.y)?;
        if n > 0 && field_side_m == 0.0 {
            return Err(ModelError::InvalidParam { name: "field_side_m", value: field_side_m });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let positions: Vec<Point> = (0..n)
            .map(|_| {
                let x = rng.random::<f64>() * field_side_m;
                let y = rng.random::<f64>() * field_side_m;
                Point::new(x, y)
            })
            .collect();
        Ok(Self::build(positions, field_side_m, bs_pos, radio_range_m, initial_energy_nj, rng))
    }

    /// Builds a network with explicit positions; placement consumes no
    /// randomness. Used by hand-constructed topologies.
    pub fn from_positions(
        positions: Vec<Point>,
        bs_pos: Point,
        radio_range_m: f64,
        initial_energy_nj: f64,
        seed: u64,
    ) -> Result<Self, ModelError> {
        check_param("radio_range_m", radio_range_m)?;
        check_param("initial_energy_nj", initial_energy_nj)?;
        for p in &positions {
            check_param("position_x", p.x)?;
            check_param("position_y", p.y)?;
        }
        let side = positions
            .iter()
            .flat_map(|p| [p.x, p.y])
            .fold(0.0f64, f64::max);
        let rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self::build(positions, side, bs_pos, radio_range_m, initial_energy_nj, rng))
    }

    fn build(
        positions: Vec<Point>,
        field_side_m: f64,
        bs_pos: Point,
        radio_range_m: f64,
        initial_energy_nj: f64,
        rng: ChaCha8Rng,
    ) -> Self {
        let nodes: Vec<Node> = positions
            .into_iter()
            .enumerate()
            .map(|(id, pos)| Node::new(id, pos, initial_energy_nj))
            .collect();
        let in_range = nodes
            .iter()
            .map(|a| {
                nodes
                    .iter()
                    .filter(|b| b.id != a.id && a.pos.distance(&b.pos) <= radio_range_m)
                    .map(|b| b.id)
                    .collect()
            })
            .collect();
        Network { nodes, bs_pos, field_side_m, radio_range_m, round_index: 0, in_range, rng }
    }

    /// Alive nodes within `range_m` of the node, excluding itself, in
    /// ascending id order. A dead origin has no neighbours. The boundary is
    /// inclusive: a node at exactly `range_m` is reachable.
    pub fn neighbors_within(&self, id: NodeId, range_m: f64) -> Vec<NodeId> {
        let Some(origin) = self.nodes.get(id) else { return Vec::new() };
        if !origin.alive {
            return Vec::new();
        }
        if range_m == self.radio_range_m {
            return self.in_range[id].iter().copied().filter(|&j| self.nodes[j].alive).collect();
        }
        self.nodes
            .iter()
            .filter(|b| b.alive && b.id != id && origin.pos.distance(&b.pos) <= range_m)
            .map(|b| b.id)
            .collect()
    }

    /// Alive nodes within the configured radio range of the node.
    pub fn neighbors(&self, id: NodeId) -> Vec<NodeId> {
        self.neighbors_within(id, self.radio_range_m)
    }

    /// Debits energy from an alive node, clamping at zero. Returns the
    /// amount actually drained. Hitting exactly zero marks the node dead.
    pub fn charge(&mut self, id: NodeId, cost_nj: f64) -> Result<f64, ModelError> {
        if !cost_nj.is_finite() || cost_nj < 0.0 {
            return Err(ModelError::InvalidCharge(cost_nj));
        }
        let node = self.nodes.get_mut(id).ok_or(ModelError::NoSuchNode(id))?;
        if !node.alive {
            return Err(ModelError::DeadNode(id));
        }
        let debit = if cost_nj >= node.residual_energy_nj {
            let all = node.residual_energy_nj;
            node.residual_energy_nj = 0.0;
            node.alive = false;
            all
        } else {
            node.residual_energy_nj -= cost_nj;
            cost_nj
        };
        Ok(debit)
    }

    pub fn distance(&self, a: NodeId, b: NodeId) -> f64 {
        self.nodes[a].pos.distance(&self.nodes[b].pos)
    }

    pub fn bs_distance(&self, id: NodeId) -> f64 {
        self.nodes[id].pos.distance(&self.bs_pos)
    }

    pub fn alive_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.alive).count()
    }

    pub fn total_residual_nj(&self) -> f64 {
        self.nodes.iter().map(|n| n.residual_energy_nj).sum()
    }

    pub fn draw_unit(&mut self) -> f64 {
        self.rng.random()
    }

    /// Splits the borrow so election code can mutate nodes while drawing
    /// from the shared generator.
    pub fn nodes_and_rng(&mut self) -> (&mut [Node], &mut ChaCha8Rng) {
        (&mut self.nodes, &mut self.rng)
    }
}
