//! Probabilistic cluster-head self-election.
//!
//! All protocols share the rotating-epoch threshold: a node that has not yet
//! served in the current epoch becomes a head when a single uniform draw
//! falls below its threshold. The energy-aware variants scale that threshold
//! by residual energy, floored at a configurable minimum so a depleted node
//! keeps a nonzero chance; the full/half-round variants split one draw over
//! two thresholds to grade heads into one-round and two-round service.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::Node;
use crate::protocols::ProtocolKind;

#[derive(Debug, Error, PartialEq)]
pub enum ElectionError {
    #[error("election probability p must lie in (0, 1), got {0}")]
    InvalidP(f64),
    #[error("threshold floor t_min must lie in [0, 1), got {0}")]
    InvalidTMin(f64),
}

/// Election probability, threshold floor, and the derived epoch length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElectionParams {
    pub p: f64,
    pub t_min: f64,
    pub epoch_len: u32,
}

impl ElectionParams {
    /// Derives the epoch length as `round(1/p)`, never below one round.
    pub fn new(p: f64, t_min: f64) -> Result<Self, ElectionError> {
        if !p.is_finite() || p <= 0.0 || p >= 1.0 {
            return Err(ElectionError::InvalidP(p));
        }
        if !t_min.is_finite() || !(0.0..1.0).contains(&t_min) {
            return Err(ElectionError::InvalidTMin(t_min));
        }
        let epoch_len = ((1.0 / p).round() as u32).max(1);
        Ok(ElectionParams { p, t_min, epoch_len })
    }

    /// True when `1/p` is not an integer and the epoch length was rounded.
    pub fn epoch_was_rounded(&self) -> bool {
        (1.0 / self.p).fract() != 0.0
    }
}

/// Rotating-epoch threshold: `p / (1 - p * (r mod epoch_len))` for nodes
/// still eligible this epoch, zero otherwise, clamped to [0, 1]. With the
/// derived epoch length the denominator stays positive, so the clamp is what
/// produces the guaranteed election at the end of an epoch.
pub fn leach_threshold(in_g: bool, round: u32, params: &ElectionParams) -> f64 {
    if !in_g {
        return 0.0;
    }
    let residue = (round % params.epoch_len) as f64;
    let denom = 1.0 - params.p * residue;
    if denom <= 0.0 {
        1.0
    } else {
        (params.p / denom).min(1.0)
    }
}

fn energy_scaled(
    in_g: bool,
    round: u32,
    params: &ElectionParams,
    ratio: f64,
) -> f64 {
    if !in_g {
        return 0.0;
    }
    let base = leach_threshold(true, round, params);
    (base * ratio).max(params.t_min).min(1.0)
}

/// Threshold scaled by `residual / max`, floored at `t_min`.
pub fn tcca_threshold(
    in_g: bool,
    round: u32,
    params: &ElectionParams,
    residual_nj: f64,
    max_nj: f64,
) -> f64 {
    debug_assert!(residual_nj >= 0.0 && residual_nj <= max_nj);
    energy_scaled(in_g, round, params, residual_nj / max_nj)
}

/// Threshold for heads that commit to serving two rounds: scaled by
/// `residual / (2 * max)`, floored at `t_min`.
pub fn mod_two_round_threshold(
    in_g: bool,
    round: u32,
    params: &ElectionParams,
    residual_nj: f64,
    max_nj: f64,
) -> f64 {
    debug_assert!(residual_nj >= 0.0 && residual_nj <= max_nj);
    energy_scaled(in_g, round, params, residual_nj / (2.0 * max_nj))
}

/// Threshold for one-round heads; identical to the energy-scaled rule.
pub fn mod_one_round_threshold(
    in_g: bool,
    round: u32,
    params: &ElectionParams,
    residual_nj: f64,
    max_nj: f64,
) -> f64 {
    tcca_threshold(in_g, round, params, residual_nj, max_nj)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElectionOutcome {
    NotCh,
    ChOneRound,
    ChTwoRounds,
}

/// Runs one node's election for the round. Consumes exactly one uniform draw
/// per electing node, even when the node's threshold is zero, so the random
/// stream does not depend on eligibility. Nodes already committed to serving
/// a second round skip the election and consume nothing. Winning marks the
/// node as having served this epoch.
pub fn self_elect(
    node: &mut Node,
    round: u32,
    protocol: ProtocolKind,
    params: &ElectionParams,
    rng: &mut ChaCha8Rng,
) -> ElectionOutcome {
    if !node.alive || node.serving_rounds_remaining > 0 {
        return ElectionOutcome::NotCh;
    }
    let in_g = !node.served_this_epoch;
    let u: f64 = rng.random();
    let outcome = match protocol {
        ProtocolKind::Leach | ProtocolKind::SecLeach => {
            if u < leach_threshold(in_g, round, params) {
                ElectionOutcome::ChOneRound
            } else {
                ElectionOutcome::NotCh
            }
        }
        ProtocolKind::Tcca => {
            let t = tcca_threshold(in_g, round, params, node.residual_energy_nj, node.max_energy_nj);
            if u < t {
                ElectionOutcome::ChOneRound
            } else {
                ElectionOutcome::NotCh
            }
        }
        ProtocolKind::ModLeach | ProtocolKind::ModSecLeach => {
            let two =
                mod_two_round_threshold(in_g, round, params, node.residual_energy_nj, node.max_energy_nj);
            let one =
                mod_one_round_threshold(in_g, round, params, node.residual_energy_nj, node.max_energy_nj);
            if u < two {
                ElectionOutcome::ChTwoRounds
            } else if u < one {
                ElectionOutcome::ChOneRound
            } else {
                ElectionOutcome::NotCh
            }
        }
    };
    if outcome != ElectionOutcome::NotCh {
        node.served_this_epoch = true;
    }
    outcome
}

/// Clears the served-this-epoch marks of alive nodes at epoch boundaries
/// (rounds that are multiples of the epoch length, including round zero).
pub fn advance_epoch(nodes: &mut [Node], round: u32, params: &ElectionParams) {
    if round.is_multiple_of(params.epoch_len) {
        for node in nodes.iter_mut().filter(|n| n.alive) {
            node.served_this_epoch = false;
        }
    }
}
