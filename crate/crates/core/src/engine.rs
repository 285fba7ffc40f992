//! Scenario configuration and the round loop.
//!
//! A [`ScenarioConfig`] plus a seed fully determines a run: the seed drives
//! node placement first (two draws per node, ascending id), then every
//! election draw and tie-break in round order. Keys, when a protocol uses
//! them, come from a separate master seed so enabling security never
//! perturbs topology or elections.

use thiserror::Error;

use crate::election::{ElectionError, ElectionParams};
use crate::keying::{assign_ring, FreshnessLedger, KeyPool, KeyingError};
use crate::model::{ModelError, Network, Point};
use crate::protocols::{self, ClusterAssignment, ProtocolKind, RoundReport};
use crate::radio::{RadioError, RadioParams, SizeTable};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("config key {key}: {reason}")]
    Config { key: &'static str, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Election(#[from] ElectionError),
    #[error(transparent)]
    Keying(#[from] KeyingError),
    #[error(transparent)]
    Radio(#[from] RadioError),
}

fn config_err(key: &'static str, reason: impl Into<String>) -> EngineError {
    EngineError::Config { key, reason: reason.into() }
}

/// Everything a run needs. Optional geometry falls back to a field sized so
/// average node density stays constant (a 100 m square per 100 nodes) with
/// the base station at the centre.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub protocol: ProtocolKind,
    pub nodes: usize,
    pub rounds: u32,
    pub seed: u64,
    pub initial_energy_nj: f64,
    /// Desired cluster-head fraction per round.
    pub p: f64,
    /// Threshold floor for the energy-scaled elections.
    pub t_min: f64,
    pub radio: RadioParams,
    pub sizes: SizeTable,
    pub field_side_m: Option<f64>,
    pub bs_x_m: Option<f64>,
    pub bs_y_m: Option<f64>,
    pub radio_range_m: f64,
    pub pool_size: u32,
    pub ring_size: u32,
    /// Master seed for key material; defaults to the run seed.
    pub key_master_seed: Option<u64>,
    pub tcca_initial_ttl: u8,
    /// Scale the advertisement TTL by residual energy instead of using the
    /// fixed initial value.
    pub tcca_energy_ttl: bool,
    pub tcca_ttl_max: u8,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            protocol: ProtocolKind::Leach,
            nodes: 100,
            rounds: 1000,
            seed: 1,
            initial_energy_nj: 5e8,
            p: 0.05,
            t_min: 0.01,
            radio: RadioParams::default(),
            sizes: SizeTable::default(),
            field_side_m: None,
            bs_x_m: None,
            bs_y_m: None,
            radio_range_m: 30.0,
            pool_size: 1000,
            ring_size: 50,
            key_master_seed: None,
            tcca_initial_ttl: 2,
            tcca_energy_ttl: false,
            tcca_ttl_max: 4,
        }
    }
}

impl ScenarioConfig {
    pub fn field_side(&self) -> f64 {
        self.field_side_m
            .unwrap_or_else(|| 100.0 * ((self.nodes.max(1)) as f64 / 100.0).sqrt())
    }

    pub fn bs_pos(&self) -> Point {
        let side = self.field_side();
        Point::new(self.bs_x_m.unwrap_or(side / 2.0), self.bs_y_m.unwrap_or(side / 2.0))
    }

    pub fn election_params(&self) -> Result<ElectionParams, EngineError> {
        Ok(ElectionParams::new(self.p, self.t_min)?)
    }

    pub fn key_pool(&self) -> KeyPool {
        KeyPool {
            pool_size: self.pool_size,
            master_seed: self.key_master_seed.unwrap_or(self.seed),
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        self.radio.validate()?;
        self.election_params()?;
        if !self.initial_energy_nj.is_finite() || self.initial_energy_nj < 0.0 {
            return Err(config_err(
                "initial_energy_nj",
                format!("must be finite and non-negative, got {}", self.initial_energy_nj),
            ));
        }
        if !self.radio_range_m.is_finite() || self.radio_range_m < 0.0 {
            return Err(config_err(
                "radio_range_m",
                format!("must be finite and non-negative, got {}", self.radio_range_m),
            ));
        }
        if let Some(side) = self.field_side_m {
            if !side.is_finite() || side <= 0.0 {
                return Err(config_err(
                    "field_side_m",
                    format!("must be finite and positive, got {side}"),
                ));
            }
        }
        for (key, value) in [("bs_x_m", self.bs_x_m), ("bs_y_m", self.bs_y_m)] {
            if let Some(v) = value {
                if !v.is_finite() || v < 0.0 {
                    return Err(config_err(key, format!("must be finite and non-negative, got {v}")));
                }
            }
        }
        if self.protocol.keyed() {
            if self.pool_size == 0 {
                return Err(config_err("pool_size", "must be positive for keyed protocols"));
            }
            if self.ring_size == 0 {
                return Err(config_err("ring_size", "must be positive for keyed protocols"));
            }
            if self.ring_size > self.pool_size {
                return Err(config_err(
                    "ring_size",
                    format!("ring size {} exceeds pool size {}", self.ring_size, self.pool_size),
                ));
            }
        }
        if self.protocol == ProtocolKind::Tcca {
            if self.tcca_initial_ttl == 0 {
                return Err(config_err("tcca_initial_ttl", "must be at least 1"));
            }
            if self.tcca_energy_ttl && self.tcca_ttl_max == 0 {
                return Err(config_err("tcca_ttl_max", "must be at least 1"));
            }
        }
        Ok(())
    }

    /// Deploys the network and key material for this scenario.
    pub fn build_state(&self) -> Result<SimState, EngineError> {
        self.validate()?;
        let params = self.election_params()?;
        let mut network = Network::deploy(
            self.nodes,
            self.field_side(),
            self.bs_pos(),
            self.radio_range_m,
            self.initial_energy_nj,
            self.seed,
        )?;
        let keys = if self.protocol.keyed() {
            let pool = self.key_pool();
            for node in &mut network.nodes {
                node.key_ring = Some(assign_ring(&pool, node.id, self.ring_size)?);
                node.pairwise_bs_key = Some(pool.bs_key_id(node.id));
            }
            Some(KeyMaterial { pool })
        } else {
            None
        };
        Ok(SimState {
            network,
            params,
            keys,
            freshness: FreshnessLedger::new(),
            tx_counters: vec![0; self.nodes],
            last_assignment: None,
            injection: InjectionPlan::default(),
            injected: 0,
            rejected: 0,
        })
    }
}

/// Key material shared by every node in a keyed run. Rings live on the nodes
/// themselves.
#[derive(Debug, Clone, Copy)]
pub struct KeyMaterial {
    pub pool: KeyPool,
}

/// Attack traffic to replay during the run: duplicates of accepted joins
/// (or their acknowledgement equivalents) and reports, re-delivered at the
/// original receiver right after the genuine copy.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InjectionPlan {
    pub duplicate_joins: bool,
    pub duplicate_reports: bool,
}

/// Mutable state of one running simulation.
pub struct SimState {
    pub network: Network,
    pub params: ElectionParams,
    pub keys: Option<KeyMaterial>,
    pub freshness: FreshnessLedger,
    /// Per-node transmit counters backing counter-based freshness.
    pub tx_counters: Vec<u64>,
    pub last_assignment: Option<ClusterAssignment>,
    pub injection: InjectionPlan,
    /// Replayed messages delivered so far.
    pub injected: u64,
    /// Replays the receiver refused.
    pub rejected: u64,
}

/// Per-round series plus enough context to derive every summary metric.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSeries {
    pub protocol: ProtocolKind,
    pub seed: u64,
    pub nodes: usize,
    pub initial_total_energy_nj: f64,
    pub data_bits: u64,
    pub rounds: Vec<RoundReport>,
    /// True when every node died before the configured round count.
    pub terminated_early: bool,
}

impl MetricsSeries {
    pub fn total_energy_nj(&self) -> f64 {
        self.rounds.iter().map(|r| r.energy_nj).sum()
    }

    pub fn total_bits(&self) -> u64 {
        self.rounds.iter().map(|r| r.bits_total()).sum()
    }

    /// Bits transmitted beyond one data payload per base-station packet:
    /// everything spent on coordination, relaying, and security.
    pub fn total_overload_bits(&self) -> u64 {
        self.rounds.iter().map(|r| overload_bits(r, self.data_bits)).sum()
    }

    pub fn total_bs_reports(&self) -> u64 {
        self.rounds.iter().map(|r| r.bs_reports as u64).sum()
    }

    pub fn total_readings_delivered(&self) -> u64 {
        self.rounds.iter().map(|r| r.readings_delivered as u64).sum()
    }

    pub fn dead_final(&self) -> u32 {
        self.rounds.last().map_or(0, |r| self.nodes as u32 - r.alive_end)
    }

    /// Rounds completed before the first death; the whole run if none died.
    pub fn rounds_all_alive(&self) -> u32 {
        for r in &self.rounds {
            if r.alive_end < self.nodes as u32 {
                return r.round;
            }
        }
        self.rounds.len() as u32
    }
}

/// Transmitted bits not accounted for by the data payload of each packet
/// that reached the base station.
pub fn overload_bits(report: &RoundReport, data_bits: u64) -> u64 {
    let useful = data_bits * report.bs_reports as u64;
    debug_assert!(report.bits_total() >= useful);
    report.bits_total().saturating_sub(useful)
}

/// Runs the scenario to completion (or until the network dies).
pub fn run_simulation(cfg: &ScenarioConfig) -> Result<MetricsSeries, EngineError> {
    let mut state = cfg.build_state()?;
    Ok(run_to_completion(&mut state, cfg))
}

/// Drives an already built state through the round loop. Useful when the
/// caller wants to pre-arm injection or inspect final state.
pub fn run_to_completion(state: &mut SimState, cfg: &ScenarioConfig) -> MetricsSeries {
    let initial_total = state.network.total_residual_nj();
    let mut rounds = Vec::with_capacity(cfg.rounds as usize);
    let mut terminated_early = false;
    for _ in 0..cfg.rounds {
        let report = protocols::run_round(state, cfg);
        rounds.push(report);
        if cfg.nodes > 0 && state.network.alive_count() == 0 {
            terminated_early = (rounds.len() as u32) < cfg.rounds;
            break;
        }
    }
    debug_assert!({
        let spent: f64 = rounds.iter().map(|r| r.energy_nj).sum();
        let remaining = state.network.total_residual_nj();
        (initial_total - remaining - spent).abs() <= 1e-9 * initial_total.max(1.0)
    });
    MetricsSeries {
        protocol: cfg.protocol,
        seed: cfg.seed,
        nodes: cfg.nodes,
        initial_total_energy_nj: initial_total,
        data_bits: cfg.sizes.data_bits,
        rounds,
        terminated_early,
    }
}

/// The same scenario replayed over several seeds.
#[derive(Debug, Clone)]
pub struct Replication {
    pub runs: Vec<MetricsSeries>,
}

impl Replication {
    /// Mean and sample standard deviation of a per-run statistic. A single
    /// run has zero spread by convention.
    pub fn stat(&self, f: impl Fn(&MetricsSeries) -> f64) -> (f64, f64) {
        let xs: Vec<f64> = self.runs.iter().map(f).collect();
        mean_sd(&xs)
    }
}

pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (xs.len() - 1) as f64;
    (mean, var.sqrt())
}

/// Runs the scenario once per seed, sequentially, in the order given.
pub fn replicate(cfg: &ScenarioConfig, seeds: &[u64]) -> Result<Replication, EngineError> {
    let mut runs = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let cfg = ScenarioConfig { seed, ..cfg.clone() };
        runs.push(run_simulation(&cfg)?);
    }
    Ok(Replication { runs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_geometry_scales_with_population() {
        let cfg = ScenarioConfig::default();
        assert_eq!(cfg.field_side(), 100.0);
        assert_eq!(cfg.bs_pos(), Point::new(50.0, 50.0));
        let big = ScenarioConfig { nodes: 400, ..cfg };
        assert_eq!(big.field_side(), 200.0);
    }

    #[test]
    fn validate_names_the_offending_key() {
        let cfg = ScenarioConfig { ring_size: 0, protocol: ProtocolKind::SecLeach, ..Default::default() };
        match cfg.validate() {
            Err(EngineError::Config { key, .. }) => assert_eq!(key, "ring_size"),
            other => panic!("expected a config error, got {other:?}"),
        }
        let cfg = ScenarioConfig { field_side_m: Some(-1.0), ..Default::default() };
        assert!(matches!(cfg.validate(), Err(EngineError::Config { key: "field_side_m", .. })));
        let cfg = ScenarioConfig { p: 0.0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn keyed_state_carries_rings_for_every_node() {
        let cfg = ScenarioConfig {
            protocol: ProtocolKind::SecLeach,
            nodes: 10,
            ..Default::default()
        };
        let state = cfg.build_state().unwrap();
        assert!(state.keys.is_some());
        for node in &state.network.nodes {
            assert_eq!(node.key_ring.as_ref().unwrap().len(), 50);
            assert_eq!(node.pairwise_bs_key, Some(1000 + node.id as u32));
        }
        let plain = ScenarioConfig { protocol: ProtocolKind::Leach, nodes: 10, ..Default::default() };
        let state = plain.build_state().unwrap();
        assert!(state.keys.is_none());
        assert!(state.network.nodes.iter().all(|n| n.key_ring.is_none()));
    }

    #[test]
    fn mean_sd_handles_degenerate_inputs() {
        assert_eq!(mean_sd(&[]), (0.0, 0.0));
        assert_eq!(mean_sd(&[4.0]), (4.0, 0.0));
        let (m, s) = mean_sd(&[2.0, 2.0, 2.0]);
        assert_eq!((m, s), (2.0, 0.0));
        let (m, s) = mean_sd(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn empty_network_runs_to_the_round_limit() {
        let cfg = ScenarioConfig { nodes: 0, rounds: 5, ..Default::default() };
        let series = run_simulation(&cfg).unwrap();
        assert_eq!(series.rounds.len(), 5);
        assert!(!series.terminated_early);
        assert_eq!(series.total_energy_nj(), 0.0);
        assert_eq!(series.total_bits(), 0);
    }
}
