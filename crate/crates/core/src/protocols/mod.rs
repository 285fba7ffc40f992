//! Round engines for the five clustering protocols.
//!
//! Every engine advances the network by exactly one round: epoch upkeep,
//! self-election, cluster formation, data reporting, and delivery to the
//! base station, charging every transmission and reception through a shared
//! accounting context. Engines iterate nodes in ascending id order and keep
//! all keyed state in ordered maps, so a run is a pure function of its
//! configuration and seed.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::model::{Network, NodeId};
use crate::radio::{Message, RadioParams, Recipient, SizeTable};

mod leach;
mod mod_leach;
mod tcca;

pub(crate) use leach::run_leach_family;
pub(crate) use mod_leach::run_mod_family;

use crate::engine::SimState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProtocolKind {
    Leach,
    Tcca,
    SecLeach,
    ModLeach,
    ModSecLeach,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 5] = [
        ProtocolKind::Leach,
        ProtocolKind::Tcca,
        ProtocolKind::SecLeach,
        ProtocolKind::ModLeach,
        ProtocolKind::ModSecLeach,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::Leach => "leach",
            ProtocolKind::Tcca => "tcca",
            ProtocolKind::SecLeach => "sec-leach",
            ProtocolKind::ModLeach => "mod-leach",
            ProtocolKind::ModSecLeach => "mod-sec-leach",
        }
    }

    /// Whether the protocol authenticates messages with predistributed keys.
    pub fn keyed(self) -> bool {
        matches!(self, ProtocolKind::SecLeach | ProtocolKind::ModSecLeach)
    }
}

impl FromStr for ProtocolKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "leach" => Ok(ProtocolKind::Leach),
            "tcca" => Ok(ProtocolKind::Tcca),
            "sec-leach" | "sec_leach" => Ok(ProtocolKind::SecLeach),
            "mod-leach" | "mod_leach" => Ok(ProtocolKind::ModLeach),
            "mod-sec-leach" | "mod_sec_leach" => Ok(ProtocolKind::ModSecLeach),
            other => Err(format!(
                "unknown protocol {other:?}; expected one of leach, tcca, sec-leach, mod-leach, mod-sec-leach"
            )),
        }
    }
}

impl std::fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How the round moved data: the ordinary join/schedule/report pattern, or
/// the full/half broadcast-and-confirm pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundKind {
    Standard,
    FullTransmission,
    HalfTransmission,
}

/// Everything measured in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    pub round: u32,
    pub kind: RoundKind,
    pub transmissions: u64,
    pub receptions: u64,
    pub bits_control: u64,
    pub bits_data: u64,
    pub bits_security: u64,
    pub energy_nj: f64,
    pub ch_count: u32,
    pub orphan_count: u32,
    pub deaths: u32,
    pub bs_reports: u32,
    /// Sensor readings that reached the base station, aggregated or direct.
    pub readings_delivered: u32,
    pub alive_end: u32,
}

impl RoundReport {
    fn new(round: u32, kind: RoundKind) -> Self {
        RoundReport {
            round,
            kind,
            transmissions: 0,
            receptions: 0,
            bits_control: 0,
            bits_data: 0,
            bits_security: 0,
            energy_nj: 0.0,
            ch_count: 0,
            orphan_count: 0,
            deaths: 0,
            bs_reports: 0,
            readings_delivered: 0,
            alive_end: 0,
        }
    }

    pub fn bits_total(&self) -> u64 {
        self.bits_control + self.bits_data + self.bits_security
    }
}

/// One head and its accepted members in slot order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub head: NodeId,
    pub members: Vec<NodeId>,
}

/// Who clustered with whom this round, who fell back to direct delivery,
/// and the relay chain (nearest first) each multi-hop member used.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClusterAssignment {
    pub clusters: Vec<Cluster>,
    pub orphans: Vec<NodeId>,
    pub relay_paths: BTreeMap<NodeId, Vec<NodeId>>,
}

impl ClusterAssignment {
    pub fn head_of(&self, member: NodeId) -> Option<NodeId> {
        self.clusters.iter().find(|c| c.members.contains(&member)).map(|c| c.head)
    }
}

/// Charges radio work against the network and accumulates the round report.
/// Dead senders transmit nothing; a sender that dies from its own
/// transmission still gets the message out, so receivers are charged.
pub(crate) struct RoundCtx<'a> {
    pub net: &'a mut Network,
    radio: &'a RadioParams,
    sizes: &'a SizeTable,
    pub report: RoundReport,
}

impl<'a> RoundCtx<'a> {
    pub fn new(
        net: &'a mut Network,
        radio: &'a RadioParams,
        sizes: &'a SizeTable,
        round: u32,
        kind: RoundKind,
    ) -> Self {
        RoundCtx { net, radio, sizes, report: RoundReport::new(round, kind) }
    }

    fn drain(&mut self, id: NodeId, cost_nj: f64) {
        let debit = self.net.charge(id, cost_nj).expect("charging a checked alive node");
        self.report.energy_nj += debit;
        if !self.net.nodes[id].alive {
            self.report.deaths += 1;
        }
    }

    fn count_bits(&mut self, msg: &Message) -> u64 {
        let (control, data, security) = msg.class_split(self.sizes);
        self.report.bits_control += control;
        self.report.bits_data += data;
        self.report.bits_security += security;
        control + data + security
    }

    /// Broadcast to the given audience; the amplifier term is paid at the
    /// full radio range. The audience is filtered to alive nodes actually
    /// within range of the sender; the ids of those charged for reception
    /// are returned in the order given.
    pub fn broadcast(&mut self, msg: &Message, audience: &[NodeId]) -> Vec<NodeId> {
        debug_assert!(matches!(msg.recipient, Recipient::Broadcast));
        let sender = msg.sender;
        if !self.net.nodes[sender].alive {
            return Vec::new();
        }
        let bits = self.count_bits(msg);
        self.report.transmissions += 1;
        self.drain(sender, self.radio.tx_cost(bits, self.net.radio_range_m));
        let mut delivered = Vec::with_capacity(audience.len());
        for &id in audience {
            if id == sender || !self.net.nodes[id].alive {
                continue;
            }
            if self.net.distance(sender, id) > self.net.radio_range_m {
                continue;
            }
            self.report.receptions += 1;
            self.drain(id, self.radio.rx_cost(bits));
            delivered.push(id);
        }
        delivered
    }

    /// One point-to-point hop, paying the amplifier term over the actual
    /// distance. Returns whether the receiver was alive to take it.
    pub fn unicast_hop(&mut self, msg: &Message, from: NodeId, to: NodeId) -> bool {
        if !self.net.nodes[from].alive {
            return false;
        }
        let bits = self.count_bits(msg);
        self.report.transmissions += 1;
        self.drain(from, self.radio.tx_cost(bits, self.net.distance(from, to)));
        if !self.net.nodes[to].alive {
            return false;
        }
        self.report.receptions += 1;
        self.drain(to, self.radio.rx_cost(bits));
        true
    }

    /// Uplink to the base station over the true Euclidean distance. The base
    /// station pays nothing and always receives.
    pub fn send_to_bs(&mut self, msg: &Message, from: NodeId) {
        debug_assert!(matches!(msg.recipient, Recipient::Bs));
        if !self.net.nodes[from].alive {
            return;
        }
        let bits = self.count_bits(msg);
        self.report.transmissions += 1;
        self.drain(from, self.radio.tx_cost(bits, self.net.bs_distance(from)));
        self.report.bs_reports += 1;
    }

    /// Replays an already transmitted message at a receiver, as an attacker
    /// outside the network would. Only the reception is charged; injected
    /// traffic does not add to the transmitted bit totals.
    pub fn redeliver(&mut self, msg: &Message, to: NodeId) -> bool {
        if !self.net.nodes[to].alive {
            return false;
        }
        let (c, d, s) = msg.class_split(self.sizes);
        self.report.receptions += 1;
        self.drain(to, self.radio.rx_cost(c + d + s));
        true
    }

    pub fn finish(mut self) -> RoundReport {
        self.report.alive_end = self.net.alive_count() as u32;
        self.net.round_index += 1;
        self.report
    }
}

/// Runs one round of the configured protocol.
pub fn run_round(state: &mut SimState, cfg: &crate::engine::ScenarioConfig) -> RoundReport {
    match cfg.protocol {
        ProtocolKind::Leach => run_leach_family(state, cfg, false),
        ProtocolKind::SecLeach => run_leach_family(state, cfg, true),
        ProtocolKind::Tcca => tcca::run(state, cfg),
        ProtocolKind::ModLeach => run_mod_family(state, cfg, false),
        ProtocolKind::ModSecLeach => run_mod_family(state, cfg, true),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn protocol_names_round_trip() {
        for kind in ProtocolKind::ALL {
            assert_eq!(kind.name().parse::<ProtocolKind>().unwrap(), kind);
        }
        assert!("flood".parse::<ProtocolKind>().is_err());
    }

    #[test]
    fn keyed_flag_covers_the_secured_variants() {
        assert!(ProtocolKind::SecLeach.keyed());
        assert!(ProtocolKind::ModSecLeach.keyed());
        assert!(!ProtocolKind::Leach.keyed());
        assert!(!ProtocolKind::Tcca.keyed());
        assert!(!ProtocolKind::ModLeach.keyed());
    }

    #[test]
    fn assignment_lookup_finds_the_head() {
        let assignment = ClusterAssignment {
            clusters: vec![
                Cluster { head: 3, members: vec![1, 5] },
                Cluster { head: 7, members: vec![2] },
            ],
            orphans: vec![9],
            relay_paths: BTreeMap::new(),
        };
        assert_eq!(assignment.head_of(5), Some(3));
        assert_eq!(assignment.head_of(2), Some(7));
        assert_eq!(assignment.head_of(9), None);
    }
}
