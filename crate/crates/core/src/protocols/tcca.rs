//! Time-controlled clustering: head advertisements flood outward under a
//! TTL, non-head receivers relay each distinct head's advertisement at most
//! once, and members outside direct range reach their head over the recorded
//! reverse relay path. Joins, schedules, and reports otherwise mirror the
//! single-hop round; every relay hop pays a full transmit and receive.

use std::collections::BTreeMap;

use crate::election::{advance_epoch, self_elect, ElectionOutcome};
use crate::engine::{ScenarioConfig, SimState};
use crate::model::{NodeId, Role};
use crate::protocols::{Cluster, ClusterAssignment, RoundCtx, RoundKind, RoundReport};
use crate::radio::Message;

#[derive(Debug, Clone, Copy)]
struct Arrival {
    hops: u32,
    /// The node whose rebroadcast this advertisement arrived through; the
    /// head itself for first-hop arrivals.
    parent: NodeId,
    parent_dist: f64,
}

/// TTL carried by a head's first advertisement. With the energy-scaled mode
/// on, healthier heads flood further.
fn initial_ttl(state: &SimState, cfg: &ScenarioConfig, ch: NodeId) -> u8 {
    if !cfg.tcca_energy_ttl {
        return cfg.tcca_initial_ttl;
    }
    let node = &state.network.nodes[ch];
    let ratio = node.residual_energy_nj / node.max_energy_nj;
    ((cfg.tcca_ttl_max as f64 * ratio).round() as u8).clamp(1, cfg.tcca_ttl_max)
}

pub(crate) fn run(state: &mut SimState, cfg: &ScenarioConfig) -> RoundReport {
    let round = state.network.round_index;
    let params = state.params;
    let n = state.network.nodes.len();

    advance_epoch(&mut state.network.nodes, round, &params);
    for node in &mut state.network.nodes {
        node.role = Role::Member;
    }

    let mut heads: Vec<NodeId> = Vec::new();
    {
        let (nodes, rng) = state.network.nodes_and_rng();
        for node in nodes.iter_mut() {
            if !node.alive {
                continue;
            }
            if self_elect(node, round, cfg.protocol, &params, rng) != ElectionOutcome::NotCh {
                node.role = Role::ClusterHead;
                heads.push(node.id);
            }
        }
    }
    let ttls: Vec<u8> = heads.iter().map(|&ch| initial_ttl(state, cfg, ch)).collect();

    let mut ctx =
        RoundCtx::new(&mut state.network, &cfg.radio, &cfg.sizes, round, RoundKind::Standard);
    ctx.report.ch_count = heads.len() as u32;

    // flood phase, wave by wave; arrivals[node] maps head -> best arrival
    let mut arrivals: Vec<BTreeMap<NodeId, Arrival>> = vec![BTreeMap::new(); n];
    // (relayer, head, ttl the relayer will stamp on its rebroadcast)
    let mut wave: Vec<(NodeId, NodeId, u8)> = Vec::new();
    for (&ch, &ttl) in heads.iter().zip(&ttls) {
        let msg = Message::tcca_adv(ch);
        let audience = ctx.net.neighbors(ch);
        for m in ctx.broadcast(&msg, &audience) {
            if ctx.net.nodes[m].role == Role::ClusterHead {
                continue;
            }
            let dist = ctx.net.distance(m, ch);
            arrivals[m].insert(ch, Arrival { hops: 1, parent: ch, parent_dist: dist });
            if ttl > 1 {
                wave.push((m, ch, ttl - 1));
            }
        }
    }
    while !wave.is_empty() {
        // within a wave all arrivals tie on hop count, so the survivor per
        // (node, head) is the one through the nearest (then lowest) relayer
        let mut fresh: BTreeMap<(NodeId, NodeId), (Arrival, u8)> = BTreeMap::new();
        for (relayer, ch, ttl) in wave.drain(..) {
            if !ctx.net.nodes[relayer].alive || ctx.net.nodes[relayer].role == Role::ClusterHead {
                continue;
            }
            let msg = Message::tcca_adv_relay(relayer);
            let audience = ctx.net.neighbors(relayer);
            let hops = arrivals[relayer][&ch].hops + 1;
            for m in ctx.broadcast(&msg, &audience) {
                if ctx.net.nodes[m].role == Role::ClusterHead || arrivals[m].contains_key(&ch) {
                    continue;
                }
                let cand =
                    Arrival { hops, parent: relayer, parent_dist: ctx.net.distance(m, relayer) };
                fresh
                    .entry((m, ch))
                    .and_modify(|(best, _)| {
                        if (cand.parent_dist, cand.parent) < (best.parent_dist, best.parent) {
                            *best = cand;
                        }
                    })
                    .or_insert((cand, ttl));
            }
        }
        let mut next: Vec<(NodeId, NodeId, u8)> = Vec::new();
        for ((m, ch), (arrival, ttl)) in fresh {
            arrivals[m].insert(ch, arrival);
            if ttl > 1 {
                next.push((m, ch, ttl - 1));
            }
        }
        next.sort_unstable_by_key(|&(m, ch, _)| (ch, m));
        wave = next;
    }

    // membership: fewest hops, then nearest last-hop transmitter, then
    // lowest head id; the join retraces the arrival path toward the head
    let mut clusters: BTreeMap<NodeId, Vec<NodeId>> =
        heads.iter().map(|&h| (h, Vec::new())).collect();
    let mut relay_paths: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    let mut orphans: Vec<NodeId> = Vec::new();
    let mut member_path: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for m in 0..n {
        if !ctx.net.nodes[m].alive || ctx.net.nodes[m].role == Role::ClusterHead {
            continue;
        }
        if arrivals[m].is_empty() {
            orphans.push(m);
            continue;
        }
        let (&target, _) = arrivals[m]
            .iter()
            .min_by(|(ida, a), (idb, b)| {
                (a.hops, a.parent_dist, **ida).partial_cmp(&(b.hops, b.parent_dist, **idb))
                    .expect("distances are finite")
            })
            .expect("arrival map is non-empty");
        // hop sequence m -> ... -> target, built by walking parents
        let mut path = vec![m];
        let mut cur = m;
        while cur != target {
            let parent = arrivals[cur][&target].parent;
            path.push(parent);
            cur = parent;
        }
        let mut delivered = true;
        for pair in path.windows(2) {
            let (from, to) = (pair[0], pair[1]);
            if !ctx.net.nodes[from].alive {
                delivered = false;
                break;
            }
            let msg = Message::tcca_join(from, to);
            if !ctx.unicast_hop(&msg, from, to) {
                delivered = false;
                break;
            }
        }
        if delivered {
            clusters.get_mut(&target).expect("target is an elected head").push(m);
            member_path.insert(m, path.clone());
            if path.len() > 2 {
                relay_paths.insert(m, path[1..path.len() - 1].to_vec());
            }
        }
    }

    // schedule phase: one broadcast per head; slot order is join order
    for (&ch, members) in &clusters {
        if members.is_empty() || !ctx.net.nodes[ch].alive {
            continue;
        }
        let msg = Message::schedule(ch, members.len());
        let audience = ctx.net.neighbors(ch);
        ctx.broadcast(&msg, &audience);
    }

    // report phase: reports retrace the same path hop by hop
    let mut readings: BTreeMap<NodeId, u32> = clusters.keys().map(|&h| (h, 0)).collect();
    for (&ch, members) in &clusters {
        for &m in members {
            if !ctx.net.nodes[m].alive {
                continue;
            }
            let path = &member_path[&m];
            let mut delivered = true;
            for pair in path.windows(2) {
                let (from, to) = (pair[0], pair[1]);
                if !ctx.net.nodes[from].alive {
                    delivered = false;
                    break;
                }
                let msg = Message::report(from, to);
                if !ctx.unicast_hop(&msg, from, to) {
                    delivered = false;
                    break;
                }
            }
            if delivered {
                *readings.get_mut(&ch).expect("head has a readings slot") += 1;
                if state.injection.duplicate_reports {
                    state.injected += 1;
                    // replay the final hop at the head
                    let last = path[path.len() - 2];
                    let msg = Message::report(last, ch);
                    if ctx.redeliver(&msg, ch) {
                        // nothing rejects unauthenticated replays
                    } else {
                        state.rejected += 1;
                    }
                }
            }
        }
    }

    // uplink phase
    for &ch in clusters.keys() {
        if !ctx.net.nodes[ch].alive {
            continue;
        }
        ctx.send_to_bs(&Message::bs_packet(ch), ch);
        ctx.report.readings_delivered += readings[&ch] + 1;
    }
    let mut orphan_sent = 0;
    for &m in &orphans {
        if !ctx.net.nodes[m].alive {
            continue;
        }
        ctx.send_to_bs(&Message::direct_bs_packet(m), m);
        ctx.report.readings_delivered += 1;
        orphan_sent += 1;
    }
    ctx.report.orphan_count = orphan_sent;

    state.last_assignment = Some(ClusterAssignment {
        clusters: clusters.into_iter().map(|(head, members)| Cluster { head, members }).collect(),
        orphans,
        relay_paths,
    });
    ctx.finish()
}
