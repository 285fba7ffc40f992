//! The advertise/join/schedule/report round shared by the plain and keyed
//! single-hop protocols. The keyed variant filters joins down to heads the
//! member shares a predistributed key with, authenticates every unicast, and
//! checks freshness at the receiver; everything else is identical.

use std::collections::BTreeMap;

use crate::election::{advance_epoch, self_elect, ElectionOutcome};
use crate::engine::{ScenarioConfig, SimState};
use crate::keying::{
    hash_nonce_cycle, shared_key, FreshnessLedger, FreshnessValue, KeyId, KeyPool,
};
use crate::model::{Network, NodeId, Role};
use crate::protocols::{Cluster, ClusterAssignment, RoundCtx, RoundKind, RoundReport};
use crate::radio::{Auth, Message, MessageKind};

/// Receiver word used when authenticating packets bound for the base
/// station, which has no node id.
pub(crate) const BS_RECEIVER: u64 = u64::MAX;

pub(crate) fn freshness_word(v: FreshnessValue) -> u64 {
    match v {
        FreshnessValue::NonceDerived(x) => x,
        FreshnessValue::Counter(c) => c,
    }
}

pub(crate) fn make_auth(
    pool: &KeyPool,
    key: KeyId,
    sender: NodeId,
    receiver: u64,
    kind: MessageKind,
    fresh: FreshnessValue,
    mac_bits: u64,
) -> Auth {
    let mac = pool.mac(key, &[sender as u64, receiver, kind as u64, freshness_word(fresh)], mac_bits);
    Auth { key, freshness: fresh, mac }
}

/// Receiver-side check: recompute the tag over the claimed content and
/// consult the per-link freshness ledger. Replayed messages fail the ledger.
pub(crate) fn verify_auth(
    pool: &KeyPool,
    ledger: &mut FreshnessLedger,
    msg: &Message,
    receiver: NodeId,
    mac_bits: u64,
) -> bool {
    let Some(auth) = msg.auth else { return false };
    let expect = pool.mac(
        auth.key,
        &[msg.sender as u64, receiver as u64, msg.kind as u64, freshness_word(auth.freshness)],
        mac_bits,
    );
    expect == auth.mac && ledger.check_and_record(msg.sender, receiver, auth.freshness)
}

pub(crate) fn ring_shared(net: &Network, a: NodeId, b: NodeId) -> Option<KeyId> {
    match (&net.nodes[a].key_ring, &net.nodes[b].key_ring) {
        (Some(ra), Some(rb)) => shared_key(ra, rb),
        _ => None,
    }
}

pub(crate) fn next_counter(counters: &mut [u64], id: NodeId) -> u64 {
    counters[id] += 1;
    counters[id]
}

pub(crate) fn run_leach_family(
    state: &mut SimState,
    cfg: &ScenarioConfig,
    keyed: bool,
) -> RoundReport {
    let round = state.network.round_index;
    let params = state.params;
    let n = state.network.nodes.len();
    let pool = state.keys.as_ref().map(|k| k.pool);
    let mac_bits = cfg.sizes.mac_bits;

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

    let mut ctx =
        RoundCtx::new(&mut state.network, &cfg.radio, &cfg.sizes, round, RoundKind::Standard);
    ctx.report.ch_count = heads.len() as u32;

    // advertisement phase: heads announce themselves one radio range out
    let mut heard: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for &ch in &heads {
        let msg = if keyed { Message::sec_adv(ch) } else { Message::adv(ch) };
        let audience = ctx.net.neighbors(ch);
        for m in ctx.broadcast(&msg, &audience) {
            if ctx.net.nodes[m].role != Role::ClusterHead {
                heard.entry(m).or_default().push(ch);
            }
        }
    }

    // join phase: members pick the nearest usable head, lowest id on ties
    let mut clusters: BTreeMap<NodeId, Vec<NodeId>> =
        heads.iter().map(|&h| (h, Vec::new())).collect();
    let mut orphans: Vec<NodeId> = Vec::new();
    for m in 0..n {
        if !ctx.net.nodes[m].alive || ctx.net.nodes[m].role == Role::ClusterHead {
            continue;
        }
        let mut cands: Vec<NodeId> = heard.get(&m).cloned().unwrap_or_default();
        if keyed {
            cands.retain(|&ch| ring_shared(ctx.net, m, ch).is_some());
        }
        if cands.is_empty() {
            orphans.push(m);
            continue;
        }
        let target = cands
            .iter()
            .copied()
            .min_by(|&a, &b| {
                ctx.net.distance(m, a).total_cmp(&ctx.net.distance(m, b)).then(a.cmp(&b))
            })
            .expect("candidate list is non-empty");
        let msg = if keyed {
            let pool = pool.as_ref().expect("keyed protocols carry a key pool");
            let key = ring_shared(ctx.net, m, target).expect("candidates were key-filtered");
            let fresh = FreshnessValue::NonceDerived(hash_nonce_cycle(
                pool.nonce(round, target),
                round as u64 * 2,
            ));
            Message::sec_join(m, target, make_auth(pool, key, m, target as u64, MessageKind::Join, fresh, mac_bits))
        } else {
            Message::join(m, target)
        };
        if ctx.unicast_hop(&msg, m, target) {
            let accept = match pool.as_ref() {
                Some(p) if keyed => verify_auth(p, &mut state.freshness, &msg, target, mac_bits),
                _ => true,
            };
            if accept {
                clusters.get_mut(&target).expect("target is an elected head").push(m);
            }
            if state.injection.duplicate_joins {
                state.injected += 1;
                let survived = ctx.redeliver(&msg, target)
                    && match pool.as_ref() {
                        Some(p) if keyed => {
                            verify_auth(p, &mut state.freshness, &msg, target, mac_bits)
                        }
                        _ => true,
                    };
                if !survived {
                    state.rejected += 1;
                }
            }
        }
    }

    // schedule phase: slot order is join order; the broadcast costs energy,
    // membership itself carries the slot information
    for (&ch, members) in &clusters {
        if members.is_empty() || !ctx.net.nodes[ch].alive {
            continue;
        }
        let msg = Message::schedule(ch, members.len());
        let audience = ctx.net.neighbors(ch);
        ctx.broadcast(&msg, &audience);
    }

    // report phase
    let mut readings: BTreeMap<NodeId, u32> = clusters.keys().map(|&h| (h, 0)).collect();
    for (&ch, members) in &clusters {
        for &m in members {
            if !ctx.net.nodes[m].alive {
                continue;
            }
            let msg = if keyed {
                let pool = pool.as_ref().expect("keyed protocols carry a key pool");
                let key = ring_shared(ctx.net, m, ch).expect("members share a key with their head");
                let fresh = FreshnessValue::NonceDerived(hash_nonce_cycle(
                    pool.nonce(round, ch),
                    round as u64 * 2 + 1,
                ));
                Message::sec_report(m, ch, make_auth(pool, key, m, ch as u64, MessageKind::Report, fresh, mac_bits))
            } else {
                Message::report(m, ch)
            };
            if ctx.unicast_hop(&msg, m, ch) {
                let accept = match pool.as_ref() {
                    Some(p) if keyed => verify_auth(p, &mut state.freshness, &msg, ch, mac_bits),
                    _ => true,
                };
                if accept {
                    *readings.get_mut(&ch).expect("head has a readings slot") += 1;
                }
                if state.injection.duplicate_reports {
                    state.injected += 1;
                    let survived = ctx.redeliver(&msg, ch)
                        && match pool.as_ref() {
                            Some(p) if keyed => {
                                verify_auth(p, &mut state.freshness, &msg, ch, mac_bits)
                            }
                            _ => true,
                        };
                    if !survived {
                        state.rejected += 1;
                    }
                }
            }
        }
    }

    // uplink phase: every surviving head aggregates and reports, members
    // included or not; orphans fall back to a direct uplink
    for &ch in clusters.keys() {
        if !ctx.net.nodes[ch].alive {
            continue;
        }
        let msg = if keyed {
            let pool = pool.as_ref().expect("keyed protocols carry a key pool");
            let counter = FreshnessValue::Counter(next_counter(&mut state.tx_counters, ch));
            Message::sec_bs_packet(
                ch,
                make_auth(pool, pool.bs_key_id(ch), ch, BS_RECEIVER, MessageKind::BsPacket, counter, mac_bits),
            )
        } else {
            Message::bs_packet(ch)
        };
        ctx.send_to_bs(&msg, ch);
        ctx.report.readings_delivered += readings[&ch] + 1;
    }
    let mut orphan_sent = 0;
    for &m in &orphans {
        if !ctx.net.nodes[m].alive {
            continue;
        }
        let msg = if keyed {
            let pool = pool.as_ref().expect("keyed protocols carry a key pool");
            let counter = FreshnessValue::Counter(next_counter(&mut state.tx_counters, m));
            Message::sec_direct_bs_packet(
                m,
                make_auth(pool, pool.bs_key_id(m), m, BS_RECEIVER, MessageKind::DirectBsPacket, counter, mac_bits),
            )
        } else {
            Message::direct_bs_packet(m)
        };
        ctx.send_to_bs(&msg, m);
        ctx.report.readings_delivered += 1;
        orphan_sent += 1;
    }
    ctx.report.orphan_count = orphan_sent;

    state.last_assignment = Some(ClusterAssignment {
        clusters: clusters.into_iter().map(|(head, members)| Cluster { head, members }).collect(),
        orphans,
        relay_paths: BTreeMap::new(),
    });
    ctx.finish()
}
