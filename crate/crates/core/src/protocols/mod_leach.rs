//! Full/half transmission rounds. In a full round, non-head nodes broadcast
//! their report to the heads in range, heads confirm what they stored with a
//! slot list and an ability tag, and each sensor acknowledges one confirming
//! head, preferring those that committed to serve two rounds. A sensor that
//! acknowledged a two-round head skips all of that next round and unicasts
//! its report straight to the remembered head (a half round for it), while
//! the head re-serves without re-election and closes the loop with an ack.
//!
//! The keyed variant carries a uniform (key id, counter, MAC) triple on all
//! of these messages; receivers accept only from senders they share a
//! predistributed key with and track per-link counters for replay defence.

use std::collections::{BTreeMap, BTreeSet};

use crate::election::{advance_epoch, self_elect, ElectionOutcome};
use crate::engine::{ScenarioConfig, SimState};
use crate::keying::{FreshnessValue, KeyId};
use crate::model::{NodeId, RememberedCh, Role};
use crate::protocols::leach::{
    make_auth, next_counter, ring_shared, verify_auth, BS_RECEIVER,
};
use crate::protocols::{Cluster, ClusterAssignment, RoundCtx, RoundKind, RoundReport};
use crate::radio::{Message, MessageKind};

/// Receiver word for authenticating broadcast traffic, which has no single
/// addressee.
const ANY_RECEIVER: u64 = u64::MAX - 1;

/// Key id stamped on a keyed broadcast: the sender's smallest ring key.
/// Receivers do not recompute the tag (they accept on shared-key existence
/// plus counter freshness); the id only fixes the wire representation.
fn canonical_key_of(net: &crate::model::Network, id: NodeId) -> KeyId {
    net.nodes[id].key_ring.as_ref().and_then(|r| r.ids().next()).unwrap_or(0)
}

pub(crate) fn run_mod_family(
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

    // classification: consume member-side memory first, then head-side
    // service commitments, then elect among the remainder
    let mut half_members: Vec<(NodeId, NodeId)> = Vec::new();
    for node in &mut state.network.nodes {
        if !node.alive {
            node.remembered_ch = None;
            continue;
        }
        if let Some(rc) = node.remembered_ch.take() {
            if rc.rounds_remaining >= 1 {
                half_members.push((node.id, rc.ch));
            }
        }
    }
    let half_set: BTreeSet<NodeId> = half_members.iter().map(|&(m, _)| m).collect();
    let serving: Vec<NodeId> = state
        .network
        .nodes
        .iter()
        .filter(|nd| nd.alive && nd.serving_rounds_remaining >= 1)
        .map(|nd| nd.id)
        .collect();
    for &s in &serving {
        state.network.nodes[s].role = Role::ClusterHead;
    }

    let mut new_heads: Vec<(NodeId, u8)> = Vec::new();
    {
        let (nodes, rng) = state.network.nodes_and_rng();
        for node in nodes.iter_mut() {
            if !node.alive || half_set.contains(&node.id) {
                continue;
            }
            match self_elect(node, round, cfg.protocol, &params, rng) {
                ElectionOutcome::ChTwoRounds => {
                    node.role = Role::ClusterHead;
                    new_heads.push((node.id, 2));
                }
                ElectionOutcome::ChOneRound => {
                    node.role = Role::ClusterHead;
                    new_heads.push((node.id, 1));
                }
                ElectionOutcome::NotCh => {}
            }
        }
    }
    // service rounds a head offers: freshly elected two-round heads tag 2,
    // everyone else (including heads already on their second round) tag 1
    let mut ability: BTreeMap<NodeId, u8> = new_heads.iter().copied().collect();
    for &s in &serving {
        ability.insert(s, 1);
    }
    let heads: Vec<NodeId> = ability.keys().copied().collect();

    let kind = if half_members.is_empty() {
        RoundKind::FullTransmission
    } else {
        RoundKind::HalfTransmission
    };
    let mut ctx = RoundCtx::new(&mut state.network, &cfg.radio, &cfg.sizes, round, kind);
    ctx.report.ch_count = heads.len() as u32;

    // half path: remembered reports go straight to the re-serving head; a
    // member whose head died in the meantime hears nothing and falls back
    // to direct delivery with the orphans
    let mut half_readings: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    let mut stale_half: Vec<NodeId> = Vec::new();
    for &(m, target) in &half_members {
        if !ctx.net.nodes[m].alive {
            continue;
        }
        if !ctx.net.nodes[target].alive {
            stale_half.push(m);
            continue;
        }
        let msg = if keyed {
            let pool = pool.as_ref().expect("keyed protocols carry a key pool");
            let key = match ring_shared(ctx.net, m, target) {
                Some(k) => k,
                None => {
                    stale_half.push(m);
                    continue;
                }
            };
            let fresh = FreshnessValue::Counter(next_counter(&mut state.tx_counters, m));
            Message::report_half(m, target)
                .keyed(make_auth(pool, key, m, target as u64, MessageKind::Report, fresh, mac_bits))
        } else {
            Message::report_half(m, target)
        };
        if ctx.unicast_hop(&msg, m, target) {
            let accept = match pool.as_ref() {
                Some(p) if keyed => verify_auth(p, &mut state.freshness, &msg, target, mac_bits),
                _ => true,
            };
            if accept {
                half_readings.entry(target).or_default().push(m);
            }
            if state.injection.duplicate_reports {
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

    // full path: everyone else broadcasts a report to the heads in range
    let broadcasters: Vec<NodeId> = (0..n)
        .filter(|&b| {
            ctx.net.nodes[b].alive
                && ctx.net.nodes[b].role == Role::Member
                && !half_set.contains(&b)
        })
        .collect();
    let mut stored: BTreeMap<NodeId, Vec<NodeId>> =
        heads.iter().map(|&h| (h, Vec::new())).collect();
    for &b in &broadcasters {
        if !ctx.net.nodes[b].alive {
            continue;
        }
        let counter = next_counter(&mut state.tx_counters, b);
        let msg = if keyed {
            let pool = pool.as_ref().expect("keyed protocols carry a key pool");
            let key = canonical_key_of(ctx.net, b);
            Message::report_broadcast(b).keyed(make_auth(
                pool,
                key,
                b,
                ANY_RECEIVER,
                MessageKind::Report,
                FreshnessValue::Counter(counter),
                mac_bits,
            ))
        } else {
            Message::report_broadcast(b)
        };
        let audience: Vec<NodeId> =
            ctx.net.neighbors(b).into_iter().filter(|h| ability.contains_key(h)).collect();
        let delivered = ctx.broadcast(&msg, &audience);
        for &h in &delivered {
            let accept = if keyed {
                ring_shared(ctx.net, b, h).is_some()
                    && state.freshness.check_and_record(b, h, FreshnessValue::Counter(counter))
            } else {
                true
            };
            if accept {
                stored.get_mut(&h).expect("audience holds heads only").push(b);
            }
        }
        if state.injection.duplicate_reports {
            for &h in &delivered {
                state.injected += 1;
                let survived = ctx.redeliver(&msg, h)
                    && if keyed {
                        ring_shared(ctx.net, b, h).is_some()
                            && state.freshness.check_and_record(
                                b,
                                h,
                                FreshnessValue::Counter(counter),
                            )
                    } else {
                        true
                    };
                if !survived {
                    state.rejected += 1;
                }
            }
        }
    }

    // confirmation: each head that stored anything broadcasts the slot list
    // and its ability tag back at the broadcasters
    let mut confirmers: BTreeMap<NodeId, Vec<(NodeId, u8)>> = BTreeMap::new();
    for &h in &heads {
        let list = stored.get(&h).expect("every head has a store");
        if list.is_empty() || !ctx.net.nodes[h].alive {
            continue;
        }
        let counter = next_counter(&mut state.tx_counters, h);
        let msg = if keyed {
            let pool = pool.as_ref().expect("keyed protocols carry a key pool");
            let key = canonical_key_of(ctx.net, h);
            Message::confirm_request(h, list.len()).keyed(make_auth(
                pool,
                key,
                h,
                ANY_RECEIVER,
                MessageKind::ConfirmRequest,
                FreshnessValue::Counter(counter),
                mac_bits,
            ))
        } else {
            Message::confirm_request(h, list.len())
        };
        let audience: Vec<NodeId> =
            ctx.net.neighbors(h).into_iter().filter(|b| !half_set.contains(b) && ctx.net.nodes[*b].role == Role::Member).collect();
        for b in ctx.broadcast(&msg, &audience) {
            if !list.contains(&b) {
                // heard the confirmation but is not on the slot list
                continue;
            }
            let accept = if keyed {
                ring_shared(ctx.net, h, b).is_some()
                    && state.freshness.check_and_record(h, b, FreshnessValue::Counter(counter))
            } else {
                true
            };
            if accept {
                confirmers.entry(b).or_default().push((h, ability[&h]));
            }
        }
    }

    // acknowledgement: each confirmed sensor picks one head, preferring
    // two-round service, breaking ties uniformly at random
    let mut members: BTreeMap<NodeId, Vec<NodeId>> =
        heads.iter().map(|&h| (h, Vec::new())).collect();
    for &b in &broadcasters {
        if !ctx.net.nodes[b].alive {
            continue;
        }
        let Some(cands) = confirmers.get(&b) else { continue };
        let twos: Vec<NodeId> = cands.iter().filter(|&&(_, at)| at == 2).map(|&(h, _)| h).collect();
        let pick_from: Vec<NodeId> = if twos.is_empty() {
            cands.iter().map(|&(h, _)| h).collect()
        } else {
            twos
        };
        let chosen = if pick_from.len() == 1 {
            pick_from[0]
        } else {
            let u = ctx.net.draw_unit();
            pick_from[((u * pick_from.len() as f64) as usize).min(pick_from.len() - 1)]
        };
        let msg = if keyed {
            let pool = pool.as_ref().expect("keyed protocols carry a key pool");
            let key = ring_shared(ctx.net, b, chosen).expect("confirmers share a key");
            let fresh = FreshnessValue::Counter(next_counter(&mut state.tx_counters, b));
            Message::member_ack(b, chosen).keyed(make_auth(
                pool,
                key,
                b,
                chosen as u64,
                MessageKind::MemberAck,
                fresh,
                mac_bits,
            ))
        } else {
            Message::member_ack(b, chosen)
        };
        if ctx.unicast_hop(&msg, b, chosen) {
            let accept = match pool.as_ref() {
                Some(p) if keyed => verify_auth(p, &mut state.freshness, &msg, chosen, mac_bits),
                _ => true,
            };
            if accept {
                members.get_mut(&chosen).expect("chosen head has a member list").push(b);
                if ability[&chosen] == 2 {
                    ctx.net.nodes[b].remembered_ch =
                        Some(RememberedCh { ch: chosen, rounds_remaining: 1 });
                }
            }
            if state.injection.duplicate_joins {
                state.injected += 1;
                let survived = ctx.redeliver(&msg, chosen)
                    && match pool.as_ref() {
                        Some(p) if keyed => {
                            verify_auth(p, &mut state.freshness, &msg, chosen, mac_bits)
                        }
                        _ => true,
                    };
                if !survived {
                    state.rejected += 1;
                }
            }
        }
    }

    // uplink: every head aggregates what it holds plus its own reading
    for &h in &heads {
        if !ctx.net.nodes[h].alive {
            continue;
        }
        let count = members[&h].len() as u32
            + half_readings.get(&h).map_or(0, |v| v.len() as u32)
            + 1;
        let msg = if keyed {
            let pool = pool.as_ref().expect("keyed protocols carry a key pool");
            let fresh = FreshnessValue::Counter(next_counter(&mut state.tx_counters, h));
            Message::bs_packet(h).keyed(make_auth(
                pool,
                pool.bs_key_id(h),
                h,
                BS_RECEIVER,
                MessageKind::BsPacket,
                fresh,
                mac_bits,
            ))
        } else {
            Message::bs_packet(h)
        };
        ctx.send_to_bs(&msg, h);
        ctx.report.readings_delivered += count;
    }

    // closing acks from re-serving heads to their half-round reporters
    for &s in &serving {
        if !ctx.net.nodes[s].alive {
            continue;
        }
        let Some(reporters) = half_readings.get(&s) else { continue };
        for &m in reporters.clone().iter() {
            let msg = if keyed {
                let pool = pool.as_ref().expect("keyed protocols carry a key pool");
                let key = match ring_shared(ctx.net, s, m) {
                    Some(k) => k,
                    None => continue,
                };
                let fresh = FreshnessValue::Counter(next_counter(&mut state.tx_counters, s));
                Message::ch_ack(s, m).keyed(make_auth(
                    pool,
                    key,
                    s,
                    m as u64,
                    MessageKind::ChAck,
                    fresh,
                    mac_bits,
                ))
            } else {
                Message::ch_ack(s, m)
            };
            ctx.unicast_hop(&msg, s, m);
        }
    }

    // direct fallback for broadcasters nobody confirmed and for half
    // members orphaned by their head's death
    let mut fallback: Vec<NodeId> = broadcasters
        .iter()
        .filter(|b| !confirmers.contains_key(b))
        .chain(stale_half.iter())
        .copied()
        .collect();
    fallback.sort_unstable();
    let mut orphans: Vec<NodeId> = Vec::new();
    for &b in &fallback {
        if !ctx.net.nodes[b].alive {
            continue;
        }
        let msg = if keyed {
            let pool = pool.as_ref().expect("keyed protocols carry a key pool");
            let fresh = FreshnessValue::Counter(next_counter(&mut state.tx_counters, b));
            Message::direct_bs_packet(b).keyed(make_auth(
                pool,
                pool.bs_key_id(b),
                b,
                BS_RECEIVER,
                MessageKind::DirectBsPacket,
                fresh,
                mac_bits,
            ))
        } else {
            Message::direct_bs_packet(b)
        };
        ctx.send_to_bs(&msg, b);
        ctx.report.readings_delivered += 1;
        orphans.push(b);
    }
    ctx.report.orphan_count = orphans.len() as u32;

    // commit service state for the next round
    for &(h, at) in &new_heads {
        if at == 2 && ctx.net.nodes[h].alive {
            ctx.net.nodes[h].serving_rounds_remaining = 1;
        }
    }
    for &s in &serving {
        ctx.net.nodes[s].serving_rounds_remaining = 0;
    }

    let clusters = heads
        .iter()
        .map(|&h| {
            let mut all = members[&h].clone();
            if let Some(halves) = half_readings.get(&h) {
                all.extend(halves.iter().copied());
            }
            all.sort_unstable();
            Cluster { head: h, members: all }
        })
        .collect();
    state.last_assignment = Some(ClusterAssignment {
        clusters,
        orphans,
        relay_paths: BTreeMap::new(),
    });
    ctx.finish()
}
