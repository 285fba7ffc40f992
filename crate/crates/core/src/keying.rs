//! Deterministic key predistribution and lightweight authentication.
//!
//! Keys are synthesized from a master seed with a SplitMix64-style mixing
//! chain rather than drawn from the simulation stream, so two runs that
//! differ only in keying parameters share identical topology and elections.
//! MACs are a keyed mix truncated to the configured tag width; they model
//! authentication cost and collision behaviour, not real cryptography.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::model::NodeId;

#[derive(Debug, Error, PartialEq)]
pub enum KeyingError {
    #[error("ring size {ring} exceeds pool size {pool}")]
    RingLargerThanPool { ring: u32, pool: u32 },
    #[error("key pool must not be empty when rings are assigned")]
    EmptyPool,
}

pub type KeyId = u32;

/// Truncated authentication tag. Width comes from the size table; a zero
/// width leaves every tag zero, which makes verification vacuous.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MacTag(pub u64);

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Keyed pseudorandom function over a word sequence; the workhorse for key
/// values, ring assignment, nonces, and MACs.
pub fn prf64(seed: u64, words: &[u64]) -> u64 {
    let mut s = mix64(seed ^ GOLDEN);
    for &w in words {
        s = mix64(s.wrapping_add(GOLDEN) ^ w);
    }
    s
}

// domain separators so the prf streams never collide across uses
const DOMAIN_KEY: u64 = 1;
const DOMAIN_RING: u64 = 2;
const DOMAIN_NONCE: u64 = 3;
const DOMAIN_MAC: u64 = 4;

/// Pool of `pool_size` symmetric keys plus one pairwise base-station key per
/// node, all derived from the master seed. Base-station keys use synthetic
/// ids at `pool_size + node`, outside the shared pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyPool {
    pub pool_size: u32,
    pub master_seed: u64,
}

impl KeyPool {
    pub fn key_value(&self, id: KeyId) -> u64 {
        prf64(self.master_seed, &[DOMAIN_KEY, id as u64])
    }

    pub fn bs_key_id(&self, node: NodeId) -> KeyId {
        self.pool_size + node as u32
    }

    /// Per-advertisement nonce for a head in a given round.
    pub fn nonce(&self, round: u32, ch: NodeId) -> u64 {
        prf64(self.master_seed, &[DOMAIN_NONCE, round as u64, ch as u64])
    }

    /// Keyed MAC over a payload, truncated to `mac_bits` (at most 64).
    pub fn mac(&self, key: KeyId, payload: &[u64], mac_bits: u64) -> MacTag {
        let mut words = Vec::with_capacity(payload.len() + 3);
        words.push(DOMAIN_MAC);
        words.push(self.key_value(key));
        words.extend_from_slice(payload);
        words.push(payload.len() as u64);
        MacTag(truncate(prf64(self.master_seed, &words), mac_bits))
    }
}

fn truncate(value: u64, bits: u64) -> u64 {
    match bits {
        0 => 0,
        b if b >= 64 => value,
        b => value & ((1u64 << b) - 1),
    }
}

/// A node's ring: a set of distinct key ids sampled from the pool.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyRing {
    pub owner: NodeId,
    ids: BTreeSet<KeyId>,
}

impl KeyRing {
    pub fn from_ids(owner: NodeId, ids: impl IntoIterator<Item = KeyId>) -> Self {
        KeyRing { owner, ids: ids.into_iter().collect() }
    }

    pub fn contains(&self, id: KeyId) -> bool {
        self.ids.contains(&id)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = KeyId> + '_ {
        self.ids.iter().copied()
    }
}

/// Samples `ring_size` distinct ids for a node by walking the node's prf
/// stream in index order and skipping repeats (sampling without
/// replacement). The draw order is fixed, so rings depend only on the master
/// seed, the node id, and the ring size.
pub fn assign_ring(pool: &KeyPool, node: NodeId, ring_size: u32) -> Result<KeyRing, KeyingError> {
    if ring_size > pool.pool_size {
        return Err(KeyingError::RingLargerThanPool { ring: ring_size, pool: pool.pool_size });
    }
    if pool.pool_size == 0 && ring_size > 0 {
        return Err(KeyingError::EmptyPool);
    }
    let mut ids = BTreeSet::new();
    let mut draw = 0u64;
    while ids.len() < ring_size as usize {
        let candidate =
            (prf64(pool.master_seed, &[DOMAIN_RING, node as u64, draw]) % pool.pool_size as u64) as KeyId;
        ids.insert(candidate);
        draw += 1;
    }
    Ok(KeyRing { owner: node, ids })
}

/// Smallest key id two rings share, if any. Symmetric by construction.
pub fn shared_key(a: &KeyRing, b: &KeyRing) -> Option<KeyId> {
    a.ids.intersection(&b.ids).next().copied()
}

/// Probability that two independently sampled rings share at least one key:
/// one minus the product of `(pool - ring - i) / (pool - i)` over the second
/// ring's draws.
pub fn share_probability(pool_size: u32, ring_size: u32) -> f64 {
    if ring_size == 0 {
        return 0.0;
    }
    let pool = pool_size as f64;
    let ring = ring_size as f64;
    let mut none = 1.0;
    for i in 0..ring_size {
        let denom = pool - i as f64;
        if denom <= 0.0 {
            return 1.0;
        }
        none *= ((pool - ring - i as f64) / denom).max(0.0);
    }
    1.0 - none
}

/// A freshness value a receiver checks before accepting a message: either a
/// hash derived from the advertised nonce or a monotone per-sender counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreshnessValue {
    NonceDerived(u64),
    Counter(u64),
}

/// Combines a nonce with a reporting cycle index; joins and reports in the
/// same round use distinct cycles so each link sees a fresh value.
pub fn hash_nonce_cycle(nonce: u64, cycle: u64) -> u64 {
    mix64(nonce ^ mix64(cycle ^ GOLDEN))
}

#[derive(Debug, Clone, Copy, Default)]
struct LinkState {
    last_nonce_value: Option<u64>,
    last_counter: Option<u64>,
}

/// Per-link replay protection: a repeated nonce-derived value or a
/// non-increasing counter is rejected.
#[derive(Debug, Default)]
pub struct FreshnessLedger {
    links: HashMap<(NodeId, NodeId), LinkState>,
}

impl FreshnessLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns whether the value is fresh on the `sender -> receiver` link,
    /// recording it when accepted.
    pub fn check_and_record(
        &mut self,
        sender: NodeId,
        receiver: NodeId,
        value: FreshnessValue,
    ) -> bool {
        let state = self.links.entry((sender, receiver)).or_default();
        match value {
            FreshnessValue::NonceDerived(v) => {
                if state.last_nonce_value == Some(v) {
                    false
                } else {
                    state.last_nonce_value = Some(v);
                    true
                }
            }
            FreshnessValue::Counter(c) => {
                if state.last_counter.is_some_and(|last| c <= last) {
                    false
                } else {
                    state.last_counter = Some(c);
                    true
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn pool() -> KeyPool {
        KeyPool { pool_size: 1000, master_seed: 7 }
    }

    #[test]
    fn rings_have_requested_size_and_are_deterministic() {
        let p = pool();
        for node in 0..20usize {
            let a = assign_ring(&p, node, 50).unwrap();
            let b = assign_ring(&p, node, 50).unwrap();
            assert_eq!(a.len(), 50);
            assert_eq!(a, b);
            assert!(a.ids().all(|id| id < p.pool_size));
        }
        let other_seed = KeyPool { master_seed: 8, ..p };
        assert_ne!(assign_ring(&p, 0, 50).unwrap(), assign_ring(&other_seed, 0, 50).unwrap());
    }

    #[test]
    fn ring_larger_than_pool_is_rejected() {
        let p = KeyPool { pool_size: 10, master_seed: 1 };
        assert_eq!(
            assign_ring(&p, 0, 11),
            Err(KeyingError::RingLargerThanPool { ring: 11, pool: 10 })
        );
        // a full-pool ring is fine
        assert_eq!(assign_ring(&p, 0, 10).unwrap().len(), 10);
    }

    #[test]
    fn shared_key_picks_smallest_common_id() {
        let a = KeyRing::from_ids(0, [3, 9, 17]);
        let b = KeyRing::from_ids(1, [9, 17, 40]);
        assert_eq!(shared_key(&a, &b), Some(9));
        assert_eq!(shared_key(&b, &a), Some(9));
        let c = KeyRing::from_ids(2, [1, 2]);
        assert_eq!(shared_key(&a, &c), None);
    }

    #[test]
    fn bs_key_ids_sit_outside_the_pool() {
        let p = pool();
        assert_eq!(p.bs_key_id(0), 1000);
        assert_eq!(p.bs_key_id(42), 1042);
        // and still have defined values
        assert_ne!(p.key_value(p.bs_key_id(0)), p.key_value(p.bs_key_id(1)));
    }

    #[test]
    fn macs_are_deterministic_and_key_sensitive() {
        let p = pool();
        let payload = [1u64, 2, 3];
        assert_eq!(p.mac(5, &payload, 32), p.mac(5, &payload, 32));
        assert_ne!(p.mac(5, &payload, 32), p.mac(6, &payload, 32));
        assert_ne!(p.mac(5, &payload, 32), p.mac(5, &[1, 2, 4], 32));
    }

    #[test]
    fn mac_truncation_respects_width() {
        let p = pool();
        let tag = p.mac(5, &[9], 8);
        assert!(tag.0 < 256);
        assert_eq!(p.mac(5, &[9], 0), MacTag(0));
        assert_eq!(p.mac(5, &[9], 64).0, p.mac(5, &[9], 128).0);
    }

    #[test]
    fn thousand_random_payloads_rarely_collide_at_32_bits() {
        let p = pool();
        let tags: HashSet<u64> = (0..1000u64).map(|i| p.mac(3, &[i, i * i], 32).0).collect();
        assert!(tags.len() >= 990, "only {} distinct tags", tags.len());
    }

    #[test]
    fn nonce_stream_is_deterministic_and_distinct() {
        let p = pool();
        assert_eq!(p.nonce(4, 17), p.nonce(4, 17));
        assert_ne!(p.nonce(4, 17), p.nonce(5, 17));
        assert_ne!(p.nonce(4, 17), p.nonce(4, 18));
    }

    #[test]
    fn nonce_cycle_hash_distinguishes_cycles() {
        let n = 0xdead_beef;
        assert_eq!(hash_nonce_cycle(n, 1), hash_nonce_cycle(n, 1));
        assert_ne!(hash_nonce_cycle(n, 1), hash_nonce_cycle(n, 2));
    }

    #[test]
    fn counter_freshness_accepts_increasing_only() {
        let mut ledger = FreshnessLedger::new();
        let outcomes: Vec<bool> = [1u64, 2, 2, 3]
            .into_iter()
            .map(|c| ledger.check_and_record(1, 0, FreshnessValue::Counter(c)))
            .collect();
        assert_eq!(outcomes, [true, true, false, true]);
    }

    #[test]
    fn nonce_freshness_rejects_repeats_per_link() {
        let mut ledger = FreshnessLedger::new();
        assert!(ledger.check_and_record(1, 0, FreshnessValue::NonceDerived(77)));
        assert!(!ledger.check_and_record(1, 0, FreshnessValue::NonceDerived(77)));
        // a different link is unaffected
        assert!(ledger.check_and_record(1, 2, FreshnessValue::NonceDerived(77)));
        // and a new value reopens the original link
        assert!(ledger.check_and_record(1, 0, FreshnessValue::NonceDerived(78)));
    }

    #[test]
    fn share_probability_matches_small_exact_case() {
        // pool 4, ring 2: P(no overlap) = C(2,2)/C(4,2) = 1/6
        let p = share_probability(4, 2);
        assert!((p - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(share_probability(4, 0), 0.0);
        assert_eq!(share_probability(4, 3), 1.0);
    }

    #[test]
    fn empirical_share_rate_tracks_formula() {
        let p = KeyPool { pool_size: 100, master_seed: 11 };
        let rings: Vec<KeyRing> =
            (0..200).map(|n| assign_ring(&p, n, 10).unwrap()).collect();
        let mut hits = 0u32;
        let mut total = 0u32;
        for i in 0..rings.len() {
            for j in (i + 1)..rings.len() {
                total += 1;
                if shared_key(&rings[i], &rings[j]).is_some() {
                    hits += 1;
                }
            }
        }
        let expected = share_probability(100, 10);
        let observed = hits as f64 / total as f64;
        assert!(
            (observed - expected).abs() < 0.05,
            "observed {observed}, expected {expected}"
        );
    }
}
