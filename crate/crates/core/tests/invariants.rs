//! Properties that must hold for every protocol, seed, and configuration:
//! the pure formulas are exercised with proptest, the round engines with
//! instrumented runs that watch the network between rounds.

use proptest::prelude::*;
use wsnsim::election::{
    leach_threshold, mod_one_round_threshold, mod_two_round_threshold, tcca_threshold,
    ElectionParams,
};
use wsnsim::engine::{overload_bits, run_simulation, ScenarioConfig, SimState};
use wsnsim::keying::{assign_ring, shared_key, KeyPool};
use wsnsim::model::{Network, Point, RememberedCh};
use wsnsim::protocols::{run_round, ProtocolKind};
use wsnsim::radio::{RadioParams, SizeTable};

fn params(p: f64, t_min: f64) -> ElectionParams {
    ElectionParams::new(p, t_min).unwrap()
}

proptest! {
    #[test]
    fn thresholds_stay_in_bounds_and_vanish_outside_g(
        p in 0.001f64..0.95,
        t_min in 0.0f64..0.5,
        round in 0u32..10_000,
        re in 0.0f64..=1.0,
    ) {
        let pr = params(p, t_min);
        for t in [
            leach_threshold(true, round, &pr),
            tcca_threshold(true, round, &pr, re, 1.0),
            mod_two_round_threshold(true, round, &pr, re, 1.0),
            mod_one_round_threshold(true, round, &pr, re, 1.0),
        ] {
            prop_assert!((0.0..=1.0).contains(&t));
        }
        prop_assert_eq!(leach_threshold(false, round, &pr), 0.0);
        prop_assert_eq!(tcca_threshold(false, round, &pr, re, 1.0), 0.0);
        prop_assert_eq!(mod_two_round_threshold(false, round, &pr, re, 1.0), 0.0);
        prop_assert_eq!(mod_one_round_threshold(false, round, &pr, re, 1.0), 0.0);
    }

    #[test]
    fn energy_scaled_thresholds_grow_with_residual_energy(
        p in 0.001f64..0.95,
        t_min in 0.0f64..0.5,
        round in 0u32..10_000,
        re_lo in 0.0f64..=1.0,
        re_hi in 0.0f64..=1.0,
    ) {
        let (lo, hi) = if re_lo <= re_hi { (re_lo, re_hi) } else { (re_hi, re_lo) };
        let pr = params(p, t_min);
        prop_assert!(tcca_threshold(true, round, &pr, lo, 1.0) <= tcca_threshold(true, round, &pr, hi, 1.0));
        prop_assert!(
            mod_two_round_threshold(true, round, &pr, lo, 1.0)
                <= mod_two_round_threshold(true, round, &pr, hi, 1.0)
        );
    }

    #[test]
    fn full_energy_collapses_the_scaled_threshold_to_the_base(
        p in 0.001f64..0.95,
        round in 0u32..10_000,
    ) {
        let pr = params(p, 0.0);
        let base = leach_threshold(true, round, &pr);
        prop_assert_eq!(tcca_threshold(true, round, &pr, 1.0, 1.0), base);
    }

    #[test]
    fn transmit_cost_is_linear_in_bits_and_grows_with_distance(
        bits in 1u64..(1 << 44),
        d1 in 0.0f64..2000.0,
        gap in 0.5f64..100.0,
    ) {
        let radio = RadioParams::default();
        // doubling the payload doubles the cost exactly: every term scales
        // by a power of two
        prop_assert_eq!(radio.tx_cost(2 * bits, d1), 2.0 * radio.tx_cost(bits, d1));
        let d2 = d1 + gap;
        prop_assert!(radio.tx_cost(bits, d1) < radio.tx_cost(bits, d2));
        prop_assert_eq!(radio.rx_cost(2 * bits), 2.0 * radio.rx_cost(bits));
    }

    #[test]
    fn ring_assignment_is_pure_and_stays_inside_the_pool(
        master_seed in any::<u64>(),
        node in 0usize..512,
        pool_size in 1u32..64,
        ring_frac in 0.0f64..=1.0,
    ) {
        let ring_size = ((pool_size as f64 * ring_frac).ceil() as u32).clamp(1, pool_size);
        let pool = KeyPool { pool_size, master_seed };
        let ring = assign_ring(&pool, node, ring_size).unwrap();
        prop_assert_eq!(ring.len(), ring_size as usize);
        let inside = (0..pool_size).filter(|&k| ring.contains(k)).count();
        prop_assert_eq!(inside, ring_size as usize);
        prop_assert_eq!(assign_ring(&pool, node, ring_size).unwrap(), ring);
    }

    #[test]
    fn shared_key_is_symmetric(
        master_seed in any::<u64>(),
        a in 0usize..256,
        b in 0usize..256,
        ring_size in 1u32..20,
    ) {
        let pool = KeyPool { pool_size: 40, master_seed };
        let ra = assign_ring(&pool, a, ring_size).unwrap();
        let rb = assign_ring(&pool, b, ring_size).unwrap();
        prop_assert_eq!(shared_key(&ra, &rb), shared_key(&rb, &ra));
    }
}

/// Runs every protocol with an energy budget tight enough that nodes die
/// mid-run, watching the network between rounds: energy may only flow out,
/// the dead stay dead and silent, every report balances against the drained
/// energy, and the per-round accounting identities hold.
#[test]
fn round_loop_preserves_energy_and_liveness_accounting() {
    for protocol in ProtocolKind::ALL {
        for seed in [1u64, 2, 3] {
            let cfg = ScenarioConfig {
                protocol,
                nodes: 60,
                rounds: 120,
                seed,
                initial_energy_nj: 3e7,
                ..Default::default()
            };
            let mut state = cfg.build_state().unwrap();
            let mut saw_death = false;
            for _ in 0..cfg.rounds {
                let before: Vec<(f64, bool)> = state
                    .network
                    .nodes
                    .iter()
                    .map(|n| (n.residual_energy_nj, n.alive))
                    .collect();
                let alive_before = state.network.alive_count() as u32;
                if alive_before == 0 {
                    break;
                }
                let report = run_round(&mut state, &cfg);
                let label = format!("{protocol} seed {seed} round {}", report.round);

                let mut drained = 0.0;
                for (node, &(re_before, was_alive)) in state.network.nodes.iter().zip(&before) {
                    assert!(node.residual_energy_nj <= re_before, "{label}: energy grew");
                    assert!(node.residual_energy_nj >= 0.0, "{label}: negative energy");
                    if !was_alive {
                        assert!(!node.alive, "{label}: node resurrected");
                        assert_eq!(node.residual_energy_nj, re_before, "{label}: dead node charged");
                    }
                    if !node.alive {
                        assert_eq!(node.residual_energy_nj, 0.0, "{label}: dead above zero");
                    }
                    drained += re_before - node.residual_energy_nj;
                }
                let tol = 1e-9 * drained.max(1.0);
                assert!((report.energy_nj - drained).abs() <= tol, "{label}: conservation");

                let alive_after = state.network.alive_count() as u32;
                assert!(alive_after <= alive_before, "{label}: alive count grew");
                assert_eq!(report.alive_end, alive_after, "{label}: alive_end");
                assert_eq!(report.deaths, alive_before - alive_after, "{label}: deaths");
                assert!(
                    report.bits_total() >= cfg.sizes.data_bits * report.bs_reports as u64,
                    "{label}: negative overload"
                );
                let _ = overload_bits(&report, cfg.sizes.data_bits);
                saw_death |= report.deaths > 0;

                if report.deaths == 0 {
                    assert_eq!(report.readings_delivered, alive_before, "{label}: lost reading");
                    assert_partition(&state, alive_before, &label);
                }
                for node in &state.network.nodes {
                    assert!(node.serving_rounds_remaining <= 1, "{label}: serving overrun");
                    if let Some(mem) = node.remembered_ch {
                        assert!(mem.rounds_remaining <= 1, "{label}: memory overrun");
                        assert_eq!(
                            node.serving_rounds_remaining, 0,
                            "{label}: node both member and serving head"
                        );
                    }
                }
            }
            assert!(saw_death, "{protocol} seed {seed}: budget was meant to kill nodes");
        }
    }
}

/// Every alive node is exactly one of head, member of a single cluster, or
/// orphan; only meaningful for rounds nobody died in.
fn assert_partition(state: &SimState, alive: u32, label: &str) {
    let assignment = state.last_assignment.as_ref().expect("round records an assignment");
    let mut seen = std::collections::BTreeSet::new();
    for cluster in &assignment.clusters {
        assert!(seen.insert(cluster.head), "{label}: head {} double-counted", cluster.head);
        for &m in &cluster.members {
            assert!(seen.insert(m), "{label}: member {m} double-counted");
        }
    }
    for &o in &assignment.orphans {
        assert!(seen.insert(o), "{label}: orphan {o} double-counted");
    }
    assert_eq!(seen.len() as u32, alive, "{label}: partition misses nodes");
    for id in &seen {
        assert!(state.network.nodes[*id].alive, "{label}: dead node {id} assigned");
    }
    for path in assignment.relay_paths.values() {
        let distinct: std::collections::BTreeSet<_> = path.iter().collect();
        assert_eq!(distinct.len(), path.len(), "{label}: relay path revisits a node");
    }
}

#[test]
fn identical_runs_render_identical_csv() {
    for protocol in ProtocolKind::ALL {
        let cfg = ScenarioConfig { protocol, nodes: 50, rounds: 40, seed: 7, ..Default::default() };
        let a = run_simulation(&cfg).unwrap();
        let b = run_simulation(&cfg).unwrap();
        assert_eq!(
            wsnsim::csv::render_runs(&[&a]),
            wsnsim::csv::render_runs(&[&b]),
            "{protocol}: same seed must render byte-identical CSV"
        );
        let other = run_simulation(&ScenarioConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(
            wsnsim::csv::render_runs(&[&a]),
            wsnsim::csv::render_runs(&[&other]),
            "{protocol}: different seeds should not collide"
        );
    }
}

#[test]
fn csv_cumulative_columns_are_prefix_sums() {
    let cfg = ScenarioConfig {
        protocol: ProtocolKind::Leach,
        nodes: 40,
        rounds: 60,
        seed: 3,
        initial_energy_nj: 1.5e7,
        ..Default::default()
    };
    let series = run_simulation(&cfg).unwrap();
    let rendered = wsnsim::csv::render_runs(&[&series]);
    let mut lines = rendered.lines();
    assert_eq!(lines.next().unwrap(), wsnsim::csv::CSV_HEADER);

    let (mut bits_cum, mut overload_cum) = (0u64, 0u64);
    let mut last_dead = 0u32;
    let mut rows = 0;
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 14);
        let alive: u32 = cols[3].parse().unwrap();
        let dead: u32 = cols[4].parse().unwrap();
        assert_eq!(alive + dead, 40, "alive and cumulative dead must cover the population");
        assert!(dead >= last_dead, "dead count regressed");
        last_dead = dead;
        bits_cum += cols[9].parse::<u64>().unwrap();
        assert_eq!(cols[10].parse::<u64>().unwrap(), bits_cum);
        overload_cum += cols[11].parse::<u64>().unwrap();
        assert_eq!(cols[12].parse::<u64>().unwrap(), overload_cum);
        rows += 1;
    }
    assert_eq!(rows, series.rounds.len());
    assert!(last_dead > 0, "budget was meant to kill nodes");
}

/// While the secured run makes the same topology decisions as the plain one,
/// security can only ever add energy. Rings spanning the whole pool keep the
/// decisions aligned; the energy-scaled elections of the full/half protocols
/// eventually drift apart (the secured run drains faster), so those pairs
/// are compared up to the first divergence.
#[test]
fn security_never_makes_a_round_cheaper() {
    for (plain, secured) in [
        (ProtocolKind::Leach, ProtocolKind::SecLeach),
        (ProtocolKind::ModLeach, ProtocolKind::ModSecLeach),
    ] {
        for seed in [1u64, 2, 3] {
            let base = ScenarioConfig {
                nodes: 80,
                rounds: 100,
                seed,
                initial_energy_nj: 5e9,
                pool_size: 50,
                ring_size: 50,
                ..Default::default()
            };
            let pc = ScenarioConfig { protocol: plain, ..base.clone() };
            let sc = ScenarioConfig { protocol: secured, ..base };
            let mut ps = pc.build_state().unwrap();
            let mut ss = sc.build_state().unwrap();
            let mut compared = 0u32;
            for _ in 0..pc.rounds {
                let rp = run_round(&mut ps, &pc);
                let rs = run_round(&mut ss, &sc);
                if rp.kind != rs.kind || ps.last_assignment != ss.last_assignment {
                    break;
                }
                assert!(
                    rs.energy_nj > rp.energy_nj,
                    "{secured} seed {seed} round {}: not dearer than {plain}",
                    rp.round
                );
                assert!(rs.bits_total() > rp.bits_total());
                compared += 1;
            }
            assert!(compared >= 1, "{secured} seed {seed}: first round already diverged");
            if plain == ProtocolKind::Leach {
                // nothing feeds energy back into these elections, so the
                // paired runs stay aligned for the whole simulation
                assert_eq!(compared, pc.rounds, "{secured} seed {seed}: pair diverged");
            }
        }
    }
}

/// A TTL of 1 leaves no room to relay, so the first round's cluster map
/// matches plain nearest-head clustering exactly (full energy makes the
/// scaled threshold equal the base one, so the elections agree too).
#[test]
fn single_hop_ttl_degenerates_to_nearest_head_clusters() {
    for seed in [1u64, 5, 9] {
        let leach =
            ScenarioConfig { protocol: ProtocolKind::Leach, seed, ..Default::default() };
        let tcca = ScenarioConfig {
            protocol: ProtocolKind::Tcca,
            tcca_initial_ttl: 1,
            seed,
            ..Default::default()
        };
        let mut ls = leach.build_state().unwrap();
        let mut ts = tcca.build_state().unwrap();
        run_round(&mut ls, &leach);
        run_round(&mut ts, &tcca);
        let la = ls.last_assignment.unwrap();
        let ta = ts.last_assignment.unwrap();
        assert_eq!(la.clusters, ta.clusters, "seed {seed}");
        assert_eq!(la.orphans, ta.orphans, "seed {seed}");
        assert!(ta.relay_paths.values().all(|p| p.is_empty()), "seed {seed}: relays with TTL 1");
    }
}

fn zeroed_security() -> SizeTable {
    SizeTable { key_id_bits: 0, nonce_bits: 0, counter_bits: 0, mac_bits: 0, ..Default::default() }
}

/// With security fields squeezed to zero bits and rings equal to the whole
/// pool, the secured protocols are structurally the plain ones: same
/// messages, same sizes, same energy, to the last bit.
#[test]
fn zero_width_security_runs_collapse_onto_the_plain_protocols() {
    for (plain, secured) in [
        (ProtocolKind::Leach, ProtocolKind::SecLeach),
        (ProtocolKind::ModLeach, ProtocolKind::ModSecLeach),
    ] {
        for seed in [1u64, 2] {
            let base = ScenarioConfig {
                nodes: 60,
                rounds: 80,
                seed,
                initial_energy_nj: 1e8,
                sizes: zeroed_security(),
                pool_size: 40,
                ring_size: 40,
                ..Default::default()
            };
            let p = run_simulation(&ScenarioConfig { protocol: plain, ..base.clone() }).unwrap();
            let s = run_simulation(&ScenarioConfig { protocol: secured, ..base }).unwrap();
            assert_eq!(p.rounds, s.rounds, "{plain} vs {secured}, seed {seed}");
        }
    }
}

fn mod_state(positions: &[(f64, f64)], cfg: &ScenarioConfig) -> SimState {
    let pts = positions.iter().map(|&(x, y)| Point::new(x, y)).collect();
    let network = Network::from_positions(
        pts,
        Point::new(10.0, 50.0),
        cfg.radio_range_m,
        cfg.initial_energy_nj,
        cfg.seed,
    )
    .unwrap();
    SimState {
        network,
        params: cfg.election_params().unwrap(),
        keys: None,
        freshness: wsnsim::keying::FreshnessLedger::new(),
        tx_counters: vec![0; positions.len()],
        last_assignment: None,
        injection: Default::default(),
        injected: 0,
        rejected: 0,
    }
}

/// For one fixed cluster, a half round moves fewer bits than the full round
/// that set it up, which in turn stays below the ordinary join/schedule
/// pattern for that cluster.
#[test]
fn half_round_moves_fewer_bits_than_full_or_standard_rounds() {
    let positions = [(10.0, 0.0), (10.0, 10.0), (10.0, 20.0)];

    let mod_cfg = ScenarioConfig { protocol: ProtocolKind::ModLeach, nodes: 3, ..Default::default() };
    let mut full = mod_state(&positions, &mod_cfg);
    full.network.round_index = 19;
    for node in &mut full.network.nodes {
        node.served_this_epoch = node.id != 0;
    }
    let full_report = run_round(&mut full, &mod_cfg);

    let mut half = mod_state(&positions, &mod_cfg);
    half.network.round_index = 5;
    for node in &mut half.network.nodes {
        node.served_this_epoch = true;
    }
    half.network.nodes[0].serving_rounds_remaining = 1;
    half.network.nodes[1].remembered_ch = Some(RememberedCh { ch: 0, rounds_remaining: 1 });
    half.network.nodes[2].remembered_ch = Some(RememberedCh { ch: 0, rounds_remaining: 1 });
    let half_report = run_round(&mut half, &mod_cfg);

    let leach_cfg = ScenarioConfig { protocol: ProtocolKind::Leach, nodes: 3, ..Default::default() };
    let mut plain = mod_state(&positions, &leach_cfg);
    plain.network.round_index = 19;
    for node in &mut plain.network.nodes {
        node.served_this_epoch = node.id != 0;
    }
    let leach_report = run_round(&mut plain, &leach_cfg);

    let same_cluster = |s: &SimState| {
        let a = s.last_assignment.as_ref().unwrap();
        a.clusters.len() == 1 && a.clusters[0].head == 0 && a.clusters[0].members == vec![1, 2]
    };
    assert!(same_cluster(&full) && same_cluster(&half) && same_cluster(&plain));
    assert!(half_report.bits_total() < full_report.bits_total());
    assert!(half_report.bits_total() < leach_report.bits_total());
}
