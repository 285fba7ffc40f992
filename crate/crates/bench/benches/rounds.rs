use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use wsnsim::engine::run_simulation;
use wsnsim::protocols::ProtocolKind;
use wsnsim_bench::bench_config;

fn protocol_rounds(c: &mut Criterion) {
    let mut group = c.benchmark_group("fifty_rounds_200_nodes");
    for protocol in ProtocolKind::ALL {
        group.bench_function(protocol.name(), |b| {
            let cfg = bench_config(protocol);
            b.iter(|| run_simulation(black_box(&cfg)).unwrap());
        });
    }
    group.finish();
}

fn radio_pricing(c: &mut Criterion) {
    use wsnsim::radio::RadioParams;
    let radio = RadioParams::default();
    c.bench_function("tx_cost", |b| {
        b.iter(|| black_box(radio.tx_cost(black_box(2050), black_box(42.5))))
    });
}

fn ring_assignment(c: &mut Criterion) {
    use wsnsim::keying::{assign_ring, KeyPool};
    let pool = KeyPool { pool_size: 1000, master_seed: 5 };
    c.bench_function("assign_ring_50_of_1000", |b| {
        b.iter(|| assign_ring(&pool, black_box(17), black_box(50)).unwrap())
    });
}

criterion_group!(benches, protocol_rounds, radio_pricing, ring_assignment);
criterion_main!(benches);
