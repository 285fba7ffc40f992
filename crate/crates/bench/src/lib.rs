//! Shared scenario builders for the benchmarks.

pub use wsnsim::engine::ScenarioConfig;
pub use wsnsim::protocols::ProtocolKind;

/// A mid-sized scenario that exercises every protocol phase.
pub fn bench_config(protocol: ProtocolKind) -> ScenarioConfig {
    ScenarioConfig { protocol, nodes: 200, rounds: 50, seed: 11, ..Default::default() }
}
