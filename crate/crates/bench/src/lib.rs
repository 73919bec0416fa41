//! Shared fixtures for the planner benchmarks.

use romp_core::{compute_prize, MissionGraph, NodeId, SensorNode, Vec3};

/// Deterministic spread of pressure-kind nodes needing charge, base at the
/// field center. A multiplicative congruential walk keeps this crate free
/// of RNG dependencies in library code.
pub fn bench_graph(n: usize, side: f64) -> MissionGraph {
    let mut state = 0x2545F4914F6CDD1Du64;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let nodes: Vec<SensorNode> = (0..n)
        .map(|i| {
            let v_now = next() * 2.5;
            SensorNode::new(
                i as NodeId,
                Vec3::new(next() * side, next() * side, 0.0),
                3.0,
                5.0,
                v_now,
                compute_prize(v_now, 5.0, 10).unwrap(),
            )
            .unwrap()
        })
        .collect();
    let base = Vec3::new(side / 2.0, side / 2.0, 0.0);
    MissionGraph::build(nodes, base, base, 6).unwrap()
}
