//! Shared inputs for the benchmarks.

use osc_color::dynamics::draw_initial_state;
use osc_color::graph::gnp;
use osc_color::{
    build_system, complete_partite, Graph, OscParams, PipelineConfig, SimConfig, SystemMatrices,
};

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A prepared system with a start state and a simulation horizon.
pub struct Fixture {
    pub graph: Graph,
    pub params: OscParams,
    pub system: SystemMatrices,
    pub x0: DVector<f64>,
    pub sim: SimConfig,
}

impl Fixture {
    pub fn new(graph: Graph, cycles: f64) -> Self {
        let params = OscParams::default();
        let system = build_system(&graph, &params).expect("valid fixture");
        let x0 = draw_initial_state(graph.n(), &params, 1);
        let sim = PipelineConfig::for_graph(&graph, &params, cycles, 1).sim;
        Self {
            graph,
            params,
            system,
            x0,
            sim,
        }
    }
}

pub fn prototypical(sizes: &[usize]) -> Graph {
    complete_partite(sizes).expect("valid class sizes")
}

pub fn random_graph(n: usize, p: f64) -> Graph {
    gnp(n, p, 42).expect("valid probability")
}

/// Deterministic shuffled node order.
pub fn scrambled_order(n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(7));
    order
}
