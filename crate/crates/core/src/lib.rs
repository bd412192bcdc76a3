//! Graph coloring with networks of capacitively coupled relaxation
//! oscillators.
//!
//! Each vertex is an oscillator and each edge a coupling capacitor. The
//! network is a piecewise linear hybrid system that is simulated exactly
//! between threshold events. Nodes of the same color class tend to fire
//! together, so the steady phase order of the oscillators sorts the vertices
//! by color, and a minimal cover of that order by independent contiguous
//! blocks yields a coloring. The coloring is proper for any order; only the
//! number of colors depends on how well the dynamics sorted the graph.
//!
//! ```no_run
//! use osc_color::{color_graph, complete_partite, OscParams, PipelineConfig};
//!
//! let g = complete_partite(&[5, 5, 5]).unwrap();
//! let p = OscParams::default();
//! let cfg = PipelineConfig::for_graph(&g, &p, 100.0, 7);
//! let report = color_graph(&g, &p, &cfg).unwrap();
//! assert!(report.proper);
//! ```

pub mod dynamics;
pub mod error;
pub mod graph;
pub mod matrices;
pub mod phase;
pub mod pipeline;
pub mod sorting;

pub use dynamics::{
    delta_x, draw_initial_state, simulate_exact, simulate_instantaneous, Event, SimConfig, SimMode,
    SimState, Trajectory, Transition,
};
pub use error::{Error, Result};
pub use graph::{
    chromatic_number_bruteforce, complete_partite, parse_dimacs, sparsify, validate_coloring,
    Coloring, Graph, GraphSpec,
};
pub use matrices::{
    build_system, column_profile, eigendecompose, prototypical_inverse, verify_eig_relation,
    OscParams, Spectrum, SystemMatrices,
};
pub use phase::{CyclicOrder, PhaseTrace, RankedOrder, SpikeTrain};
pub use pipeline::{color_graph, run_pipeline, ColoringReport, PipelineConfig, PipelineRun};
pub use sorting::{block_cover_cyclic, block_cover_linear, cover_to_coloring, BlockCover};
