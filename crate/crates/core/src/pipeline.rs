//! End-to-end coloring: simulate, read phases, order, cover, color.

use std::f64::consts::PI;
use std::time::Instant;

use serde::Serialize;

use crate::dynamics::{
    draw_initial_state, simulate_exact, simulate_instantaneous, SimConfig, SimMode, Trajectory,
};
use crate::error::{Error, Result};
use crate::graph::{validate_coloring, Graph};
use crate::matrices::{build_system, OscParams};
use crate::phase::{
    compute_common_phases, compute_phases, estimate_periods, extract_spikes, last_spike_order,
    phase_clusters, steady_cyclic_order, CyclicOrder, PhaseTrace, SpikeTrain, DEFAULT_PHASE_TOL,
    DEFAULT_SYNC_TOL, DEFAULT_WINDOW,
};
use crate::sorting::{block_cover_of, cover_to_coloring};

/// Simulation settings plus the tolerances of the phase analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub sim: SimConfig,
    /// Number of trailing inter-spike intervals used for periods and phases.
    pub window: usize,
    pub sync_tol: f64,
    pub phase_tol: f64,
    /// Circular phase gap separating clusters; `None` means `3 pi / n`,
    /// one and a half times the mean spacing of `n` phases.
    pub cluster_gap: Option<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            window: DEFAULT_WINDOW,
            sync_tol: DEFAULT_SYNC_TOL,
            phase_tol: DEFAULT_PHASE_TOL,
            cluster_gap: None,
        }
    }
}

impl PipelineConfig {
    /// Defaults with the horizon set to `cycles` nominal periods of the
    /// network and steps and samples scaled to match.
    pub fn for_graph(g: &Graph, p: &OscParams, cycles: f64, seed: u64) -> Self {
        let per = p.nominal_period(g.n().max(1));
        let mut cfg = Self::default();
        cfg.sim.t_end = cycles * per;
        cfg.sim.max_step = per / 20.0;
        cfg.sim.sample_dt = per / 4.0;
        cfg.sim.seed = seed;
        cfg
    }

    pub fn gap_for(&self, n: usize) -> f64 {
        self.cluster_gap.unwrap_or(3.0 * PI / n.max(1) as f64)
    }
}

/// Default number of nominal periods simulated per run.
pub const DEFAULT_CYCLES: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColoringReport {
    pub graph_id: String,
    pub n: usize,
    pub num_colors: usize,
    pub colors: Vec<usize>,
    pub sync: bool,
    /// Per-node period estimate; 0 for nodes with fewer than two spikes.
    pub periods: Vec<f64>,
    /// Cyclic node order the coloring was read from.
    pub order: Vec<usize>,
    pub blocks: Vec<Vec<usize>>,
    /// Phase clusters of a synchronized run, empty otherwise.
    pub clusters: Vec<Vec<usize>>,
    /// The order came from last spike times instead of steady phases.
    pub fallback: bool,
    pub proper: bool,
    pub num_spikes: usize,
    pub params: OscParams,
    pub config: PipelineConfig,
    pub wall_time_ms: f64,
}

/// Everything a run produced, for callers that also want the raw data.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub report: ColoringReport,
    pub trajectory: Trajectory,
    pub spikes: SpikeTrain,
    pub phases: Option<PhaseTrace>,
}

/// Mean of the last `window` intervals, shortened to what is available.
fn partial_periods(train: &SpikeTrain, window: usize) -> Vec<f64> {
    train
        .times
        .iter()
        .map(|ts| {
            if ts.len() < 2 {
                return 0.0;
            }
            let w = window.max(1).min(ts.len() - 1);
            (ts[ts.len() - 1] - ts[ts.len() - 1 - w]) / w as f64
        })
        .collect()
}

pub fn run_pipeline(g: &Graph, p: &OscParams, cfg: &PipelineConfig) -> Result<PipelineRun> {
    let start = Instant::now();
    let n = g.n();
    let sys = build_system(g, p)?;
    let x0 = draw_initial_state(n, p, cfg.sim.seed);
    let trajectory = match cfg.sim.mode {
        SimMode::Exact => simulate_exact(&sys, &x0, &cfg.sim)?,
        SimMode::Instantaneous => simulate_instantaneous(&sys, &x0, usize::MAX, &cfg.sim)?,
    };
    let spikes = extract_spikes(&trajectory, n);

    let mut phases = None;
    let mut order: Option<CyclicOrder> = None;
    let mut sync = false;
    let mut periods = partial_periods(&spikes, cfg.window);
    match estimate_periods(&spikes, cfg.window, cfg.sync_tol) {
        Ok(est) => {
            periods.clone_from(&est.periods);
            if est.sync {
                let pt = compute_common_phases(&spikes, &est)?;
                match steady_cyclic_order(&pt, cfg.window, cfg.phase_tol) {
                    Ok(co) => {
                        sync = true;
                        order = Some(co);
                    }
                    Err(Error::InsufficientSpikes { .. }) => {}
                    Err(e) => return Err(e),
                }
                phases = Some(pt);
            } else {
                phases = Some(compute_phases(&spikes, &est.periods)?);
            }
        }
        Err(Error::InsufficientSpikes { node, got, need }) => {
            log::info!("node {node} spiked {got} times, {need} needed for periods");
        }
        Err(e) => return Err(e),
    }

    let fallback = order.is_none();
    let co = order.unwrap_or_else(|| {
        log::info!("no steady phase order, using last spike times");
        last_spike_order(&spikes)
    });
    let clusters = if sync {
        phase_clusters(&co, cfg.gap_for(n))
    } else {
        Vec::new()
    };
    let cover = block_cover_of(g, &co)?;
    let coloring = cover_to_coloring(&cover);
    let proper = validate_coloring(g, &coloring)?;

    let report = ColoringReport {
        graph_id: String::new(),
        n,
        num_colors: coloring.num_colors,
        colors: coloring.assignment,
        sync,
        periods,
        order: co.order,
        blocks: cover.blocks(),
        clusters,
        fallback,
        proper,
        num_spikes: trajectory.charge_events().count(),
        params: *p,
        config: *cfg,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    Ok(PipelineRun {
        report,
        trajectory,
        spikes,
        phases,
    })
}

/// Runs the pipeline and returns only the report.
pub fn color_graph(g: &Graph, p: &OscParams, cfg: &PipelineConfig) -> Result<ColoringReport> {
    run_pipeline(g, p, cfg).map(|r| r.report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{complete_partite, gnp};

    #[test]
    fn k555_three_colors() {
        let g = complete_partite(&[5, 5, 5]).unwrap();
        let p = OscParams::default();
        let cfg = PipelineConfig::for_graph(&g, &p, DEFAULT_CYCLES, 3);
        let r = color_graph(&g, &p, &cfg).unwrap();
        assert!(r.proper);
        assert_eq!(r.num_colors, 3);
        assert!(r.sync);
        assert_eq!(r.clusters.len(), 3);
    }

    #[test]
    fn deterministic_apart_from_timing() {
        let g = gnp(9, 0.4, 2).unwrap();
        let p = OscParams::default();
        let cfg = PipelineConfig::for_graph(&g, &p, 30.0, 1);
        let mut a = color_graph(&g, &p, &cfg).unwrap();
        let mut b = color_graph(&g, &p, &cfg).unwrap();
        a.wall_time_ms = 0.0;
        b.wall_time_ms = 0.0;
        assert_eq!(a, b);
        assert!(a.proper);
    }

    #[test]
    fn short_run_falls_back() {
        let g = complete_partite(&[2, 2]).unwrap();
        let p = OscParams::default();
        let cfg = PipelineConfig::for_graph(&g, &p, 2.0, 0);
        let r = color_graph(&g, &p, &cfg).unwrap();
        assert!(r.fallback);
        assert!(!r.sync);
        assert!(r.proper);
    }
}
