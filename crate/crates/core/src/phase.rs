//! Spike trains, relative phases and component orderings.
//!
//! The relative phase of node `i` at its `n`-th charging spike `t_n` is
//! measured against a reference oscillator firing every `dt_i` from `t = 0`:
//!
//! ```text
//! phi(n) = (t_n - n dt_i) 2 pi / dt_i  (mod 2 pi)
//! ```
//!
//! The second half of the module predicts the limiting order of the state
//! components of a linear flow from the eigenspaces of its matrix.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::matrices::{eigendecompose, OscParams, Spectrum, SystemMatrices};

pub const DEFAULT_SYNC_TOL: f64 = 1e-3;
pub const DEFAULT_WINDOW: usize = 10;
pub const DEFAULT_PHASE_TOL: f64 = 1e-6;

/// Charging-spike onset times per node.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeTrain {
    pub times: Vec<Vec<f64>>,
}

impl SpikeTrain {
    pub fn n(&self) -> usize {
        self.times.len()
    }

    /// Same train with every time shifted by `dt`.
    pub fn shifted(&self, dt: f64) -> Self {
        Self {
            times: self
                .times
                .iter()
                .map(|ts| ts.iter().map(|t| t + dt).collect())
                .collect(),
        }
    }
}

/// Collects the `0 -> 1` event times of each of the `n` nodes.
pub fn extract_spikes(traj: &Trajectory, n: usize) -> SpikeTrain {
    let mut times = vec![Vec::new(); n];
    for e in traj.charge_events() {
        if e.node < n {
            times[e.node].push(e.t);
        }
    }
    SpikeTrain { times }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodEstimate {
    pub periods: Vec<f64>,
    pub sync: bool,
}

impl PeriodEstimate {
    pub fn mean(&self) -> f64 {
        self.periods.iter().sum::<f64>() / self.periods.len() as f64
    }
}

/// Mean of the last `window` inter-spike intervals of every node. The
/// network counts as synchronized when all periods agree within
/// `sync_tol * mean`.
pub fn estimate_periods(
    train: &SpikeTrain,
    window: usize,
    sync_tol: f64,
) -> Result<PeriodEstimate> {
    let window = window.max(1);
    let mut periods = Vec::with_capacity(train.n());
    for (node, ts) in train.times.iter().enumerate() {
        if ts.len() < window + 1 {
            return Err(Error::InsufficientSpikes {
                node,
                got: ts.len(),
                need: window + 1,
            });
        }
        let tail = &ts[ts.len() - window - 1..];
        periods.push((tail[window] - tail[0]) / window as f64);
    }
    let mean = periods.iter().sum::<f64>() / periods.len().max(1) as f64;
    let (lo, hi) = periods
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| {
            (lo.min(p), hi.max(p))
        });
    Ok(PeriodEstimate {
        sync: hi - lo <= sync_tol * mean,
        periods,
    })
}

/// Per-node `(n, phi(n))` pairs with `n` counting spikes from 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseTrace {
    pub phases: Vec<Vec<(usize, f64)>>,
    pub periods: Vec<f64>,
    /// Shared reference period when the network is synchronized.
    pub common_period: Option<f64>,
    pub sync: bool,
}

impl PhaseTrace {
    /// Rows `node,n,n*dt_i,phi` for phase plots.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node,n,n_dt,phi\n");
        for (node, ph) in self.phases.iter().enumerate() {
            for &(n, phi) in ph {
                let _ = writeln!(
                    out,
                    "{node},{n},{:.14e},{:.14e}",
                    n as f64 * self.periods[node],
                    phi
                );
            }
        }
        out
    }
}

pub fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Relative phases against per-node reference periods.
pub fn compute_phases(train: &SpikeTrain, periods: &[f64]) -> Result<PhaseTrace> {
    if periods.len() != train.n() {
        return Err(Error::Dimension {
            expected: train.n(),
            got: periods.len(),
        });
    }
    if periods.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
        return Err(Error::InvalidParams("periods must be positive".into()));
    }
    let phases = train
        .times
        .iter()
        .zip(periods)
        .map(|(ts, &dt)| {
            ts.iter()
                .enumerate()
                .map(|(i, &t)| {
                    let n = i + 1;
                    (n, wrap_phase((t - n as f64 * dt) * TAU / dt))
                })
                .collect()
        })
        .collect();
    Ok(PhaseTrace {
        phases,
        periods: periods.to_vec(),
        common_period: None,
        sync: false,
    })
}

/// Phases of a synchronized network, all measured against the mean period.
pub fn compute_common_phases(train: &SpikeTrain, est: &PeriodEstimate) -> Result<PhaseTrace> {
    let common = est.mean();
    let mut pt = compute_phases(train, &vec![common; train.n()])?;
    pt.common_period = Some(common);
    pt.sync = est.sync;
    Ok(pt)
}

/// Cyclic sequence of nodes with the phase that placed each node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CyclicOrder {
    pub order: Vec<usize>,
    /// Indexed by node.
    pub reference_phase: Vec<f64>,
    /// Adjacent pairs whose phases tied within tolerance.
    pub ties: Vec<(usize, usize)>,
}

impl CyclicOrder {
    /// Rotation of the sequence starting at its smallest node index, for
    /// comparing cyclic orders.
    pub fn canonical(&self) -> Vec<usize> {
        let Some(start) = self
            .order
            .iter()
            .enumerate()
            .min_by_key(|(_, &v)| v)
            .map(|(i, _)| i)
        else {
            return Vec::new();
        };
        self.order[start..]
            .iter()
            .chain(&self.order[..start])
            .copied()
            .collect()
    }
}

/// Circular mean of a set of angles, in `[0, 2 pi)`.
pub fn circular_mean(angles: impl IntoIterator<Item = f64>) -> f64 {
    let (s, c) = angles
        .into_iter()
        .fold((0.0, 0.0), |(s, c), a| (s + a.sin(), c + a.cos()));
    wrap_phase(s.atan2(c))
}

/// Orders nodes by the circular mean of their last `window` phases.
pub fn steady_cyclic_order(pt: &PhaseTrace, window: usize, phase_tol: f64) -> Result<CyclicOrder> {
    if !pt.sync {
        return Err(Error::NotSynchronized);
    }
    let mut reference_phase = Vec::with_capacity(pt.phases.len());
    for (node, ph) in pt.phases.iter().enumerate() {
        if ph.len() < window.max(1) {
            return Err(Error::InsufficientSpikes {
                node,
                got: ph.len(),
                need: window,
            });
        }
        reference_phase.push(circular_mean(
            ph[ph.len() - window.max(1)..].iter().map(|p| p.1),
        ));
    }
    let mut order: Vec<usize> = (0..reference_phase.len()).collect();
    order.sort_by(|&a, &b| {
        reference_phase[a]
            .total_cmp(&reference_phase[b])
            .then(a.cmp(&b))
    });
    // re-sort tied runs by index so the tie rule does not depend on rounding
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len()
            && reference_phase[order[j]] - reference_phase[order[j - 1]] <= phase_tol
        {
            j += 1;
        }
        order[i..j].sort_unstable();
        i = j;
    }
    let ties: Vec<(usize, usize)> = order
        .windows(2)
        .filter(|w| (reference_phase[w[1]] - reference_phase[w[0]]).abs() <= phase_tol)
        .map(|w| (w[0], w[1]))
        .collect();
    for &(a, b) in &ties {
        log::debug!("phase tie between nodes {a} and {b}, kept in index order");
    }
    Ok(CyclicOrder {
        order,
        reference_phase,
        ties,
    })
}

/// Fallback for unsynchronized runs: nodes ordered by their last spike
/// time (silent nodes last, by index).
pub fn last_spike_order(train: &SpikeTrain) -> CyclicOrder {
    let last: Vec<f64> = train
        .times
        .iter()
        .map(|ts| ts.last().copied().unwrap_or(f64::INFINITY))
        .collect();
    let mut order: Vec<usize> = (0..train.n()).collect();
    order.sort_by(|&a, &b| last[a].total_cmp(&last[b]).then(a.cmp(&b)));
    CyclicOrder {
        order,
        reference_phase: last,
        ties: Vec::new(),
    }
}

/// Splits a cyclic order into clusters wherever consecutive reference
/// phases differ by more than `gap` (circularly).
pub fn phase_clusters(co: &CyclicOrder, gap: f64) -> Vec<Vec<usize>> {
    let n = co.order.len();
    if n == 0 {
        return Vec::new();
    }
    let ph = |i: usize| co.reference_phase[co.order[i % n]];
    let gap_after = |i: usize| {
        let d = ph(i + 1) - ph(i);
        if i + 1 == n {
            d + TAU
        } else {
            d
        }
    };
    let Some(start) = (0..n).find(|&i| gap_after(i) > gap) else {
        return vec![co.order.clone()];
    };
    let mut clusters = vec![Vec::new()];
    for step in 1..=n {
        let i = start + step;
        clusters.last_mut().unwrap().push(co.order[i % n]);
        if step < n && gap_after(i % n) > gap {
            clusters.push(Vec::new());
        }
    }
    clusters
}

/// Partial order as ascending tie-groups of node indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RankedOrder {
    pub groups: Vec<Vec<usize>>,
}

impl RankedOrder {
    pub fn flatten(&self) -> Vec<usize> {
        self.groups.iter().flatten().copied().collect()
    }

    pub fn is_total(&self) -> bool {
        self.groups.iter().all(|g| g.len() == 1)
    }

    pub fn len(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Group index of every node.
    fn rank_of(&self, n: usize) -> Option<Vec<usize>> {
        let mut rank = vec![usize::MAX; n];
        for (r, g) in self.groups.iter().enumerate() {
            for &u in g {
                if u >= n || rank[u] != usize::MAX {
                    return None;
                }
                rank[u] = r;
            }
        }
        rank.iter().all(|&r| r != usize::MAX).then_some(rank)
    }

    /// True if `values` sorts every group strictly below the next one.
    pub fn consistent_with(&self, values: &[f64]) -> bool {
        self.groups.windows(2).all(|w| {
            let hi = w[0]
                .iter()
                .map(|&u| values[u])
                .fold(f64::NEG_INFINITY, f64::max);
            let lo = w[1]
                .iter()
                .map(|&u| values[u])
                .fold(f64::INFINITY, f64::min);
            hi < lo
        })
    }
}

/// `T(v)`: component order of `v`, with values within `eps_eq` of their
/// neighbour in sorted order sharing a group.
pub fn rank_vector(v: &[f64], eps_eq: f64) -> RankedOrder {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (pos, &u) in idx.iter().enumerate() {
        match groups.last_mut() {
            Some(g) if v[u] - v[idx[pos - 1]] <= eps_eq => g.push(u),
            _ => groups.push(vec![u]),
        }
    }
    for g in &mut groups {
        g.sort_unstable();
    }
    RankedOrder { groups }
}

// Order content of a projection: the uniform direction carries none, so it
// is removed before the zero test.
fn centered_rank(v: &DVector<f64>, eps_eq: f64) -> Option<RankedOrder> {
    let mean = v.mean();
    let c = v.map(|x| x - mean);
    (c.amax() > eps_eq).then(|| rank_vector(c.as_slice(), eps_eq))
}

/// `T(P_E x0)` for eigenspace `group` of `spec`.
pub fn rank_by_projection(
    spec: &Spectrum,
    group: usize,
    x0: &DVector<f64>,
    eps_eq: f64,
) -> Result<RankedOrder> {
    if x0.len() != spec.dim() {
        return Err(Error::Dimension {
            expected: spec.dim(),
            got: x0.len(),
        });
    }
    centered_rank(&spec.project(group, x0), eps_eq).ok_or(Error::ZeroProjection)
}

/// Preferential ordinal extension: each later order only splits tie-groups
/// left by the earlier ones.
pub fn preferential_extend(orders: &[RankedOrder]) -> Result<RankedOrder> {
    let Some(first) = orders.first() else {
        return Ok(RankedOrder { groups: Vec::new() });
    };
    let n = first.len();
    first.rank_of(n).ok_or(Error::InconsistentOrders)?;
    let mut acc = first.clone();
    for next in &orders[1..] {
        let rank = next.rank_of(n).ok_or(Error::InconsistentOrders)?;
        if next.len() != n {
            return Err(Error::InconsistentOrders);
        }
        let mut groups = Vec::with_capacity(acc.groups.len());
        for g in acc.groups {
            let mut g = g;
            g.sort_by_key(|&u| (rank[u], u));
            let mut start = 0;
            for i in 1..=g.len() {
                if i == g.len() || rank[g[i]] != rank[g[start]] {
                    groups.push(g[start..i].to_vec());
                    start = i;
                }
            }
        }
        acc = RankedOrder { groups };
    }
    Ok(acc)
}

/// Predicted limiting order of `x' = B x`:
/// `T(P_E1 x0) (+)' T(P_E2 x0) (+)' ...` over the eigenspaces of `B` from
/// the least negative eigenvalue down.
pub fn predict_asymptotic_order(
    spec: &Spectrum,
    x0: &DVector<f64>,
    eps_eq: f64,
) -> Result<RankedOrder> {
    let projections = (0..spec.eigenspaces.len()).map(|g| spec.project(g, x0));
    chain_projections(projections, spec.dim(), eps_eq, None)
}

fn chain_projections(
    projections: impl Iterator<Item = DVector<f64>>,
    n: usize,
    eps_eq: f64,
    head: Option<RankedOrder>,
) -> Result<RankedOrder> {
    if n == 0 {
        return Err(Error::Dimension {
            expected: 1,
            got: 0,
        });
    }
    let had_head = head.is_some();
    let mut acc = head.unwrap_or(RankedOrder {
        groups: vec![(0..n).collect()],
    });
    let mut informative = false;
    for v in projections {
        if acc.is_total() {
            break;
        }
        if let Some(r) = centered_rank(&v, eps_eq) {
            informative = true;
            acc = preferential_extend(&[acc, r])?;
        }
    }
    if !informative && !had_head {
        return Err(Error::ZeroProjection);
    }
    Ok(acc)
}

/// Spectrum of the flow matrix `B G(s)` of a charging state, represented
/// through the symmetric `S = G^1/2 B G^1/2`.
#[derive(Debug, Clone)]
pub struct StateSpectrum {
    pub spectrum: Spectrum,
    pub sqrt_g: DVector<f64>,
    pub fixed_point: DVector<f64>,
    /// Eigenspace groups counted as the null space.
    pub null_groups: Vec<usize>,
}

impl StateSpectrum {
    /// Spectral projection onto eigenspace `group` of `B G(s)`:
    /// `G^-1/2 Q_E Q_E^T G^1/2 y`.
    pub fn project(&self, group: usize, y: &DVector<f64>) -> DVector<f64> {
        let scaled = y.component_mul(&self.sqrt_g);
        self.spectrum
            .project(group, &scaled)
            .component_div(&self.sqrt_g)
    }

    pub fn null_dim(&self) -> usize {
        self.null_groups
            .iter()
            .map(|&g| self.spectrum.eigenspaces[g].len())
            .sum()
    }
}

pub fn state_spectrum(sys: &SystemMatrices, s: &[bool], eps_eig: f64) -> Result<StateSpectrum> {
    if s.len() != sys.n {
        return Err(Error::Dimension {
            expected: sys.n,
            got: s.len(),
        });
    }
    let p = &sys.params;
    let sqrt_g = DVector::from_iterator(
        sys.n,
        s.iter()
            .map(|&c| if c { p.g_s + p.g_i } else { p.g_s }.sqrt()),
    );
    let sym = DMatrix::from_fn(sys.n, sys.n, |i, j| sys.b[(i, j)] * sqrt_g[i] * sqrt_g[j]);
    let spectrum = eigendecompose(&sym, eps_eig)?;
    let scale = spectrum
        .eigenvalues
        .iter()
        .fold(0.0_f64, |a, l| a.max(l.abs()));
    let null_groups = (0..spectrum.eigenspaces.len())
        .filter(|&g| spectrum.eigenvalue_of(g).abs() <= eps_eig * scale)
        .collect();
    let fixed_point = DVector::from_iterator(
        sys.n,
        s.iter().map(|&c| if c { p.charge_level() } else { 0.0 }),
    );
    Ok(StateSpectrum {
        spectrum,
        sqrt_g,
        fixed_point,
        null_groups,
    })
}

/// Predicted limiting order in charging state `s`: the fixed point decides
/// first, then the null-space projection (if any), then the eigenspace
/// projections of `x0 - p(s)` in order of decreasing eigenvalue.
pub fn predict_charging_order(
    st: &StateSpectrum,
    s: &[bool],
    x0: &DVector<f64>,
    p: &OscParams,
    eps_eq: f64,
) -> Result<RankedOrder> {
    let n = st.spectrum.dim();
    if s.len() != n || x0.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: x0.len().min(s.len()),
        });
    }
    if !s.iter().any(|&c| c) {
        return Err(Error::InvalidParams("charging order needs s != 0".into()));
    }
    let fp: Vec<f64> = s
        .iter()
        .map(|&c| if c { p.charge_level() } else { 0.0 })
        .collect();
    let head = rank_vector(&fp, eps_eq);
    let offset = x0 - &st.fixed_point;
    let order = st
        .null_groups
        .iter()
        .copied()
        .chain((0..st.spectrum.eigenspaces.len()).filter(|g| !st.null_groups.contains(g)))
        .map(|g| st.project(g, &offset))
        .collect::<Vec<_>>();
    chain_projections(order.into_iter(), n, eps_eq, Some(head))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{discharge_only, linear_flow, state_matrices, Event, Transition};
    use crate::graph::{complete_partite, Graph};
    use crate::matrices::{build_system, OscParams, DEFAULT_EPS_EIG};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn train(times: Vec<Vec<f64>>) -> SpikeTrain {
        SpikeTrain { times }
    }

    fn ro(groups: &[&[usize]]) -> RankedOrder {
        RankedOrder {
            groups: groups.iter().map(|g| g.to_vec()).collect(),
        }
    }

    #[test]
    fn spikes_from_events() {
        let mut traj = Trajectory::default();
        for t in [1.0, 3.0, 5.0] {
            traj.events.push(Event {
                t,
                node: 0,
                transition: Transition::Charge,
            });
            traj.events.push(Event {
                t: t + 0.1,
                node: 0,
                transition: Transition::Discharge,
            });
        }
        assert_eq!(extract_spikes(&traj, 1).times, vec![vec![1.0, 3.0, 5.0]]);
        assert_eq!(
            extract_spikes(&Trajectory::default(), 2).times,
            vec![Vec::<f64>::new(), Vec::new()]
        );
    }

    #[test]
    fn periods() {
        let tr = train(vec![(1..=12).map(|i| 2.0 * i as f64).collect()]);
        let est = estimate_periods(&tr, 10, DEFAULT_SYNC_TOL).unwrap();
        assert_eq!(est.periods, vec![2.0]);
        assert!(est.sync);
        let tr2 = train(vec![
            tr.times[0].clone(),
            tr.times[0].iter().map(|t| t + 0.5).collect(),
        ]);
        assert!(estimate_periods(&tr2, 10, DEFAULT_SYNC_TOL).unwrap().sync);
        let tr3 = train(vec![
            tr.times[0].clone(),
            (1..=12).map(|i| 2.1 * i as f64).collect(),
        ]);
        assert!(!estimate_periods(&tr3, 10, DEFAULT_SYNC_TOL).unwrap().sync);
        assert!(matches!(
            estimate_periods(&train(vec![vec![1.0, 2.0]]), 10, 1e-3),
            Err(Error::InsufficientSpikes { .. })
        ));
    }

    #[test]
    fn phase_formula() {
        let dt = 2.0;
        let on: Vec<f64> = (1..=5).map(|n| n as f64 * dt).collect();
        let late: Vec<f64> = on.iter().map(|t| t + dt / 4.0).collect();
        let early: Vec<f64> = on.iter().map(|t| t - dt / 4.0).collect();
        let pt = compute_phases(&train(vec![on, late, early]), &[dt; 3]).unwrap();
        for &(_, phi) in &pt.phases[0] {
            assert_eq!(phi, 0.0);
        }
        for &(_, phi) in &pt.phases[1] {
            assert!((phi - FRAC_PI_2).abs() < 1e-12);
        }
        for &(_, phi) in &pt.phases[2] {
            assert!((phi - 3.0 * FRAC_PI_2).abs() < 1e-12);
        }
        assert!(compute_phases(&train(vec![vec![1.0]]), &[0.0]).is_err());
    }

    #[test]
    fn wrap_stays_in_range() {
        for v in [-1e-17, -TAU, TAU, 7.0 * PI, -0.5] {
            let w = wrap_phase(v);
            assert!((0.0..TAU).contains(&w), "{v} -> {w}");
        }
    }

    fn synced(pt: PhaseTrace) -> PhaseTrace {
        PhaseTrace { sync: true, ..pt }
    }

    #[test]
    fn cyclic_order_by_mean_phase() {
        let mk = |phi: f64| -> Vec<f64> { (1..=10).map(|n| n as f64 + phi / TAU).collect() };
        let pt = synced(compute_phases(&train(vec![mk(2.0), mk(0.1)]), &[1.0, 1.0]).unwrap());
        let co = steady_cyclic_order(&pt, 5, DEFAULT_PHASE_TOL).unwrap();
        assert_eq!(co.order, vec![1, 0]);
        assert!(co.ties.is_empty());

        let pt = synced(compute_phases(&train(vec![mk(1.0), mk(1.0)]), &[1.0, 1.0]).unwrap());
        let co = steady_cyclic_order(&pt, 5, DEFAULT_PHASE_TOL).unwrap();
        assert_eq!(co.order, vec![0, 1]);
        assert_eq!(co.ties, vec![(0, 1)]);

        let unsynced = compute_phases(&train(vec![mk(1.0)]), &[1.0]).unwrap();
        assert!(matches!(
            steady_cyclic_order(&unsynced, 5, DEFAULT_PHASE_TOL),
            Err(Error::NotSynchronized)
        ));
    }

    #[test]
    fn circular_mean_wraps() {
        let m = circular_mean([TAU - 0.1, 0.1]);
        assert!(m < 1e-12 || (TAU - m) < 1e-12);
    }

    #[test]
    fn clusters_split_on_gaps() {
        let co = CyclicOrder {
            order: vec![0, 1, 2, 3, 4, 5],
            reference_phase: vec![6.2, 0.05, 2.0, 2.1, 4.0, 4.05],
            ties: vec![],
        };
        let mut order = co.order.clone();
        order.sort_by(|&a, &b| co.reference_phase[a].total_cmp(&co.reference_phase[b]));
        let co = CyclicOrder { order, ..co };
        let mut cl = phase_clusters(&co, 0.5);
        cl.iter_mut().for_each(|c| c.sort_unstable());
        cl.sort();
        assert_eq!(cl, vec![vec![0, 1], vec![2, 3], vec![4, 5]]);
    }

    #[test]
    fn fallback_orders_by_last_spike() {
        let co = last_spike_order(&train(vec![vec![1.0, 5.0], vec![4.0], vec![]]));
        assert_eq!(co.order, vec![1, 0, 2]);
    }

    #[test]
    fn preferential_extension() {
        // nodes a=0, b=1, c=2
        let x = ro(&[&[0, 1], &[2]]);
        let y = ro(&[&[1], &[0], &[2]]);
        assert_eq!(preferential_extend(&[x.clone(), y.clone()]).unwrap(), y);
        assert_eq!(preferential_extend(&[x.clone(), x.clone()]).unwrap(), x);
        let total = ro(&[&[2], &[0], &[1]]);
        assert_eq!(preferential_extend(&[total.clone(), y]).unwrap(), total);
        assert!(matches!(
            preferential_extend(&[x, ro(&[&[0], &[1]])]),
            Err(Error::InconsistentOrders)
        ));
    }

    #[test]
    fn projection_on_bipartite_leading_space() {
        let g = complete_partite(&[2, 2]).unwrap();
        let sys = build_system(&g, &OscParams::default()).unwrap();
        let spec = eigendecompose(&sys.b, DEFAULT_EPS_EIG).unwrap();
        assert_eq!(spec.eigenspaces[0].len(), 1);
        let x0 = DVector::from_vec(vec![0.9, 0.8, 0.3, 0.2]);
        let eps = 1e-7 * x0.norm();
        let r = rank_by_projection(&spec, 0, &x0, eps).unwrap();
        assert_eq!(r, ro(&[&[2, 3], &[0, 1]]));
        let flat = DVector::from_vec(vec![0.9, 0.3, 0.8, 0.4]);
        assert!(matches!(
            rank_by_projection(&spec, 0, &flat, eps),
            Err(Error::ZeroProjection)
        ));
        let generic = DVector::from_vec(vec![0.31, 0.52, 0.27, 0.66]);
        let full = predict_asymptotic_order(&spec, &generic, 0.0).unwrap();
        assert!(full.is_total());
    }

    #[test]
    fn isotropic_prediction_is_initial_order() {
        let g = Graph::new(2, []).unwrap();
        let p = OscParams {
            c_c: 0.0,
            ..OscParams::default()
        };
        let sys = build_system(&g, &p).unwrap();
        let spec = eigendecompose(&sys.b, DEFAULT_EPS_EIG).unwrap();
        let x0 = DVector::from_vec(vec![0.7, 0.4]);
        let r = predict_asymptotic_order(&spec, &x0, 1e-9).unwrap();
        assert_eq!(r.flatten(), vec![1, 0]);
    }

    #[test]
    fn prediction_matches_long_discharge() {
        let g = complete_partite(&[2, 2]).unwrap();
        let p = OscParams {
            c_i: 2.0,
            c_c: 1.0,
            ..OscParams::default()
        };
        let sys = build_system(&g, &p).unwrap();
        let spec = eigendecompose(&sys.b, DEFAULT_EPS_EIG).unwrap();
        let x0 = DVector::from_vec(vec![0.35, 0.6, 0.5, 0.3]);
        let pred = predict_asymptotic_order(&spec, &x0, 1e-7 * x0.norm()).unwrap();
        // planted classes are contiguous in the prediction
        let flat = pred.flatten();
        let labels = g.planted_labels().unwrap();
        assert_eq!(labels[flat[0]], labels[flat[1]]);
        let x = discharge_only(&sys, &x0, 300.0).unwrap();
        assert_eq!(rank_vector(x.as_slice(), 0.0).flatten(), flat);
    }

    #[test]
    fn charging_prediction() {
        let g = complete_partite(&[2, 3]).unwrap();
        let p = OscParams {
            c_i: 2.0,
            c_c: 1.0,
            g_i: 4.0,
            g_s: 1.0,
            v_l: 0.02,
            v_h: 0.75,
        };
        let sys = build_system(&g, &p).unwrap();
        let mut s = vec![false; 5];
        s[1] = true;
        let st = state_spectrum(&sys, &s, DEFAULT_EPS_EIG).unwrap();
        assert_eq!(st.null_dim(), 0);
        let x0 = DVector::from_vec(vec![0.3, 0.4, 0.5, 0.6, 0.45]);
        let pred = predict_charging_order(&st, &s, &x0, &p, 1e-9).unwrap();
        assert_eq!(*pred.flatten().last().unwrap(), 1);
        assert!(pred.is_total());

        // compare with the flow itself at a late time
        let (m, fp) = state_matrices(&sys, &s);
        let x = linear_flow(&m, &fp, &x0, 400.0).unwrap();
        let offset: Vec<f64> = (0..5).map(|k| x[k] - fp[k]).collect();
        let sim = rank_vector(&offset, 0.0).flatten();
        let pred_rest: Vec<usize> = pred.flatten().into_iter().filter(|&u| u != 1).collect();
        let sim_rest: Vec<usize> = sim.into_iter().filter(|&u| u != 1).collect();
        assert_eq!(pred_rest, sim_rest);

        let all = vec![true; 5];
        let st = state_spectrum(&sys, &all, DEFAULT_EPS_EIG).unwrap();
        let pred = predict_charging_order(&st, &all, &x0, &p, 1e-9).unwrap();
        assert_eq!(pred.len(), 5);
        assert!(predict_charging_order(&st, &[false; 5], &x0, &p, 1e-9).is_err());
    }

    #[test]
    fn rotation_invariance() {
        let mk = |phi: f64| -> Vec<f64> { (1..=12).map(|n| 3.0 * n as f64 + phi).collect() };
        let tr = train(vec![mk(0.4), mk(2.9), mk(1.2), mk(0.5)]);
        let order = |t: &SpikeTrain| {
            let est = estimate_periods(t, 10, DEFAULT_SYNC_TOL).unwrap();
            let pt = compute_common_phases(t, &est).unwrap();
            steady_cyclic_order(&pt, 10, DEFAULT_PHASE_TOL)
                .unwrap()
                .canonical()
        };
        let base = order(&tr);
        for shift in [0.7, 1.9, 2.5, 10.3] {
            assert_eq!(order(&tr.shifted(shift)), base);
        }
    }
}
