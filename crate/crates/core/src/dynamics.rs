//! Hybrid simulation of the coupled oscillator network.
//!
//! Within a fixed switching state `s` the network is linear,
//!
//! ```text
//! x' = B G(s) (x - p(s)),   G(s) = g_s I + g_i diag(s),   p(s) = g_i/(g_i+g_s) s
//! ```
//!
//! and is solved in closed form. `B G(s)` is similar to the symmetric matrix
//! `G^1/2 B G^1/2`, so one symmetric eigendecomposition per visited state
//! gives the exact flow. Threshold crossings are bracketed by stepping along
//! the analytic flow and localized by bisection.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::rc::Rc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrices::{eigendecompose, SystemMatrices, DEFAULT_EPS_EIG};

/// Allowed excursion of any voltage outside `[0, 1]`.
pub const BOX_TOL: f64 = 1e-6;

// Voltage slack below which a node counts as sitting on its threshold.
const GUARD_EPS: f64 = 1e-12;
// Looser slack for deciding who switches at a located event, so that the
// located node always switches regardless of rounding in the evaluation.
const SWITCH_EPS: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimMode {
    /// Full hybrid dynamics with finite charging.
    Exact,
    /// Charging replaced by the instantaneous jump `delta_x`.
    #[serde(alias = "instant")]
    Instantaneous,
}

impl std::str::FromStr for SimMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Self::Exact),
            "instant" | "instantaneous" => Ok(Self::Instantaneous),
            other => Err(Error::InvalidParams(format!("unknown mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub t_end: f64,
    /// Upper bound on the bracketing step; the step also shrinks with the
    /// fastest rate of the current linear flow.
    pub max_step: f64,
    /// Time resolution of event localization.
    pub event_tol: f64,
    pub sample_dt: f64,
    pub mode: SimMode,
    pub seed: u64,
    /// Stop after this many charging spikes.
    pub max_spikes: Option<usize>,
    /// Step budget; exceeding it is an error.
    pub max_steps: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            t_end: 2000.0,
            max_step: 1.0,
            event_tol: 1e-10,
            sample_dt: 1.0,
            mode: SimMode::Exact,
            seed: 0,
            max_spikes: None,
            max_steps: 20_000_000,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [self.t_end, self.max_step, self.event_tol, self.sample_dt];
        if pos.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidParams(
                "t_end, max_step, event_tol and sample_dt must be positive".into(),
            ));
        }
        if self.event_tol >= self.max_step {
            return Err(Error::InvalidParams(
                "event_tol must be far below max_step".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transition {
    /// `0 -> 1`: the node reached `v_l` and starts charging.
    Charge,
    /// `1 -> 0`: the node reached `v_h` and starts discharging.
    Discharge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub node: usize,
    pub transition: Transition,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub x: DVector<f64>,
    /// `true` = charging.
    pub s: Vec<bool>,
}

/// Time-ordered samples plus the event log. A sample taken at an event
/// time holds the state after all events at that instant were applied.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<SimState>,
    pub events: Vec<Event>,
    /// Event times at which several nodes switched together.
    pub simultaneous: Vec<f64>,
}

impl Trajectory {
    pub fn charge_events(&self) -> impl Iterator<Item = &Event> {
        self.events
            .iter()
            .filter(|e| e.transition == Transition::Charge)
    }

    /// Node sequence of charging spikes.
    pub fn spike_order(&self) -> Vec<usize> {
        self.charge_events().map(|e| e.node).collect()
    }

    /// Sample-index pairs `(i, i+1)` lying inside one maximal all-discharging
    /// interval: both samples have `s = 0` and no event falls in
    /// `(t_i, t_{i+1}]`.
    pub fn discharge_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut ev = 0;
        for i in 0..self.samples.len().saturating_sub(1) {
            let (a, b) = (&self.samples[i], &self.samples[i + 1]);
            while ev < self.events.len() && self.events[ev].t <= a.t {
                ev += 1;
            }
            let crossed = ev < self.events.len() && self.events[ev].t <= b.t;
            if !crossed && !a.s.iter().any(|&c| c) && !b.s.iter().any(|&c| c) {
                out.push((i, i + 1));
            }
        }
        out
    }

    /// CSV with header `t,x_0..x_{n-1},s_0..s_{n-1}`, 15 significant digits.
    pub fn samples_csv(&self) -> String {
        let n = self.samples.first().map_or(0, |s| s.x.len());
        let mut out = String::from("t");
        for k in 0..n {
            let _ = write!(out, ",x_{k}");
        }
        for k in 0..n {
            let _ = write!(out, ",s_{k}");
        }
        out.push('\n');
        for st in &self.samples {
            let _ = write!(out, "{:.14e}", st.t);
            for v in st.x.iter() {
                let _ = write!(out, ",{v:.14e}");
            }
            for &c in &st.s {
                let _ = write!(out, ",{}", u8::from(c));
            }
            out.push('\n');
        }
        out
    }

    /// CSV with header `t,node,transition` (`0->1` or `1->0`).
    pub fn events_csv(&self) -> String {
        let mut out = String::from("t,node,transition\n");
        for e in &self.events {
            let tr = match e.transition {
                Transition::Charge => "0->1",
                Transition::Discharge => "1->0",
            };
            let _ = writeln!(out, "{:.14e},{},{}", e.t, e.node, tr);
        }
        out
    }
}

/// `x(t) = fp + e^{M t} (x0 - fp)`. Symmetric `M` goes through its
/// eigendecomposition, anything else through the matrix exponential.
pub fn linear_flow(
    m: &DMatrix<f64>,
    fp: &DVector<f64>,
    x0: &DVector<f64>,
    t: f64,
) -> Result<DVector<f64>> {
    let n = m.nrows();
    if !m.is_square() || fp.len() != n || x0.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: x0.len().min(fp.len()),
        });
    }
    let finite = m
        .iter()
        .chain(fp.iter())
        .chain(x0.iter())
        .all(|v| v.is_finite());
    if !finite || !t.is_finite() {
        return Err(Error::InvalidParams("non-finite flow input".into()));
    }
    if t < 0.0 {
        return Err(Error::InvalidParams(
            "flow time must be non-negative".into(),
        ));
    }
    if t == 0.0 {
        return Ok(x0.clone());
    }
    let d = x0 - fp;
    let asym = (m - m.transpose()).amax();
    let prop = if asym <= 1e-12 * m.amax().max(1.0) {
        eigendecompose(m, DEFAULT_EPS_EIG)?.apply_fn(|l| (l * t).exp())
    } else {
        (m * t).exp()
    };
    Ok(fp + prop * d)
}

/// Flow matrix `B G(s)` and fixed point `g_i/(g_i+g_s) s` for state `s`.
pub fn state_matrices(sys: &SystemMatrices, s: &[bool]) -> (DMatrix<f64>, DVector<f64>) {
    let p = &sys.params;
    let g = DVector::from_iterator(sys.n, s.iter().map(|&c| conductance(p.g_s, p.g_i, c)));
    let m = &sys.b * DMatrix::from_diagonal(&g);
    let fp = DVector::from_iterator(
        sys.n,
        s.iter().map(|&c| if c { p.charge_level() } else { 0.0 }),
    );
    (m, fp)
}

fn conductance(g_s: f64, g_i: f64, charging: bool) -> f64 {
    if charging {
        g_s + g_i
    } else {
        g_s
    }
}

/// Instantaneous charging jump of node `k`: `(dv / B_kk) B e_k`. The jump
/// does not depend on the current state.
pub fn delta_x(sys: &SystemMatrices, k: usize) -> DVector<f64> {
    let dv = sys.params.dv();
    let col = sys.b.column(k);
    let mut d = col * (dv / sys.b[(k, k)]);
    d[k] = dv;
    d
}

/// Uniform start inside the hysteresis band, `0.01 dv` away from both
/// thresholds.
pub fn draw_initial_state(n: usize, p: &crate::matrices::OscParams, seed: u64) -> DVector<f64> {
    let margin = 0.01 * p.dv();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(n, |_, _| rng.gen_range(p.v_l + margin..p.v_h - margin))
}

/// Exact flow of one switching state, via `S = G^1/2 B G^1/2 = Q L Q^T`:
/// `x(t) = fp + G^-1/2 Q e^{L t} Q^T G^1/2 (x0 - fp)`.
#[derive(Debug)]
pub(crate) struct FlowOp {
    lambda: DVector<f64>,
    q: DMatrix<f64>,
    q_t: DMatrix<f64>,
    sqrt_g: DVector<f64>,
    fp: DVector<f64>,
    pub(crate) max_rate: f64,
}

impl FlowOp {
    pub(crate) fn new(sys: &SystemMatrices, s: &[bool]) -> Result<Self> {
        let p = &sys.params;
        let sqrt_g = DVector::from_iterator(
            sys.n,
            s.iter().map(|&c| conductance(p.g_s, p.g_i, c).sqrt()),
        );
        let mut sym = sys.b.clone();
        for i in 0..sys.n {
            for j in 0..sys.n {
                sym[(i, j)] *= sqrt_g[i] * sqrt_g[j];
            }
        }
        let spec = eigendecompose(&sym, DEFAULT_EPS_EIG)?;
        let lambda = DVector::from_column_slice(&spec.eigenvalues);
        let max_rate = lambda.iter().fold(0.0_f64, |a, l| a.max(l.abs()));
        let fp = DVector::from_iterator(
            sys.n,
            s.iter().map(|&c| if c { p.charge_level() } else { 0.0 }),
        );
        Ok(Self {
            lambda,
            q_t: spec.eigenvectors.transpose(),
            q: spec.eigenvectors,
            sqrt_g,
            fp,
            max_rate,
        })
    }

    /// Modal coordinates of `x0` for this state.
    fn modes(&self, x0: &DVector<f64>) -> DVector<f64> {
        &self.q_t * (x0 - &self.fp).component_mul(&self.sqrt_g)
    }

    fn eval(&self, modes: &DVector<f64>, t: f64) -> DVector<f64> {
        let decayed = modes.zip_map(&self.lambda, |c, l| c * (l * t).exp());
        (&self.q * decayed).component_div(&self.sqrt_g) + &self.fp
    }

    fn eval_component(&self, modes: &DVector<f64>, t: f64, k: usize) -> f64 {
        let row = self.q.row(k);
        let mut acc = 0.0;
        for j in 0..modes.len() {
            acc += row[j] * modes[j] * (self.lambda[j] * t).exp();
        }
        acc / self.sqrt_g[k] + self.fp[k]
    }
}

struct FlowCache<'a> {
    sys: &'a SystemMatrices,
    ops: HashMap<Vec<bool>, Rc<FlowOp>>,
}

impl<'a> FlowCache<'a> {
    fn new(sys: &'a SystemMatrices) -> Self {
        Self {
            sys,
            ops: HashMap::new(),
        }
    }

    fn get(&mut self, s: &[bool]) -> Result<Rc<FlowOp>> {
        if let Some(op) = self.ops.get(s) {
            return Ok(op.clone());
        }
        if self.ops.len() > 4096 {
            self.ops.clear();
        }
        let op = Rc::new(FlowOp::new(self.sys, s)?);
        self.ops.insert(s.to_vec(), op.clone());
        Ok(op)
    }
}

// Positive while no event is due for node k.
#[inline]
fn guard(x: f64, charging: bool, v_l: f64, v_h: f64) -> f64 {
    if charging {
        v_h - x
    } else {
        x - v_l
    }
}

fn check_box(x: &DVector<f64>, t: f64) -> Result<()> {
    if let Some(v) = x.iter().find(|v| !(-BOX_TOL..=1.0 + BOX_TOL).contains(*v)) {
        return Err(Error::Numerical(format!(
            "state left the unit box at t={t}: {v}"
        )));
    }
    Ok(())
}

fn check_start(sys: &SystemMatrices, x0: &DVector<f64>) -> Result<()> {
    if x0.len() != sys.n {
        return Err(Error::Dimension {
            expected: sys.n,
            got: x0.len(),
        });
    }
    let p = &sys.params;
    if x0.iter().any(|&v| !(v > p.v_l && v < p.v_h)) {
        return Err(Error::InvalidParams(
            "initial state must lie strictly inside (v_l, v_h)".into(),
        ));
    }
    Ok(())
}

/// Bracket-and-bisect search for the first guard crossing in `(0, h]` of a
/// flow segment. Returns the earliest localized time over `candidates`.
#[allow(clippy::too_many_arguments)]
fn locate_event(
    op: &FlowOp,
    modes: &DVector<f64>,
    s: &[bool],
    lo: f64,
    hi: f64,
    candidates: &[usize],
    v: (f64, f64),
    tol: f64,
) -> Result<f64> {
    let mut first = f64::INFINITY;
    for &k in candidates {
        let g = |t: f64| guard(op.eval_component(modes, t, k), s[k], v.0, v.1);
        let (mut a, mut b) = (lo, hi);
        if g(a) <= GUARD_EPS {
            // already at the threshold when the segment starts
            first = first.min(a);
            continue;
        }
        if g(b) > GUARD_EPS {
            return Err(Error::EventLocalization {
                t: lo,
                msg: format!("no sign change for node {k} in [{a}, {b}]"),
            });
        }
        while b - a > tol {
            let mid = 0.5 * (a + b);
            if g(mid) <= GUARD_EPS {
                b = mid;
            } else {
                a = mid;
            }
        }
        first = first.min(b);
    }
    Ok(first)
}

/// Full hybrid simulation from `x0` with every node discharging.
///
/// A discharging node switches to charging when it falls to `v_l`, a
/// charging node switches back when it reaches `v_h`. Simultaneous
/// switches are applied in ascending node order.
pub fn simulate_exact(
    sys: &SystemMatrices,
    x0: &DVector<f64>,
    cfg: &SimConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    check_start(sys, x0)?;
    let p = sys.params;
    let thresholds = (p.v_l, p.v_h);
    let n = sys.n;
    let mut cache = FlowCache::new(sys);

    let mut traj = Trajectory::default();
    let mut s = vec![false; n];
    let mut x = x0.clone();
    let mut t = 0.0;
    let mut next_sample = 0.0;
    let mut steps = 0usize;
    let mut spikes = 0usize;
    traj.samples.push(SimState {
        t,
        x: x.clone(),
        s: s.clone(),
    });
    next_sample += cfg.sample_dt;

    'segments: while t < cfg.t_end {
        let op = cache.get(&s)?;
        let modes = op.modes(&x);
        let h = cfg.max_step.min(0.25 / op.max_rate);
        let mut tau = 0.0;
        loop {
            steps += 1;
            if steps > cfg.max_steps {
                return Err(Error::Budget { steps, t: t + tau });
            }
            let horizon = cfg.t_end - t;
            let step_end = (tau + h).min(horizon);
            let xe = op.eval(&modes, step_end);
            let due: Vec<usize> = (0..n)
                .filter(|&k| guard(xe[k], s[k], p.v_l, p.v_h) <= GUARD_EPS)
                .collect();
            let seg_end = if due.is_empty() {
                step_end
            } else {
                locate_event(
                    &op,
                    &modes,
                    &s,
                    tau,
                    step_end,
                    &due,
                    thresholds,
                    cfg.event_tol,
                )?
            };
            // samples strictly before the segment end
            while next_sample < t + seg_end {
                let xs = op.eval(&modes, next_sample - t);
                check_box(&xs, next_sample)?;
                traj.samples.push(SimState {
                    t: next_sample,
                    x: xs,
                    s: s.clone(),
                });
                next_sample += cfg.sample_dt;
            }
            if due.is_empty() {
                tau = step_end;
                if step_end >= horizon {
                    x = op.eval(&modes, step_end);
                    t = cfg.t_end;
                    break 'segments;
                }
                continue;
            }

            x = op.eval(&modes, seg_end);
            t += seg_end;
            check_box(&x, t)?;
            let switching: Vec<usize> = (0..n)
                .filter(|&k| guard(x[k], s[k], p.v_l, p.v_h) <= SWITCH_EPS)
                .collect();
            if switching.len() > 1 {
                traj.simultaneous.push(t);
            }
            for k in switching {
                let transition = if s[k] {
                    Transition::Discharge
                } else {
                    spikes += 1;
                    Transition::Charge
                };
                s[k] = !s[k];
                traj.events.push(Event {
                    t,
                    node: k,
                    transition,
                });
            }
            if next_sample <= t {
                next_sample = t + cfg.sample_dt;
            }
            traj.samples.push(SimState {
                t,
                x: x.clone(),
                s: s.clone(),
            });
            if cfg.max_spikes.is_some_and(|m| spikes >= m) {
                break 'segments;
            }
            continue 'segments;
        }
    }
    if traj.samples.last().is_some_and(|l| l.t < t) {
        traj.samples.push(SimState { t, x, s });
    }
    Ok(traj)
}

/// Discharge flow interrupted by instantaneous charging jumps. Each spike
/// logs a `Charge` and a `Discharge` event at the same time stamp. Stops
/// after `n_spikes` spikes or at `cfg.t_end`.
pub fn simulate_instantaneous(
    sys: &SystemMatrices,
    x0: &DVector<f64>,
    n_spikes: usize,
    cfg: &SimConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    check_start(sys, x0)?;
    let p = sys.params;
    let n = sys.n;
    let zero = vec![false; n];
    let op = FlowOp::new(sys, &zero)?;
    let jumps: Vec<DVector<f64>> = (0..n).map(|k| delta_x(sys, k)).collect();
    let h = cfg.max_step.min(0.25 / op.max_rate);
    let limit = cfg.max_spikes.map_or(n_spikes, |m| m.min(n_spikes));

    let mut traj = Trajectory::default();
    let mut x = x0.clone();
    let mut t = 0.0;
    let mut next_sample = cfg.sample_dt;
    let mut steps = 0usize;
    let mut spikes = 0usize;
    traj.samples.push(SimState {
        t,
        x: x.clone(),
        s: zero.clone(),
    });

    while spikes < limit && t < cfg.t_end {
        let modes = op.modes(&x);
        let mut tau = 0.0;
        let horizon = cfg.t_end - t;
        let seg_end = loop {
            steps += 1;
            if steps > cfg.max_steps {
                return Err(Error::Budget { steps, t: t + tau });
            }
            let step_end = (tau + h).min(horizon);
            let xe = op.eval(&modes, step_end);
            let due: Vec<usize> = (0..n).filter(|&k| xe[k] - p.v_l <= GUARD_EPS).collect();
            if !due.is_empty() {
                break Some(locate_event(
                    &op,
                    &modes,
                    &zero,
                    tau,
                    step_end,
                    &due,
                    (p.v_l, p.v_h),
                    cfg.event_tol,
                )?);
            }
            if step_end >= horizon {
                break None;
            }
            tau = step_end;
        };
        let end = seg_end.unwrap_or(horizon);
        while next_sample < t + end {
            traj.samples.push(SimState {
                t: next_sample,
                x: op.eval(&modes, next_sample - t),
                s: zero.clone(),
            });
            next_sample += cfg.sample_dt;
        }
        x = op.eval(&modes, end);
        t += end;
        if seg_end.is_none() {
            break;
        }

        let mut fired = 0;
        for k in 0..n {
            if x[k] - p.v_l > SWITCH_EPS {
                continue;
            }
            x += &jumps[k];
            x[k] = p.v_h;
            fired += 1;
            spikes += 1;
            traj.events.push(Event {
                t,
                node: k,
                transition: Transition::Charge,
            });
            traj.events.push(Event {
                t,
                node: k,
                transition: Transition::Discharge,
            });
        }
        if fired > 1 {
            traj.simultaneous.push(t);
        }
        check_box(&x, t)?;
        if next_sample <= t {
            next_sample = t + cfg.sample_dt;
        }
        traj.samples.push(SimState {
            t,
            x: x.clone(),
            s: zero.clone(),
        });
    }
    if traj.samples.last().is_some_and(|l| l.t < t) {
        traj.samples.push(SimState { t, x, s: zero });
    }
    Ok(traj)
}

/// Pure discharge flow `x(t) = e^{g_s B t} x0` with switching disabled.
pub fn discharge_only(sys: &SystemMatrices, x0: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
    let op = FlowOp::new(sys, &vec![false; sys.n])?;
    Ok(op.eval(&op.modes(x0), t))
}
