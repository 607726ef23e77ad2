//! Fokker-Planck and HJB solves on the node grid.
//!
//! Both use the same three-point stencil: central drift differences where
//! `|b| h <= 1` keeps the scheme monotone and upwind ones elsewhere. The
//! forward equation is in flux form with zero flux at both ends, so mass is
//! conserved; the backward equations use reflected ghost nodes.

use super::{ContControl, ControlTable, DiffusionSpec, Grid1d};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Scheme {
    #[default]
    Implicit,
    Explicit,
}

/// Cell masses and statistics along steps `start..=steps`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFlow {
    grid: Grid1d,
    start: usize,
    masses: Vec<Vec<f64>>,
    stats: Vec<Vec<f64>>,
}

impl GridFlow {
    pub fn start(&self) -> usize {
        self.start
    }
    pub fn end(&self) -> usize {
        self.start + self.masses.len() - 1
    }
    pub fn grid(&self) -> &Grid1d {
        &self.grid
    }
    pub fn at(&self, n: usize) -> &[f64] {
        &self.masses[n - self.start]
    }
    pub fn stats_at(&self, n: usize) -> &[f64] {
        &self.stats[n - self.start]
    }
    pub fn stats(&self) -> &[Vec<f64>] {
        &self.stats
    }

    pub fn moment(&self, n: usize, p: i32) -> f64 {
        self.at(n)
            .iter()
            .enumerate()
            .map(|(k, w)| w * self.grid.node(k).powi(p))
            .sum()
    }

    /// Largest deviation of the total mass from one.
    pub fn mass_error(&self) -> f64 {
        self.masses
            .iter()
            .map(|m| (m.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_mass(&self) -> f64 {
        self.masses
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest mass held by the two end cells.
    pub fn boundary_mass(&self) -> f64 {
        self.masses
            .iter()
            .map(|m| m[0] + m[m.len() - 1])
            .fold(0.0, f64::max)
    }
}

/// Stencil weights `(lo, hi)` of the drift-diffusion generator at speed `b`:
/// `L v_k = lo (v_{k-1} - v_k) + hi (v_{k+1} - v_k)`.
fn stencil(b: f64, h: f64) -> (f64, f64) {
    let diff = 0.5 / (h * h);
    if b.abs() * h <= 1.0 {
        (diff - b / (2.0 * h), diff + b / (2.0 * h))
    } else {
        (diff + (-b).max(0.0) / h, diff + b.max(0.0) / h)
    }
}

/// Solves `lower[k] y[k-1] + diag[k] y[k] + upper[k] y[k+1] = rhs[k]`.
fn tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &mut [f64],
    scratch: &mut Vec<f64>,
) {
    let n = diag.len();
    scratch.clear();
    scratch.resize(n, 0.0);
    let mut beta = diag[0];
    rhs[0] /= beta;
    for k in 1..n {
        scratch[k] = upper[k - 1] / beta;
        beta = diag[k] - lower[k] * scratch[k];
        rhs[k] = (rhs[k] - lower[k] * rhs[k - 1]) / beta;
    }
    for k in (0..n - 1).rev() {
        rhs[k] -= scratch[k + 1] * rhs[k + 1];
    }
}

/// Forward solve of the controlled Fokker-Planck equation from time `t`.
/// The drift at each step reads the statistics of the current density.
pub fn mkv_flow(
    spec: &DiffusionSpec,
    t: f64,
    mu0: &[f64],
    alpha: &ContControl,
    scheme: Scheme,
) -> Result<GridFlow> {
    let start = spec.time_index(t)?;
    flow_from(spec, start, mu0, alpha, scheme)
}

pub(crate) fn flow_from(
    spec: &DiffusionSpec,
    start: usize,
    mu0: &[f64],
    alpha: &ContControl,
    scheme: Scheme,
) -> Result<GridFlow> {
    let g = *spec.grid();
    if mu0.len() != g.nx {
        return Err(Error::DimensionMismatch {
            expected: g.nx,
            got: mu0.len(),
        });
    }
    let total: f64 = mu0.iter().sum();
    if mu0.iter().any(|w| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidMeasure(format!(
            "initial cell masses sum to {total}"
        )));
    }
    let (nx, h, dt) = (g.nx, g.h(), spec.dt());
    let mut masses = vec![mu0.to_vec()];
    let mut stats = vec![spec.stats_of_masses(mu0)];
    let (mut lower, mut diag, mut upper) = (vec![0.0; nx], vec![0.0; nx], vec![0.0; nx]);
    let mut scratch = Vec::new();
    // Interface i+1/2 carries mass right at rate flux[i].0 per unit in cell i
    // and left at rate flux[i].1 per unit in cell i+1.
    let mut flux = vec![(0.0, 0.0); nx - 1];
    for n in start..spec.steps() {
        let cur = masses.last().expect("nonempty");
        let m = stats.last().expect("nonempty");
        for (i, f) in flux.iter_mut().enumerate() {
            let x = g.node(i) + 0.5 * h;
            let b = spec.drift(n, x, m, alpha.act(spec, n, x, m));
            let (lo, hi) = stencil(b, h);
            *f = (hi, lo);
        }
        for k in 0..nx {
            let out_right = if k + 1 < nx { flux[k].0 } else { 0.0 };
            let out_left = if k > 0 { flux[k - 1].1 } else { 0.0 };
            diag[k] = -(out_right + out_left);
            upper[k] = if k + 1 < nx { flux[k].1 } else { 0.0 };
            lower[k] = if k > 0 { flux[k - 1].0 } else { 0.0 };
        }
        let next = match scheme {
            Scheme::Explicit => {
                let rate = diag.iter().map(|d| -d).fold(0.0, f64::max);
                let max_dt = 1.0 / rate;
                if dt > max_dt {
                    return Err(Error::Unstable { dt, max_dt });
                }
                (0..nx)
                    .map(|k| {
                        let mut v = cur[k] * (1.0 + dt * diag[k]);
                        if k > 0 {
                            v += dt * lower[k] * cur[k - 1];
                        }
                        if k + 1 < nx {
                            v += dt * upper[k] * cur[k + 1];
                        }
                        v
                    })
                    .collect::<Vec<f64>>()
            }
            Scheme::Implicit => {
                let lo: Vec<f64> = lower.iter().map(|v| -dt * v).collect();
                let up: Vec<f64> = upper.iter().map(|v| -dt * v).collect();
                let di: Vec<f64> = diag.iter().map(|v| 1.0 - dt * v).collect();
                let mut rhs = cur.clone();
                tridiagonal(&lo, &di, &up, &mut rhs, &mut scratch);
                rhs.iter_mut().for_each(|v| *v = v.max(0.0));
                rhs
            }
        };
        stats.push(spec.stats_of_masses(&next));
        masses.push(next);
    }
    Ok(GridFlow {
        grid: g,
        start,
        masses,
        stats,
    })
}

/// How actions are picked in a backward solve.
#[derive(Clone, Copy, Debug)]
pub enum Policy<'a> {
    /// Minimize over the action grid, plus the actions of `extra` if given.
    Optimize { extra: Option<&'a ContControl> },
    /// Follow a fixed control.
    Follow(&'a ContControl),
}

/// Node values on steps `start..=end` and, for optimized solves, the
/// minimizing actions on `start..end`.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueGrid {
    grid: Grid1d,
    dt: f64,
    start: usize,
    values: Vec<Vec<f64>>,
    actions: Vec<Vec<f64>>,
}

impl ValueGrid {
    pub fn start(&self) -> usize {
        self.start
    }
    pub fn end(&self) -> usize {
        self.start + self.values.len() - 1
    }
    pub fn at(&self, n: usize) -> &[f64] {
        &self.values[n - self.start]
    }
    pub fn initial(&self) -> &[f64] {
        &self.values[0]
    }
    pub fn value(&self, n: usize, x: f64) -> f64 {
        self.grid.interpolate(self.at(n), x)
    }

    /// Actions used on each step, as a table.
    pub fn feedback(&self) -> ControlTable {
        ControlTable::new(self.grid, self.dt, self.start, self.actions.clone())
            .expect("rows match the grid")
    }

    /// Largest node slope over all steps.
    pub fn slope(&self) -> f64 {
        let h = self.grid.h();
        self.values
            .iter()
            .flat_map(|row| row.windows(2).map(move |w| (w[1] - w[0]).abs() / h))
            .fold(0.0, f64::max)
    }

    pub fn sup(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .map(|v| v.abs())
            .fold(0.0, f64::max)
    }
}

const HOWARD_ITERS: usize = 50;
const TIE: f64 = 1e-13;

/// Backward solve from `end` (terminal values `terminal`, or the terminal
/// cost at the horizon) down to `start`, with the statistics of `flow`.
pub fn backward_solve(
    spec: &DiffusionSpec,
    flow: &GridFlow,
    start: usize,
    end: usize,
    terminal: Option<&[f64]>,
    policy: Policy,
) -> Result<ValueGrid> {
    let g = *spec.grid();
    if start < flow.start() || end > flow.end() || start > end {
        return Err(Error::InvalidArgument(format!(
            "backward solve on [{start}, {end}] outside the flow steps [{}, {}]",
            flow.start(),
            flow.end()
        )));
    }
    let (nx, h, dt) = (g.nx, g.h(), spec.dt());
    let last: Vec<f64> = match terminal {
        Some(v) if v.len() == nx => v.to_vec(),
        Some(v) => {
            return Err(Error::DimensionMismatch {
                expected: nx,
                got: v.len(),
            })
        }
        None => {
            if end != spec.steps() {
                return Err(Error::InvalidArgument(
                    "terminal values are required before the horizon".into(),
                ));
            }
            let m = flow.stats_at(end);
            (0..nx).map(|k| spec.terminal(g.node(k), m)).collect()
        }
    };
    let grid_actions = spec.actions();
    let mut values = vec![last];
    let mut actions = Vec::new();
    let mut scratch = Vec::new();
    let (mut lo_c, mut di_c, mut up_c) = (vec![0.0; nx], vec![0.0; nx], vec![0.0; nx]);
    // Per node: candidate actions with their stencil and running cost.
    let mut cands: Vec<Vec<(f64, f64, f64, f64)>> = vec![Vec::new(); nx];
    for n in (start..end).rev() {
        let m = flow.stats_at(n);
        let next = values.last().expect("nonempty").clone();
        for (k, c) in cands.iter_mut().enumerate() {
            c.clear();
            let x = g.node(k);
            let mut push = |a: f64| {
                let (lo, hi) = stencil(spec.drift(n, x, m, a), h);
                c.push((a, lo, hi, spec.running(n, x, m, a)));
            };
            match policy {
                Policy::Follow(alpha) => push(alpha.act(spec, n, x, m)),
                Policy::Optimize { extra } => {
                    if let Some(alpha) = extra {
                        push(alpha.act(spec, n, x, m));
                    }
                    for &a in grid_actions {
                        push(a);
                    }
                }
            }
        }
        let hamiltonian = |v: &[f64], k: usize, c: &(f64, f64, f64, f64)| {
            let left = if k > 0 { v[k - 1] } else { v[k] };
            let right = if k + 1 < nx { v[k + 1] } else { v[k] };
            c.1 * (left - v[k]) + c.2 * (right - v[k]) + c.3
        };
        let pick = |v: &[f64], k: usize, current: usize| {
            let c = &cands[k];
            let mut best = current;
            let mut best_val = hamiltonian(v, k, &c[current]);
            for (i, cand) in c.iter().enumerate() {
                let val = hamiltonian(v, k, cand);
                if val < best_val - TIE {
                    best = i;
                    best_val = val;
                }
            }
            best
        };
        let mut choice: Vec<usize> = (0..nx).map(|k| pick(&next, k, 0)).collect();
        let mut v = next.clone();
        for _ in 0..HOWARD_ITERS {
            for k in 0..nx {
                let c = &cands[k][choice[k]];
                let (lo, hi) = (
                    if k > 0 { c.1 } else { 0.0 },
                    if k + 1 < nx { c.2 } else { 0.0 },
                );
                lo_c[k] = -dt * lo;
                up_c[k] = -dt * hi;
                di_c[k] = 1.0 + dt * (lo + hi);
                v[k] = next[k] + dt * c.3;
            }
            tridiagonal(&lo_c, &di_c, &up_c, &mut v, &mut scratch);
            if matches!(policy, Policy::Follow(_)) {
                break;
            }
            let improved: Vec<usize> = (0..nx).map(|k| pick(&v, k, choice[k])).collect();
            if improved == choice {
                break;
            }
            choice = improved;
        }
        actions.push((0..nx).map(|k| cands[k][choice[k]].0).collect::<Vec<f64>>());
        values.push(v);
    }
    values.reverse();
    actions.reverse();
    Ok(ValueGrid {
        grid: g,
        dt,
        start,
        values,
        actions,
    })
}

/// Value function on `[s, T]` along `flow`, minimizing over the action grid.
pub fn hjb_solve(spec: &DiffusionSpec, flow: &GridFlow, s: f64) -> Result<ValueGrid> {
    let start = spec.time_index(s)?;
    backward_solve(
        spec,
        flow,
        start,
        spec.steps(),
        None,
        Policy::Optimize { extra: None },
    )
}

/// Cost of following `alpha` on `[s, T]` along `flow`.
pub fn u_solve(
    spec: &DiffusionSpec,
    flow: &GridFlow,
    s: f64,
    alpha: &ContControl,
) -> Result<ValueGrid> {
    let start = spec.time_index(s)?;
    backward_solve(spec, flow, start, spec.steps(), None, Policy::Follow(alpha))
}

/// Feedback check of an HJB solve against a grid with halved spacing and
/// halved time step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HjbVerification {
    /// Largest difference between the coarse and fine values at shared
    /// nodes and times.
    pub truncation: f64,
    /// Largest `|u - v|` on the coarse grid with `u` following the feedback.
    pub coarse_gap: f64,
    /// Largest `|u - v|` on the fine grid with `u` following the coarse
    /// feedback.
    pub fine_gap: f64,
    pub pass: bool,
}

/// Cell masses on the refined grid: half of each cell stays on its node and
/// a quarter goes to each new neighbor.
fn refine_masses(mu: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; 2 * mu.len() - 1];
    let last = out.len() - 1;
    for (k, w) in mu.iter().enumerate() {
        let c = 2 * k;
        out[c] += 0.5 * w;
        out[c.saturating_sub(1)] += 0.25 * w;
        out[(c + 1).min(last)] += 0.25 * w;
    }
    out
}

/// Solves the HJB along the flow of `alpha` on the grid of `spec` and on a
/// grid refined in space and time, and checks that the cost of following
/// the coarse feedback stays within twice the coarse-to-fine change of `v`.
pub fn hjb_verification(
    spec: &DiffusionSpec,
    t: f64,
    mu0: &[f64],
    alpha: &ContControl,
) -> Result<HjbVerification> {
    let flow = mkv_flow(spec, t, mu0, alpha, Scheme::Implicit)?;
    let coarse = hjb_solve(spec, &flow, t)?;
    let feedback = ContControl::Table(coarse.feedback());
    let u = u_solve(spec, &flow, t, &feedback)?;
    let mut fine_spec = spec.refined();
    fine_spec = fine_spec.with_grid(fine_spec.grid().nx, 0.5 * spec.dt())?;
    let fine_flow = mkv_flow(&fine_spec, t, &refine_masses(mu0), alpha, Scheme::Implicit)?;
    let v_fine = hjb_solve(&fine_spec, &fine_flow, t)?;
    let u_fine = u_solve(&fine_spec, &fine_flow, t, &feedback)?;
    let start = spec.time_index(t)?;
    let mut truncation: f64 = 0.0;
    let mut coarse_gap: f64 = 0.0;
    for n in start..=spec.steps() {
        for k in 0..spec.grid().nx {
            truncation = truncation.max((coarse.at(n)[k] - v_fine.at(2 * n)[2 * k]).abs());
            coarse_gap = coarse_gap.max((u.at(n)[k] - coarse.at(n)[k]).abs());
        }
    }
    let mut fine_gap: f64 = 0.0;
    for n in v_fine.start()..=v_fine.end() {
        for (a, b) in u_fine.at(n).iter().zip(v_fine.at(n)) {
            fine_gap = fine_gap.max((a - b).abs());
        }
    }
    Ok(HjbVerification {
        truncation,
        coarse_gap,
        fine_gap,
        pass: coarse_gap <= 2.0 * truncation + 1e-12 && fine_gap <= 2.0 * truncation + 1e-12,
    })
}

/// Value slopes along the flows of controls of increasing slope.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LipschitzRow {
    pub l: f64,
    pub control_slope: f64,
    pub value_slope: f64,
    pub cost_slope: f64,
    pub value_sup: f64,
    /// `L0 (1 + T) exp(L0 T)`, the synchronous-coupling bound on the value
    /// slope, which does not depend on `l`.
    pub slope_bound: f64,
    /// `C0 (T + 1)`.
    pub sup_bound: f64,
    pub pass: bool,
}

/// Runs the HJB along the flow of `x -> mid + w tanh(l x / w)` for each `l`
/// (slope exactly `l` at the origin) and records the value slopes.
pub fn lipschitz_probe(
    spec: &DiffusionSpec,
    t: f64,
    mu0: &[f64],
    ls: &[f64],
) -> Result<Vec<LipschitzRow>> {
    let (lo, hi) = spec.action_box();
    let (mid, w) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    let horizon = spec.horizon() - t;
    let slope_bound = spec.l0() * (1.0 + horizon) * (spec.l0() * horizon).exp();
    let sup_bound = spec.c0() * (horizon + 1.0);
    ls.iter()
        .map(|&l| {
            let alpha = if w > 0.0 {
                ContControl::formula(&format!("{mid} + {w} * tanh({} * x)", l / w))?
            } else {
                ContControl::Constant(mid)
            };
            let flow = mkv_flow(spec, t, mu0, &alpha, Scheme::Implicit)?;
            let v = hjb_solve(spec, &flow, t)?;
            let u = u_solve(spec, &flow, t, &alpha)?;
            let value_slope = v.slope();
            let value_sup = v.sup();
            Ok(LipschitzRow {
                l,
                control_slope: alpha.lipschitz_x(spec),
                value_slope,
                cost_slope: u.slope(),
                value_sup,
                slope_bound,
                sup_bound,
                pass: value_slope <= slope_bound * (1.0 + 1e-3) && value_sup <= sup_bound + 1e-9,
            })
        })
        .collect()
}
