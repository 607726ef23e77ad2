//! One-dimensional controlled diffusion `dX = b(t, X, mu, a) dt + dB` on a
//! truncated interval.
//!
//! The measure enters the coefficients only through statistics
//! `m_j = int phi_j dmu` with 1-Lipschitz `phi_j`, so the coefficients are
//! W1-Lipschitz in the measure with the constant read off their partials in
//! `m_j`. Densities live on a finite-volume grid, values on its nodes, and
//! controls are node tables with linear interpolation or formulas.

mod expr;
mod grid;
mod mfe;
mod particles;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub use expr::{Env, Expr, Func, Var};
pub use grid::{
    backward_solve, hjb_solve, hjb_verification, lipschitz_probe, mkv_flow, u_solve, GridFlow,
    HjbVerification, LipschitzRow, Policy, Scheme, ValueGrid,
};
pub use mfe::{
    concatenate, cont_dpp_probe, cont_mfe_gap, cont_set_value_sample, default_seeds, distinct_runs,
    mfe_fixed_point, ContGap, ContGenerator, ContSetValue, DppProbe, DppRow, FixedPointRun,
    SearchOptions, FIXED_POINT_TOL, SOLVER_TOL,
};
pub use particles::{
    cont_convergence_experiment, cont_nplayer_gap, particle_system, quantile_positions,
    sample_positions, w1_to_grid, ContConvergence, ContGapRow, ContMeasureRow, GapTransfer,
    ParticleEnsemble, ParticleReport, ParticleStart, SLOPE_WINDOW,
};

/// Uniform node grid on `[x_min, x_max]`; node `k` is also the center of
/// the finite-volume cell of width `h`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid1d {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
}

impl Grid1d {
    pub fn new(x_min: f64, x_max: f64, nx: usize) -> Result<Self> {
        if !(x_min < x_max) || nx < 3 {
            return Err(Error::InvalidSpec(
                "grid needs x_min < x_max and at least 3 nodes".into(),
            ));
        }
        Ok(Grid1d { x_min, x_max, nx })
    }

    pub fn h(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        self.x_min + k as f64 * self.h()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.nx).map(|k| self.node(k)).collect()
    }

    /// Linear interpolation of node values, constant outside the grid.
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        let s = (x - self.x_min) / self.h();
        if s <= 0.0 {
            return values[0];
        }
        let last = self.nx - 1;
        if s >= last as f64 {
            return values[last];
        }
        let k = s.floor() as usize;
        let w = s - k as f64;
        values[k] * (1.0 - w) + values[k + 1] * w
    }

    /// Grid with `2 nx - 1` nodes whose even nodes are these nodes.
    pub fn refined(&self) -> Grid1d {
        Grid1d {
            nx: 2 * self.nx - 1,
            ..*self
        }
    }
}

/// Initial law turned into cell masses.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialLaw {
    Gaussian {
        mean: f64,
        sd: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// Empirical measure of points, each moved to its nearest cell.
    Points(Vec<f64>),
    Masses(Vec<f64>),
}

impl InitialLaw {
    pub fn masses(&self, grid: &Grid1d) -> Result<Vec<f64>> {
        let h = grid.h();
        let from_cdf = |cdf: &dyn Fn(f64) -> f64| -> Vec<f64> {
            (0..grid.nx)
                .map(|k| {
                    let lo = if k == 0 {
                        0.0
                    } else {
                        cdf(grid.node(k) - h / 2.0)
                    };
                    let hi = if k + 1 == grid.nx {
                        1.0
                    } else {
                        cdf(grid.node(k) + h / 2.0)
                    };
                    (hi - lo).max(0.0)
                })
                .collect()
        };
        let masses = match self {
            InitialLaw::Gaussian { mean, sd } => {
                let n =
                    Normal::new(*mean, *sd).map_err(|e| Error::InvalidArgument(e.to_string()))?;
                from_cdf(&|x| n.cdf(x))
            }
            InitialLaw::Uniform { lo, hi } => {
                if !(lo < hi) {
                    return Err(Error::InvalidArgument("uniform law needs lo < hi".into()));
                }
                from_cdf(&|x| ((x - lo) / (hi - lo)).clamp(0.0, 1.0))
            }
            InitialLaw::Points(xs) => {
                if xs.is_empty() {
                    return Err(Error::Empty("initial points"));
                }
                let mut m = vec![0.0; grid.nx];
                for &x in xs {
                    let k = ((x - grid.x_min) / h)
                        .round()
                        .clamp(0.0, (grid.nx - 1) as f64) as usize;
                    m[k] += 1.0 / xs.len() as f64;
                }
                m
            }
            InitialLaw::Masses(m) => {
                if m.len() != grid.nx {
                    return Err(Error::DimensionMismatch {
                        expected: grid.nx,
                        got: m.len(),
                    });
                }
                m.clone()
            }
        };
        let total: f64 = masses.iter().sum();
        if masses.iter().any(|w| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidMeasure(format!("cell masses sum to {total}")));
        }
        Ok(masses.iter().map(|w| w / total).collect())
    }
}

/// Coefficient sources and grid parameters of a diffusion model.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionParts {
    pub name: String,
    pub horizon: f64,
    pub dt: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub action_box: (f64, f64),
    pub action_points: usize,
    pub drift: String,
    pub running: String,
    pub terminal: String,
    pub stats: Vec<String>,
    pub c0: f64,
    pub l0: f64,
}

/// Largest probed quantities of a coefficient set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeReport {
    pub bound: f64,
    pub lipschitz_x: f64,
    pub lipschitz_a: f64,
    pub lipschitz_mu: f64,
    pub stat_lipschitz: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionSpec {
    name: String,
    horizon: f64,
    dt: f64,
    steps: usize,
    grid: Grid1d,
    action_box: (f64, f64),
    actions: Vec<f64>,
    drift: Expr,
    running: Expr,
    terminal: Expr,
    stats: Vec<Expr>,
    stat_ranges: Vec<(f64, f64)>,
    c0: f64,
    l0: f64,
    probe: ProbeReport,
}

const PROBE_POINTS: usize = 4000;
const PROBE_STEP: f64 = 1e-6;

impl DiffusionSpec {
    pub fn new(parts: &DiffusionParts) -> Result<Self> {
        let bad = |m: String| Error::InvalidSpec(m);
        if !(parts.horizon > 0.0) || !(parts.dt > 0.0) {
            return Err(bad("horizon and dt must be positive".into()));
        }
        let steps = (parts.horizon / parts.dt).round() as usize;
        if steps == 0 || (steps as f64 * parts.dt - parts.horizon).abs() > 1e-9 * parts.horizon {
            return Err(bad(format!(
                "dt {} does not divide the horizon {}",
                parts.dt, parts.horizon
            )));
        }
        let grid = Grid1d::new(parts.x_min, parts.x_max, parts.nx)?;
        let (lo, hi) = parts.action_box;
        if !(lo <= hi) || parts.action_points == 0 || (lo < hi && parts.action_points < 2) {
            return Err(bad(
                "action box needs lo <= hi and at least two grid points".into(),
            ));
        }
        let actions: Vec<f64> = if lo == hi {
            vec![lo]
        } else {
            (0..parts.action_points)
                .map(|i| lo + (hi - lo) * i as f64 / (parts.action_points - 1) as f64)
                .collect()
        };
        let stats = parts
            .stats
            .iter()
            .map(|s| Expr::parse(s))
            .collect::<Result<Vec<_>>>()?;
        for (j, phi) in stats.iter().enumerate() {
            if phi.uses(Var::T) || phi.uses(Var::A) || phi.max_stat().is_some() {
                return Err(bad(format!("statistic {j} may only read x")));
            }
        }
        let drift = Expr::parse(&parts.drift)?;
        let running = Expr::parse(&parts.running)?;
        let terminal = Expr::parse(&parts.terminal)?;
        if terminal.uses(Var::T) || terminal.uses(Var::A) {
            return Err(bad(
                "terminal cost may only read x and the statistics".into()
            ));
        }
        for (what, e) in [
            ("drift", &drift),
            ("running", &running),
            ("terminal", &terminal),
        ] {
            if let Some(j) = e.max_stat() {
                if j >= stats.len() {
                    return Err(bad(format!(
                        "{what} reads m{j} but only {} statistics are declared",
                        stats.len()
                    )));
                }
            }
        }
        let nodes = grid.nodes();
        let stat_ranges = stats
            .iter()
            .map(|phi| {
                let vals = nodes.iter().map(|&x| {
                    phi.eval(&Env {
                        t: 0.0,
                        x,
                        a: 0.0,
                        m: &[],
                    })
                });
                vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                    (a.min(v), b.max(v))
                })
            })
            .collect();
        let mut spec = DiffusionSpec {
            name: parts.name.clone(),
            horizon: parts.horizon,
            dt: parts.dt,
            steps,
            grid,
            action_box: (lo, hi),
            actions,
            drift,
            running,
            terminal,
            stats,
            stat_ranges,
            c0: parts.c0,
            l0: parts.l0,
            probe: ProbeReport {
                bound: 0.0,
                lipschitz_x: 0.0,
                lipschitz_a: 0.0,
                lipschitz_mu: 0.0,
                stat_lipschitz: 0.0,
            },
        };
        spec.probe = spec.run_probe();
        let p = spec.probe;
        let slack = 1e-6;
        if !p.bound.is_finite() || p.bound > spec.c0 + slack {
            return Err(bad(format!(
                "coefficients reach {:.6} above the declared bound {}",
                p.bound, spec.c0
            )));
        }
        let lip = p.lipschitz_x.max(p.lipschitz_a).max(p.lipschitz_mu);
        if !lip.is_finite() || lip > spec.l0 * (1.0 + 1e-4) + slack {
            return Err(bad(format!(
                "coefficients have slope {lip:.6} above the declared Lipschitz constant {}",
                spec.l0
            )));
        }
        if p.stat_lipschitz > 1.0 + 1e-4 {
            return Err(bad(format!(
                "a statistic has slope {:.6} above 1",
                p.stat_lipschitz
            )));
        }
        Ok(spec)
    }

    fn run_probe(&self) -> ProbeReport {
        let mut rng = ChaCha8Rng::seed_from_u64(0x00d1_ff05);
        let (lo, hi) = self.action_box;
        let k = self.stats.len();
        let mut rep = ProbeReport {
            bound: 0.0,
            lipschitz_x: 0.0,
            lipschitz_a: 0.0,
            lipschitz_mu: 0.0,
            stat_lipschitz: 0.0,
        };
        let d = PROBE_STEP;
        let mut m = vec![0.0; k];
        let mut mp = vec![0.0; k];
        for _ in 0..PROBE_POINTS {
            let t = rng.random::<f64>() * self.horizon;
            let x = self.grid.x_min + rng.random::<f64>() * (self.grid.x_max - self.grid.x_min);
            let a = lo + rng.random::<f64>() * (hi - lo);
            for (mj, &(l, u)) in m.iter_mut().zip(&self.stat_ranges) {
                *mj = l + rng.random::<f64>() * (u - l);
            }
            let at = |e: &Expr, t: f64, x: f64, a: f64, m: &[f64]| e.eval(&Env { t, x, a, m });
            for e in [&self.drift, &self.running, &self.terminal] {
                let v = at(e, t, x, a, &m);
                rep.bound = rep.bound.max(if v.is_finite() {
                    v.abs()
                } else {
                    f64::INFINITY
                });
                let sx = (at(e, t, x + d, a, &m) - at(e, t, x - d, a, &m)).abs() / (2.0 * d);
                rep.lipschitz_x = rep.lipschitz_x.max(sx);
                if hi > lo {
                    let sa = (at(e, t, x, a + d, &m) - at(e, t, x, a - d, &m)).abs() / (2.0 * d);
                    rep.lipschitz_a = rep.lipschitz_a.max(sa);
                }
                let mut smu = 0.0;
                for j in 0..k {
                    mp.copy_from_slice(&m);
                    mp[j] += d;
                    let up = at(e, t, x, a, &mp);
                    mp[j] -= 2.0 * d;
                    let down = at(e, t, x, a, &mp);
                    smu += (up - down).abs() / (2.0 * d);
                }
                rep.lipschitz_mu = rep.lipschitz_mu.max(smu);
            }
            for phi in &self.stats {
                let s = (at(phi, 0.0, x + d, 0.0, &[]) - at(phi, 0.0, x - d, 0.0, &[])).abs()
                    / (2.0 * d);
                rep.stat_lipschitz = rep.stat_lipschitz.max(s);
            }
        }
        rep
    }

    /// Same coefficients on another grid and time step.
    pub fn with_grid(&self, nx: usize, dt: f64) -> Result<Self> {
        let mut parts = self.parts();
        parts.nx = nx;
        parts.dt = dt;
        DiffusionSpec::new(&parts)
    }

    /// Same coefficients with nodes halfway between the current ones added.
    pub fn refined(&self) -> Self {
        let mut out = self.clone();
        out.grid = self.grid.refined();
        out
    }

    pub fn parts(&self) -> DiffusionParts {
        DiffusionParts {
            name: self.name.clone(),
            horizon: self.horizon,
            dt: self.dt,
            x_min: self.grid.x_min,
            x_max: self.grid.x_max,
            nx: self.grid.nx,
            action_box: self.action_box,
            action_points: self.actions.len(),
            drift: self.drift.to_string(),
            running: self.running.to_string(),
            terminal: self.terminal.to_string(),
            stats: self.stats.iter().map(|e| e.to_string()).collect(),
            c0: self.c0,
            l0: self.l0,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    /// Number of time steps up to the horizon.
    pub fn steps(&self) -> usize {
        self.steps
    }
    pub fn grid(&self) -> &Grid1d {
        &self.grid
    }
    pub fn actions(&self) -> &[f64] {
        &self.actions
    }
    pub fn action_box(&self) -> (f64, f64) {
        self.action_box
    }
    pub fn c0(&self) -> f64 {
        self.c0
    }
    pub fn l0(&self) -> f64 {
        self.l0
    }
    pub fn probe(&self) -> ProbeReport {
        self.probe
    }
    pub fn stat_count(&self) -> usize {
        self.stats.len()
    }

    /// Step index of time `t`, which must lie on the time grid.
    pub fn time_index(&self, t: f64) -> Result<usize> {
        let n = (t / self.dt).round();
        if !(n >= 0.0)
            || n as usize > self.steps
            || (n * self.dt - t).abs() > 1e-9 * self.horizon.max(1.0)
        {
            return Err(Error::InvalidArgument(format!(
                "time {t} is not on the grid of step {}",
                self.dt
            )));
        }
        Ok(n as usize)
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    pub fn drift(&self, n: usize, x: f64, m: &[f64], a: f64) -> f64 {
        self.drift.eval(&Env {
            t: self.time(n),
            x,
            a,
            m,
        })
    }

    pub fn running(&self, n: usize, x: f64, m: &[f64], a: f64) -> f64 {
        self.running.eval(&Env {
            t: self.time(n),
            x,
            a,
            m,
        })
    }

    pub fn terminal(&self, x: f64, m: &[f64]) -> f64 {
        self.terminal.eval(&Env {
            t: self.horizon,
            x,
            a: 0.0,
            m,
        })
    }

    /// Statistics of a measure given by cell masses.
    pub fn stats_of_masses(&self, masses: &[f64]) -> Vec<f64> {
        self.stats
            .iter()
            .map(|phi| {
                masses
                    .iter()
                    .enumerate()
                    .filter(|(_, w)| **w != 0.0)
                    .map(|(k, w)| {
                        w * phi.eval(&Env {
                            t: 0.0,
                            x: self.grid.node(k),
                            a: 0.0,
                            m: &[],
                        })
                    })
                    .sum()
            })
            .collect()
    }

    /// Statistics of an empirical measure.
    pub fn stats_of_points(&self, xs: &[f64]) -> Vec<f64> {
        let n = xs.len() as f64;
        self.stats
            .iter()
            .map(|phi| {
                xs.iter()
                    .map(|&x| {
                        phi.eval(&Env {
                            t: 0.0,
                            x,
                            a: 0.0,
                            m: &[],
                        })
                    })
                    .sum::<f64>()
                    / n
            })
            .collect()
    }

    pub(crate) fn stats_into(&self, xs: &[f64], out: &mut [f64]) {
        let n = xs.len() as f64;
        for (o, phi) in out.iter_mut().zip(&self.stats) {
            *o = xs
                .iter()
                .map(|&x| {
                    phi.eval(&Env {
                        t: 0.0,
                        x,
                        a: 0.0,
                        m: &[],
                    })
                })
                .sum::<f64>()
                / n;
        }
    }

    pub fn clamp_action(&self, a: f64) -> f64 {
        a.clamp(self.action_box.0, self.action_box.1)
    }
}

/// Node table of actions over steps `start..` of length `dt`, linearly
/// interpolated in `x` and piecewise constant in time.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlTable {
    grid: Grid1d,
    dt: f64,
    start: usize,
    values: Vec<Vec<f64>>,
}

impl ControlTable {
    pub fn new(grid: Grid1d, dt: f64, start: usize, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.is_empty() || !(dt > 0.0) {
            return Err(Error::InvalidArgument(
                "control table needs a positive step and at least one row".into(),
            ));
        }
        if values.iter().any(|row| row.len() != grid.nx) {
            return Err(Error::DimensionMismatch {
                expected: grid.nx,
                got: values
                    .iter()
                    .map(|r| r.len())
                    .find(|l| *l != grid.nx)
                    .unwrap_or(0),
            });
        }
        Ok(ControlTable {
            grid,
            dt,
            start,
            values,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn start(&self) -> usize {
        self.start
    }
    pub fn end(&self) -> usize {
        self.start + self.values.len()
    }
    pub fn grid(&self) -> &Grid1d {
        &self.grid
    }
    pub fn row(&self, n: usize) -> &[f64] {
        &self.values[n - self.start]
    }
    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// Action at time `t` and position `x`.
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        let n = (t / self.dt + 1e-9).floor().max(0.0) as usize;
        let i = n.clamp(self.start, self.end() - 1) - self.start;
        self.grid.interpolate(&self.values[i], x)
    }

    /// Largest slope between neighboring nodes.
    pub fn slope(&self) -> f64 {
        let h = self.grid.h();
        self.values
            .iter()
            .flat_map(|row| row.windows(2).map(move |w| (w[1] - w[0]).abs() / h))
            .fold(0.0, f64::max)
    }

    /// Sup distance between two tables on the same grid and steps.
    pub fn distance(&self, other: &ControlTable) -> f64 {
        self.values
            .iter()
            .flatten()
            .zip(other.values.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Drift control `alpha(t, x, mu)`, clamped to the action box.
#[derive(Clone, Debug, PartialEq)]
pub enum ContControl {
    Constant(f64),
    Table(ControlTable),
    /// Formula in `t`, `x` and the statistics.
    Formula(Expr),
}

impl ContControl {
    pub fn formula(src: &str) -> Result<Self> {
        let e = Expr::parse(src)?;
        if e.uses(Var::A) {
            return Err(Error::InvalidArgument(
                "a control formula cannot read `a`".into(),
            ));
        }
        Ok(ContControl::Formula(e))
    }

    pub fn act(&self, spec: &DiffusionSpec, n: usize, x: f64, m: &[f64]) -> f64 {
        let a = match self {
            ContControl::Constant(a) => *a,
            ContControl::Table(t) => t.eval(spec.time(n), x),
            ContControl::Formula(e) => e.eval(&Env {
                t: spec.time(n),
                x,
                a: 0.0,
                m,
            }),
        };
        spec.clamp_action(a)
    }

    /// Slope bound in `x`: exact for tables, probed on the nodes for
    /// formulas.
    pub fn lipschitz_x(&self, spec: &DiffusionSpec) -> f64 {
        match self {
            ContControl::Constant(_) => 0.0,
            ContControl::Table(t) => t.slope(),
            ContControl::Formula(_) => {
                let g = spec.grid().refined();
                let h = g.h();
                let m: Vec<f64> = spec.stat_ranges.iter().map(|r| 0.5 * (r.0 + r.1)).collect();
                let mut worst: f64 = 0.0;
                for n in (0..spec.steps()).step_by((spec.steps() / 8).max(1)) {
                    let row: Vec<f64> = (0..g.nx)
                        .map(|k| self.act(spec, n, g.node(k), &m))
                        .collect();
                    for w in row.windows(2) {
                        worst = worst.max((w[1] - w[0]).abs() / h);
                    }
                }
                worst
            }
        }
    }

    /// Node table of the control on steps `start..steps` with the
    /// statistics frozen along `stats` (indexed from `start`).
    pub fn freeze(&self, spec: &DiffusionSpec, start: usize, stats: &[Vec<f64>]) -> ControlTable {
        let g = *spec.grid();
        let values = (start..spec.steps())
            .map(|n| {
                (0..g.nx)
                    .map(|k| self.act(spec, n, g.node(k), &stats[n - start]))
                    .collect()
            })
            .collect();
        ControlTable {
            grid: g,
            dt: spec.dt(),
            start,
            values,
        }
    }
}

fn parts(
    name: &str,
    drift: &str,
    running: &str,
    terminal: &str,
    c0: f64,
    l0: f64,
) -> DiffusionParts {
    DiffusionParts {
        name: name.into(),
        horizon: 1.0,
        dt: 0.02,
        x_min: -7.0,
        x_max: 7.0,
        nx: 701,
        action_box: (-1.0, 1.0),
        action_points: 9,
        drift: drift.into(),
        running: running.into(),
        terminal: terminal.into(),
        stats: vec!["clip(x, -4, 4)".into()],
        c0,
        l0,
    }
}

/// Mean-field-free control problem: `b = a`, quadratic effort, and a pull
/// toward the origin.
pub fn drift_parts() -> DiffusionParts {
    parts(
        "drift",
        "a",
        "0.5 * sq(a) + 0.1 * sq(tanh(x))",
        "0.5 * sq(tanh(x))",
        1.0,
        1.0,
    )
}

/// Players pay for distance to the population mean.
pub fn crowd_parts() -> DiffusionParts {
    parts(
        "crowd",
        "a",
        "0.5 * sq(a) + 0.25 * sq(tanh(x - m0))",
        "0.5 * sq(tanh(x - m0))",
        1.0,
        1.0,
    )
}

/// Players gain from ending on the side of the population mean; several
/// equilibria coexist.
pub fn coordination_parts() -> DiffusionParts {
    parts(
        "coordination",
        "a",
        "0.5 * sq(a)",
        "-2 * tanh(x) * tanh(2 * m0)",
        2.0,
        4.0,
    )
}

/// The three shipped scenarios by name.
pub fn builtin(name: &str) -> Result<DiffusionSpec> {
    let p = match name {
        "drift" => drift_parts(),
        "crowd" => crowd_parts(),
        "coordination" => coordination_parts(),
        _ => {
            return Err(Error::Scenario(format!(
                "unknown diffusion scenario `{name}`"
            )))
        }
    };
    DiffusionSpec::new(&p)
}

pub const BUILTIN_NAMES: [&str; 3] = ["drift", "crowd", "coordination"];
