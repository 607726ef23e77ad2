//! Game specifications: coefficients `q`, `F`, `G`, bounds and validation.

use std::fmt;
use std::sync::Arc;

use crate::action::{ActionKind, ActionSet};
use crate::error::{Error, Result};
use crate::measure::SIMPLEX_TOL;
use crate::space::{PathSpace, StateSpace, TimeGrid};

/// Coefficients reading the current state and the marginal law `mu` on `S`.
pub trait StateModel: Send + Sync + fmt::Debug {
    /// Writes `q(t, x, mu, a; .)` into `out` (length `d`).
    fn transition(&self, t: usize, x: usize, mu: &[f64], a: &[f64], out: &mut [f64]);
    fn running_cost(&self, t: usize, x: usize, mu: &[f64], a: &[f64]) -> f64;
    fn terminal_cost(&self, x: usize, mu: &[f64]) -> f64;
}

/// Coefficients reading whole stopped paths and path measures.
///
/// `path` indexes `X_t` and `mu` is a measure on `X_t`; the terminal cost
/// reads `X_T`.
pub trait PathModel: Send + Sync + fmt::Debug {
    fn transition(&self, t: usize, path: usize, mu: &[f64], a: &[f64], out: &mut [f64]);
    fn running_cost(&self, t: usize, path: usize, mu: &[f64], a: &[f64]) -> f64;
    fn terminal_cost(&self, path: usize, mu: &[f64]) -> f64;
}

#[derive(Clone, Debug)]
pub enum Model {
    State(Arc<dyn StateModel>),
    Path(Arc<dyn PathModel>),
}

/// Enumeration and memory guards.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Limits {
    /// Largest admissible `|X_T|`; 32 allows `T <= 4` with two states.
    pub max_paths: usize,
    /// Largest number of candidate controls enumerated by set-value routines.
    pub max_controls: f64,
    /// Largest support of a global measure built from a relaxed control.
    pub max_lambda_atoms: f64,
    /// Largest `d^N` for the exact product chain.
    pub max_product_states: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_paths: 32,
            max_controls: 2.0e6,
            max_lambda_atoms: 1.0e5,
            max_product_states: 4096,
        }
    }
}

/// A finite mean field game `(T, S, A, q, F, G)` with its certified constants.
#[derive(Clone, Debug)]
pub struct GameSpec {
    name: String,
    states: StateSpace,
    time: TimeGrid,
    actions: ActionSet,
    model: Model,
    c_q: f64,
    c0: f64,
    limits: Limits,
}

impl GameSpec {
    pub fn new(
        name: impl Into<String>,
        states: StateSpace,
        time: TimeGrid,
        actions: ActionSet,
        model: Model,
        c_q: f64,
        c0: f64,
    ) -> Result<Self> {
        if !(c_q > 0.0) || !c_q.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "c_q must be positive, got {c_q}"
            )));
        }
        if !(c0 >= 0.0) || !c0.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "C0 must be finite and nonnegative, got {c0}"
            )));
        }
        let spec = Self {
            name: name.into(),
            states,
            time,
            actions,
            model,
            c_q,
            c0,
            limits: Limits::default(),
        };
        if spec.is_path_dependent() {
            spec.check_path_cap()?;
        }
        Ok(spec)
    }

    pub fn with_limits(mut self, limits: Limits) -> Result<Self> {
        self.limits = limits;
        if self.is_path_dependent() {
            self.check_path_cap()?;
        }
        Ok(self)
    }

    pub fn with_actions(mut self, actions: ActionSet) -> Result<Self> {
        if actions.dim() != self.actions.dim() {
            return Err(Error::InvalidSpec(
                "replacement action set changes dimension".into(),
            ));
        }
        self.actions = actions;
        Ok(self)
    }

    /// Same action box with `n` equispaced grid points per coordinate.
    pub fn with_grid_resolution(self, n: usize) -> Result<Self> {
        let a = self.actions.with_resolution(n)?;
        self.with_actions(a)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn states(&self) -> &StateSpace {
        &self.states
    }

    pub fn d(&self) -> usize {
        self.states.d()
    }

    pub fn horizon(&self) -> usize {
        self.time.horizon()
    }

    pub fn time_grid(&self) -> TimeGrid {
        self.time
    }

    pub fn actions(&self) -> &ActionSet {
        &self.actions
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn c_q(&self) -> f64 {
        self.c_q
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn limits(&self) -> Limits {
        self.limits
    }

    pub fn is_path_dependent(&self) -> bool {
        matches!(self.model, Model::Path(_))
    }

    pub fn check_time(&self, t: usize) -> Result<()> {
        self.time.check(t)
    }

    pub fn state_model(&self, what: &'static str) -> Result<&dyn StateModel> {
        match &self.model {
            Model::State(m) => Ok(m.as_ref()),
            Model::Path(_) => Err(Error::PathDependent(what)),
        }
    }

    /// Rejects path computations whose `|X_T|` exceeds the configured cap.
    pub fn check_path_cap(&self) -> Result<()> {
        let paths = (self.d() as f64).powi(self.horizon() as i32 + 1);
        crate::error::guard(
            format!(
                "path space X_T with d = {}, T = {}",
                self.d(),
                self.horizon()
            ),
            paths,
            self.limits.max_paths as f64,
        )
    }

    pub fn path_space(&self, t: usize) -> PathSpace {
        PathSpace::new(self.d(), t)
    }

    /// Evaluation context for path computations at time `t` against `mu` on `X_t`.
    pub(crate) fn path_step<'a>(&'a self, t: usize, mu: &'a [f64]) -> PathStep<'a> {
        let space = self.path_space(t);
        let marginal = match self.model {
            Model::State(_) => space.marginal(mu),
            Model::Path(_) => Vec::new(),
        };
        PathStep {
            model: &self.model,
            space,
            t,
            mu,
            marginal,
        }
    }

    /// Bound `C0 (T + 1)` on any cost functional.
    pub fn cost_bound(&self) -> f64 {
        self.c0 * (self.horizon() as f64 + 1.0)
    }
}

pub(crate) struct PathStep<'a> {
    model: &'a Model,
    space: PathSpace,
    t: usize,
    mu: &'a [f64],
    marginal: Vec<f64>,
}

impl PathStep<'_> {
    pub fn transition(&self, path: usize, a: &[f64], out: &mut [f64]) {
        match self.model {
            Model::State(m) => {
                m.transition(self.t, self.space.last_state(path), &self.marginal, a, out)
            }
            Model::Path(m) => m.transition(self.t, path, self.mu, a, out),
        }
    }

    pub fn running_cost(&self, path: usize, a: &[f64]) -> f64 {
        match self.model {
            Model::State(m) => {
                m.running_cost(self.t, self.space.last_state(path), &self.marginal, a)
            }
            Model::Path(m) => m.running_cost(self.t, path, self.mu, a),
        }
    }

    /// Terminal cost, meaningful when this step is the horizon.
    pub fn terminal_cost(&self, path: usize) -> f64 {
        match self.model {
            Model::State(m) => m.terminal_cost(self.space.last_state(path), &self.marginal),
            Model::Path(m) => m.terminal_cost(path, self.mu),
        }
    }
}

/// Outcome of [`validate_game_spec`].
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub max_row_sum_residual: f64,
    pub min_q: f64,
    pub c_q: f64,
    pub max_abs_running: f64,
    pub max_abs_terminal: f64,
    pub c0: f64,
    /// Largest observed `|q(mu) - q(nu)|_1 / W1(mu, nu)` over probe pairs.
    pub empirical_q_modulus: f64,
    /// Largest observed `|F(mu) - F(nu)| / W1(mu, nu)` over probe pairs.
    pub empirical_cost_modulus: f64,
    pub probes: usize,
    pub failures: Vec<String>,
}

impl ValidationReport {
    pub fn accepted(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks row sums, `min q >= c_q > 0` and `|F|, |G| <= C0` on a
/// deterministic probe set: all grid actions plus box corners and midpoints,
/// every time and state (or path), and measures made of simplex vertices,
/// the uniform law and vertex/uniform mixtures. Never fails; problems are
/// listed in the report.
pub fn validate_game_spec(spec: &GameSpec) -> ValidationReport {
    let d = spec.d();
    let horizon = spec.horizon();
    let actions = probe_actions(spec.actions());
    let mut rep = ValidationReport {
        max_row_sum_residual: 0.0,
        min_q: f64::INFINITY,
        c_q: spec.c_q(),
        max_abs_running: 0.0,
        max_abs_terminal: 0.0,
        c0: spec.c0(),
        empirical_q_modulus: 0.0,
        empirical_cost_modulus: 0.0,
        probes: 0,
        failures: Vec::new(),
    };
    if spec.c_q() * d as f64 > 1.0 + SIMPLEX_TOL {
        rep.failures.push(format!(
            "c_q = {} cannot bound a {d}-state probability row",
            spec.c_q()
        ));
    }
    let mut row = vec![0.0; d];
    let mut row2 = vec![0.0; d];
    for t in 0..=horizon {
        let space = spec.path_space(if spec.is_path_dependent() { t } else { 0 });
        let n_points = if spec.is_path_dependent() {
            space.len()
        } else {
            d
        };
        let measures = probe_measures(n_points);
        for mu in &measures {
            let step = spec.path_step_generic(t, mu);
            for p in 0..n_points {
                if t == horizon {
                    let g = step.terminal(p);
                    rep.probes += 1;
                    rep.max_abs_terminal = rep.max_abs_terminal.max(g.abs());
                    if !g.is_finite() {
                        rep.failures
                            .push(format!("terminal cost not finite at {p}"));
                    }
                    continue;
                }
                for a in &actions {
                    step.transition(p, a, &mut row);
                    rep.probes += 1;
                    let sum: f64 = row.iter().sum();
                    rep.max_row_sum_residual = rep.max_row_sum_residual.max((sum - 1.0).abs());
                    for &v in &row {
                        rep.min_q = rep.min_q.min(v);
                    }
                    let f = step.running(p, a);
                    rep.max_abs_running = rep.max_abs_running.max(f.abs());
                }
            }
        }
        if t < horizon {
            for (i, mu) in measures.iter().enumerate() {
                for nu in measures.iter().skip(i + 1) {
                    let w: f64 = mu.iter().zip(nu).map(|(a, b)| (a - b).abs()).sum();
                    if w <= 0.0 {
                        continue;
                    }
                    let s1 = spec.path_step_generic(t, mu);
                    let s2 = spec.path_step_generic(t, nu);
                    for p in 0..n_points {
                        for a in &actions {
                            s1.transition(p, a, &mut row);
                            s2.transition(p, a, &mut row2);
                            let dq: f64 = row.iter().zip(&row2).map(|(a, b)| (a - b).abs()).sum();
                            rep.empirical_q_modulus = rep.empirical_q_modulus.max(dq / w);
                            let df = (s1.running(p, a) - s2.running(p, a)).abs();
                            rep.empirical_cost_modulus = rep.empirical_cost_modulus.max(df / w);
                        }
                    }
                }
            }
        }
    }
    if rep.max_row_sum_residual > SIMPLEX_TOL {
        rep.failures.push(format!(
            "transition rows do not sum to one: residual {:.3e}",
            rep.max_row_sum_residual
        ));
    }
    if rep.min_q <= 0.0 {
        rep.failures.push(format!(
            "transition has a non-positive entry {:.3e}; q must be positive",
            rep.min_q
        ));
    } else if rep.min_q < spec.c_q() - SIMPLEX_TOL {
        rep.failures.push(format!(
            "min q = {:.6} below the certified c_q = {:.6}",
            rep.min_q,
            spec.c_q()
        ));
    }
    if rep.max_abs_running > spec.c0() + SIMPLEX_TOL {
        rep.failures.push(format!(
            "|F| reaches {:.6} above C0 = {:.6}",
            rep.max_abs_running,
            spec.c0()
        ));
    }
    if rep.max_abs_terminal > spec.c0() + SIMPLEX_TOL {
        rep.failures.push(format!(
            "|G| reaches {:.6} above C0 = {:.6}",
            rep.max_abs_terminal,
            spec.c0()
        ));
    }
    rep
}

impl GameSpec {
    /// Uniform evaluation for validation: state models are probed on
    /// measures over `S`, path models on measures over `X_t`.
    fn path_step_generic<'a>(&'a self, t: usize, mu: &'a [f64]) -> ProbeStep<'a> {
        ProbeStep { spec: self, t, mu }
    }
}

struct ProbeStep<'a> {
    spec: &'a GameSpec,
    t: usize,
    mu: &'a [f64],
}

impl ProbeStep<'_> {
    fn transition(&self, p: usize, a: &[f64], out: &mut [f64]) {
        match &self.spec.model {
            Model::State(m) => m.transition(self.t, p, self.mu, a, out),
            Model::Path(m) => m.transition(self.t, p, self.mu, a, out),
        }
    }

    fn running(&self, p: usize, a: &[f64]) -> f64 {
        match &self.spec.model {
            Model::State(m) => m.running_cost(self.t, p, self.mu, a),
            Model::Path(m) => m.running_cost(self.t, p, self.mu, a),
        }
    }

    fn terminal(&self, p: usize) -> f64 {
        match &self.spec.model {
            Model::State(m) => m.terminal_cost(p, self.mu),
            Model::Path(m) => m.terminal_cost(p, self.mu),
        }
    }
}

fn probe_actions(actions: &ActionSet) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = actions.points().map(|p| p.to_vec()).collect();
    if let ActionKind::Box { lower, upper } = actions.kind() {
        let mid: Vec<f64> = lower
            .iter()
            .zip(upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect();
        out.push(lower.clone());
        out.push(upper.clone());
        out.push(mid);
    }
    out
}

fn probe_measures(n: usize) -> Vec<Vec<f64>> {
    let uniform = vec![1.0 / n as f64; n];
    let mut out = vec![uniform.clone()];
    for y in 0..n {
        let mut v = vec![0.0; n];
        v[y] = 1.0;
        out.push(v.clone());
        out.push(v.iter().zip(&uniform).map(|(a, b)| 0.5 * (a + b)).collect());
    }
    out
}
