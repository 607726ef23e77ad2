//! Tabulated coefficients and the built-in scenario families.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::action::{ActionSet, GridLocation};
use crate::error::{Error, Result};
use crate::game::{GameSpec, Model, PathModel, StateModel};
use crate::space::{PathSpace, StateSpace, TimeGrid};

/// Dense tables over `(t, x, grid index)`, optionally affine in `mu`.
///
/// Off-grid one-dimensional actions interpolate linearly between
/// neighbouring grid values; higher-dimensional actions use the nearest
/// grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct TableModel {
    d: usize,
    horizon: usize,
    actions: ActionSet,
    /// `[t][x][k][x']`
    q: Vec<f64>,
    /// `[t][x][k][x'][y]`, coefficient of `mu(y)`.
    q_mu: Option<Vec<f64>>,
    /// `[t][x][k]`
    f: Vec<f64>,
    /// `[t][x][k][y]`
    f_mu: Option<Vec<f64>>,
    /// `[x]`
    g: Vec<f64>,
    /// `[x][y]`
    g_mu: Option<Vec<f64>>,
}

pub struct TableParts {
    pub q: Vec<f64>,
    pub q_mu: Option<Vec<f64>>,
    pub f: Vec<f64>,
    pub f_mu: Option<Vec<f64>>,
    pub g: Vec<f64>,
    pub g_mu: Option<Vec<f64>>,
}

impl TableModel {
    pub fn new(d: usize, horizon: usize, actions: ActionSet, parts: TableParts) -> Result<Self> {
        let na = actions.len();
        let check = |name: &str, v: &Option<Vec<f64>>, len: usize| -> Result<()> {
            match v {
                Some(v) if v.len() != len => Err(Error::InvalidSpec(format!(
                    "{name} table has {} entries, expected {len}",
                    v.len()
                ))),
                _ => Ok(()),
            }
        };
        check("q", &Some(parts.q.clone()), horizon * d * na * d)?;
        check("q_mu", &parts.q_mu, horizon * d * na * d * d)?;
        check("F", &Some(parts.f.clone()), horizon * d * na)?;
        check("F_mu", &parts.f_mu, horizon * d * na * d)?;
        check("G", &Some(parts.g.clone()), d)?;
        check("G_mu", &parts.g_mu, d * d)?;
        Ok(Self {
            d,
            horizon,
            actions,
            q: parts.q,
            q_mu: parts.q_mu,
            f: parts.f,
            f_mu: parts.f_mu,
            g: parts.g,
            g_mu: parts.g_mu,
        })
    }

    fn q_row(&self, t: usize, x: usize, k: usize, mu: &[f64], out: &mut [f64]) {
        let d = self.d;
        let base = ((t * d + x) * self.actions.len() + k) * d;
        for (xp, o) in out.iter_mut().enumerate() {
            let mut v = self.q[base + xp];
            if let Some(qm) = &self.q_mu {
                let b = (base + xp) * d;
                v += qm[b..b + d].iter().zip(mu).map(|(c, m)| c * m).sum::<f64>();
            }
            *o = v;
        }
    }

    fn f_at(&self, t: usize, x: usize, k: usize, mu: &[f64]) -> f64 {
        let idx = (t * self.d + x) * self.actions.len() + k;
        let mut v = self.f[idx];
        if let Some(fm) = &self.f_mu {
            v += fm[idx * self.d..(idx + 1) * self.d]
                .iter()
                .zip(mu)
                .map(|(c, m)| c * m)
                .sum::<f64>();
        }
        v
    }
}

impl StateModel for TableModel {
    fn transition(&self, t: usize, x: usize, mu: &[f64], a: &[f64], out: &mut [f64]) {
        match self.actions.locate(a) {
            GridLocation::Exact(k) => self.q_row(t, x, k, mu, out),
            GridLocation::Between { lo, hi, w } => {
                let mut tmp = vec![0.0; self.d];
                self.q_row(t, x, lo, mu, out);
                self.q_row(t, x, hi, mu, &mut tmp);
                for (o, v) in out.iter_mut().zip(&tmp) {
                    *o = (1.0 - w) * *o + w * v;
                }
            }
        }
    }

    fn running_cost(&self, t: usize, x: usize, mu: &[f64], a: &[f64]) -> f64 {
        match self.actions.locate(a) {
            GridLocation::Exact(k) => self.f_at(t, x, k, mu),
            GridLocation::Between { lo, hi, w } => {
                (1.0 - w) * self.f_at(t, x, lo, mu) + w * self.f_at(t, x, hi, mu)
            }
        }
    }

    fn terminal_cost(&self, x: usize, mu: &[f64]) -> f64 {
        let mut v = self.g[x];
        if let Some(gm) = &self.g_mu {
            v += gm[x * self.d..(x + 1) * self.d]
                .iter()
                .zip(mu)
                .map(|(c, m)| c * m)
                .sum::<f64>();
        }
        v
    }
}

impl TableModel {
    pub fn horizon(&self) -> usize {
        self.horizon
    }
}

/// Two states `lo = 0`, `hi = 1`, horizon 2, actions in `[a0, 1 - a0]`.
/// The first step is a fair coin, the second moves to `lo` with
/// probability `a`; the running cost at time 1 is `a (1 - a)` and the
/// terminal cost is the terminal mass of `lo`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Example71 {
    pub a0: f64,
}

impl StateModel for Example71 {
    fn transition(&self, t: usize, _x: usize, _mu: &[f64], a: &[f64], out: &mut [f64]) {
        if t == 0 {
            out[0] = 0.5;
            out[1] = 0.5;
        } else {
            out[0] = a[0];
            out[1] = 1.0 - a[0];
        }
    }

    fn running_cost(&self, t: usize, _x: usize, _mu: &[f64], a: &[f64]) -> f64 {
        if t == 0 {
            0.0
        } else {
            a[0] * (1.0 - a[0])
        }
    }

    fn terminal_cost(&self, _x: usize, mu: &[f64]) -> f64 {
        mu[0]
    }
}

fn two_states() -> StateSpace {
    StateSpace::new(vec!["lo".into(), "hi".into()]).expect("distinct labels")
}

/// The two-state counterexample family; grid `{a0, 1/2, 1 - a0}`.
pub fn example71_spec(a0: f64) -> Result<GameSpec> {
    if !(a0 > 0.0 && a0 < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "a0 must lie in (0, 1/2), got {a0}"
        )));
    }
    GameSpec::new(
        format!("example71(a0={a0})"),
        two_states(),
        TimeGrid::new(2)?,
        ActionSet::interval(a0, 1.0 - a0, &[a0, 0.5, 1.0 - a0])?,
        Model::State(Arc::new(Example71 { a0 })),
        a0,
        1.0,
    )
}

/// Minority game with no pure equilibrium on its grid: a biased first step,
/// then `q(1, x, a; lo) = a`, and terminal cost equal to the mass at the
/// player's own terminal state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrowdAversion;

impl StateModel for CrowdAversion {
    fn transition(&self, t: usize, _x: usize, _mu: &[f64], a: &[f64], out: &mut [f64]) {
        if t == 0 {
            out[0] = 0.6;
            out[1] = 0.4;
        } else {
            out[0] = a[0];
            out[1] = 1.0 - a[0];
        }
    }

    fn running_cost(&self, _t: usize, _x: usize, _mu: &[f64], _a: &[f64]) -> f64 {
        0.0
    }

    fn terminal_cost(&self, x: usize, mu: &[f64]) -> f64 {
        mu[x]
    }
}

pub fn crowd_aversion_spec() -> Result<GameSpec> {
    GameSpec::new(
        "crowd_aversion",
        two_states(),
        TimeGrid::new(2)?,
        ActionSet::interval(0.2, 0.8, &[0.2, 0.8])?,
        Model::State(Arc::new(CrowdAversion)),
        0.2,
        1.0,
    )
}

/// Congestion game with measure-dependent moves:
/// `q(s, x, mu, a; lo) = 0.15 + 0.6 a + 0.1 mu(hi)`,
/// `F = 0.5 mu(x) + 0.5 (a - 1/2)^2`, `G = mu(x)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Congestion;

impl StateModel for Congestion {
    fn transition(&self, _t: usize, _x: usize, mu: &[f64], a: &[f64], out: &mut [f64]) {
        let p = 0.15 + 0.6 * a[0] + 0.1 * mu[1];
        out[0] = p;
        out[1] = 1.0 - p;
    }

    fn running_cost(&self, _t: usize, x: usize, mu: &[f64], a: &[f64]) -> f64 {
        0.5 * mu[x] + 0.5 * (a[0] - 0.5) * (a[0] - 0.5)
    }

    fn terminal_cost(&self, x: usize, mu: &[f64]) -> f64 {
        mu[x]
    }
}

pub fn congestion_spec() -> Result<GameSpec> {
    GameSpec::new(
        "congestion",
        two_states(),
        TimeGrid::new(2)?,
        ActionSet::interval(0.0, 1.0, &[0.0, 0.25, 0.5, 0.75, 1.0])?,
        Model::State(Arc::new(Congestion)),
        0.15,
        1.0,
    )
}

/// Path-dependent game: moves to `lo` with probability `a`, quadratic effort
/// cost, and a terminal cost charging state switches along the path plus
/// the terminal crowd at the player's final state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathSwitching {
    pub d: usize,
    pub horizon: usize,
}

impl PathSwitching {
    fn switches(&self, path: usize) -> usize {
        let states = PathSpace::new(self.d, self.horizon).states(path);
        states.windows(2).filter(|w| w[0] != w[1]).count()
    }
}

impl PathModel for PathSwitching {
    fn transition(&self, _t: usize, _path: usize, _mu: &[f64], a: &[f64], out: &mut [f64]) {
        out[0] = a[0];
        out[1] = 1.0 - a[0];
    }

    fn running_cost(&self, _t: usize, _path: usize, _mu: &[f64], a: &[f64]) -> f64 {
        0.5 * (a[0] - 0.5) * (a[0] - 0.5)
    }

    fn terminal_cost(&self, path: usize, mu: &[f64]) -> f64 {
        let space = PathSpace::new(self.d, self.horizon);
        let marginal = space.marginal(mu);
        0.4 * self.switches(path) as f64 / self.horizon as f64
            + 0.6 * marginal[space.last_state(path)]
    }
}

pub fn path_switching_spec(horizon: usize) -> Result<GameSpec> {
    GameSpec::new(
        format!("path_switching(T={horizon})"),
        two_states(),
        TimeGrid::new(horizon)?,
        ActionSet::interval(0.25, 0.75, &[0.25, 0.5, 0.75])?,
        Model::Path(Arc::new(PathSwitching { d: 2, horizon })),
        0.25,
        1.0,
    )
}

/// `F = 0`, `G = c`, uniform-leaning transitions moved by the action.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantCost {
    pub value: f64,
}

impl StateModel for ConstantCost {
    fn transition(&self, _t: usize, _x: usize, _mu: &[f64], a: &[f64], out: &mut [f64]) {
        out[0] = a[0];
        out[1] = 1.0 - a[0];
    }

    fn running_cost(&self, _t: usize, _x: usize, _mu: &[f64], _a: &[f64]) -> f64 {
        0.0
    }

    fn terminal_cost(&self, _x: usize, _mu: &[f64]) -> f64 {
        self.value
    }
}

pub fn constant_spec(value: f64, horizon: usize) -> Result<GameSpec> {
    GameSpec::new(
        format!("constant(c={value})"),
        two_states(),
        TimeGrid::new(horizon)?,
        ActionSet::interval(0.3, 0.7, &[0.3, 0.7])?,
        Model::State(Arc::new(ConstantCost { value })),
        0.3,
        value.abs(),
    )
}

/// Random tabulated game with `q >= c_q = 0.1` for every measure.
///
/// Base rows put at least `2 c_q` on each state; measure coefficients have
/// zero row sums and magnitude at most `c_q`, so the affine rows remain
/// probability vectors bounded below by `c_q`. Costs lie in `[-1, 1]`.
pub fn random_table_spec(
    seed: u64,
    d: usize,
    horizon: usize,
    n_actions: usize,
    mu_dependent: bool,
) -> Result<GameSpec> {
    let c_q = 0.1;
    if d == 0 || d as f64 * 2.0 * c_q > 1.0 + 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "random specs support 1 <= d <= 5, got {d}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid: Vec<f64> = if n_actions == 1 {
        vec![0.5]
    } else {
        (0..n_actions)
            .map(|k| k as f64 / (n_actions - 1) as f64)
            .collect()
    };
    let actions = ActionSet::interval(0.0, 1.0, &grid)?;
    let na = actions.len();
    let mut q = Vec::with_capacity(horizon * d * na * d);
    let mut q_mu = Vec::new();
    for _ in 0..horizon * d * na {
        let raw: Vec<f64> = (0..d).map(|_| rng.random::<f64>() + 1e-3).collect();
        let total: f64 = raw.iter().sum();
        let free = 1.0 - 2.0 * c_q * d as f64;
        for r in &raw {
            q.push(2.0 * c_q + free * r / total);
        }
        if mu_dependent {
            // one zero-sum perturbation vector per y, entries in [-c_q, c_q]
            let mut block = vec![0.0; d * d];
            for y in 0..d {
                let v: Vec<f64> = (0..d).map(|_| rng.random::<f64>() - 0.5).collect();
                let mean = v.iter().sum::<f64>() / d as f64;
                let centered: Vec<f64> = v.iter().map(|x| x - mean).collect();
                let scale = centered
                    .iter()
                    .fold(0.0f64, |m, x| m.max(x.abs()))
                    .max(1e-12);
                for (xp, c) in centered.iter().enumerate() {
                    block[xp * d + y] = c_q * 0.9 * c / scale;
                }
            }
            q_mu.extend(block);
        }
    }
    let mut f = Vec::new();
    let mut f_mu = Vec::new();
    for _ in 0..horizon * d * na {
        if mu_dependent {
            f.push(rng.random::<f64>() - 0.5);
            for _ in 0..d {
                f_mu.push(0.5 * (rng.random::<f64>() - 0.5));
            }
        } else {
            f.push(2.0 * rng.random::<f64>() - 1.0);
        }
    }
    let mut g = Vec::new();
    let mut g_mu = Vec::new();
    for _ in 0..d {
        if mu_dependent {
            g.push(rng.random::<f64>() - 0.5);
            for _ in 0..d {
                g_mu.push(0.5 * (rng.random::<f64>() - 0.5));
            }
        } else {
            g.push(2.0 * rng.random::<f64>() - 1.0);
        }
    }
    let parts = TableParts {
        q,
        q_mu: mu_dependent.then_some(q_mu),
        f,
        f_mu: mu_dependent.then_some(f_mu),
        g,
        g_mu: mu_dependent.then_some(g_mu),
    };
    let model = TableModel::new(d, horizon, actions.clone(), parts)?;
    GameSpec::new(
        format!("random(seed={seed},d={d},T={horizon},A={n_actions})"),
        StateSpace::numbered(d),
        TimeGrid::new(horizon)?,
        actions,
        Model::State(Arc::new(model)),
        c_q,
        1.0,
    )
}

/// Random path-dependent game on two states: the transition tilts with the
/// number of visits to `lo` so far and with the mass of the current path,
/// costs read the whole path.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomPathModel {
    d: usize,
    horizon: usize,
    /// per `t` probability of moving to `lo` at `a = 1/2`
    base: Vec<f64>,
    /// per `t` sensitivity to the action
    slope: Vec<f64>,
    visit_tilt: f64,
    mass_tilt: f64,
    run: Vec<f64>,
    term: Vec<f64>,
}

impl RandomPathModel {
    fn visits(&self, t: usize, path: usize) -> usize {
        PathSpace::new(self.d, t)
            .states(path)
            .iter()
            .filter(|&&x| x == 0)
            .count()
    }
}

impl PathModel for RandomPathModel {
    fn transition(&self, t: usize, path: usize, mu: &[f64], a: &[f64], out: &mut [f64]) {
        let frac = self.visits(t, path) as f64 / (t + 1) as f64;
        let p = self.base[t]
            + self.slope[t] * (a[0] - 0.5)
            + self.visit_tilt * (frac - 0.5)
            + self.mass_tilt * (mu[path] - 1.0 / mu.len() as f64);
        out[0] = p;
        out[1] = 1.0 - p;
    }

    fn running_cost(&self, t: usize, path: usize, mu: &[f64], a: &[f64]) -> f64 {
        let frac = self.visits(t, path) as f64 / (t + 1) as f64;
        self.run[t] * frac + 0.3 * (a[0] - 0.5) + 0.2 * mu[path]
    }

    fn terminal_cost(&self, path: usize, mu: &[f64]) -> f64 {
        let space = PathSpace::new(self.d, self.horizon);
        let m = space.marginal(mu);
        self.term[space.last_state(path)] * m[space.last_state(path)]
            + 0.2 * self.visits(self.horizon, path) as f64 / (self.horizon + 1) as f64
    }
}

/// Random path-dependent two-state game, `q >= 0.1`.
pub fn random_path_spec(seed: u64, horizon: usize, n_actions: usize) -> Result<GameSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let grid: Vec<f64> = if n_actions == 1 {
        vec![0.5]
    } else {
        (0..n_actions)
            .map(|k| 0.25 + 0.5 * k as f64 / (n_actions - 1) as f64)
            .collect()
    };
    let base: Vec<f64> = (0..horizon)
        .map(|_| 0.4 + 0.2 * rng.random::<f64>())
        .collect();
    let slope: Vec<f64> = (0..horizon).map(|_| 0.4 * rng.random::<f64>()).collect();
    let model = RandomPathModel {
        d: 2,
        horizon,
        base,
        slope,
        visit_tilt: 0.2 * (rng.random::<f64>() - 0.5),
        mass_tilt: 0.2 * (rng.random::<f64>() - 0.5),
        run: (0..horizon).map(|_| rng.random::<f64>() - 0.5).collect(),
        term: (0..2).map(|_| 1.6 * (rng.random::<f64>() - 0.5)).collect(),
    };
    GameSpec::new(
        format!("random_path(seed={seed},T={horizon},A={n_actions})"),
        two_states(),
        TimeGrid::new(horizon)?,
        ActionSet::interval(0.25, 0.75, &grid)?,
        Model::Path(Arc::new(model)),
        0.1,
        1.0,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::validate_game_spec;

    #[test]
    fn builtins_validate() {
        for spec in [
            example71_spec(0.25).unwrap(),
            crowd_aversion_spec().unwrap(),
            congestion_spec().unwrap(),
            path_switching_spec(2).unwrap(),
            path_switching_spec(3).unwrap(),
            constant_spec(0.7, 2).unwrap(),
        ] {
            let rep = validate_game_spec(&spec);
            assert!(rep.accepted(), "{}: {:?}", spec.name(), rep.failures);
        }
        let rep = validate_game_spec(&example71_spec(0.25).unwrap());
        assert_eq!(rep.c_q, 0.25);
        assert!((rep.min_q - 0.25).abs() < 1e-15);
    }

    #[test]
    fn random_specs_validate() {
        for seed in 0..20 {
            for mu_dep in [false, true] {
                let spec = random_table_spec(seed, 2 + (seed as usize % 2), 3, 3, mu_dep).unwrap();
                let rep = validate_game_spec(&spec);
                assert!(rep.accepted(), "{:?}", rep.failures);
            }
            let spec = random_path_spec(seed, 3, 2).unwrap();
            let rep = validate_game_spec(&spec);
            assert!(rep.accepted(), "{:?}", rep.failures);
        }
    }

    #[test]
    fn broken_tables_rejected() {
        let actions = ActionSet::interval(0.0, 1.0, &[0.5]).unwrap();
        let parts = TableParts {
            q: vec![0.6, 0.5, 0.5, 0.5],
            q_mu: None,
            f: vec![0.0, 0.0],
            f_mu: None,
            g: vec![0.0, 0.0],
            g_mu: None,
        };
        let model = TableModel::new(2, 1, actions.clone(), parts).unwrap();
        let spec = GameSpec::new(
            "broken",
            StateSpace::numbered(2),
            TimeGrid::new(1).unwrap(),
            actions.clone(),
            Model::State(Arc::new(model)),
            0.1,
            1.0,
        )
        .unwrap();
        let rep = validate_game_spec(&spec);
        assert!(!rep.accepted());
        assert!(rep.failures[0].contains("sum"), "{:?}", rep.failures);
        assert!((rep.max_row_sum_residual - 0.1).abs() < 1e-12);

        let parts = TableParts {
            q: vec![1.0, 0.0, 0.5, 0.5],
            q_mu: None,
            f: vec![0.0, 0.0],
            f_mu: None,
            g: vec![0.0, 0.0],
            g_mu: None,
        };
        let model = TableModel::new(2, 1, actions.clone(), parts).unwrap();
        let spec = GameSpec::new(
            "zero",
            StateSpace::numbered(2),
            TimeGrid::new(1).unwrap(),
            actions,
            Model::State(Arc::new(model)),
            0.1,
            1.0,
        )
        .unwrap();
        let rep = validate_game_spec(&spec);
        assert!(
            rep.failures.iter().any(|f| f.contains("positive")),
            "{:?}",
            rep.failures
        );
    }
}
