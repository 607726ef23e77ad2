//! TOML scenario files. Unknown keys are rejected.
//!
//! ```toml
//! name = "congestion"
//!
//! [game]
//! builtin = "congestion"     # or "table" with a [game.table] section
//! initial = [0.5, 0.5]
//!
//! [diffusion]
//! builtin = "crowd"          # explicit keys override the builtin
//! control = "-0.5 * tanh(x - m0)"
//! initial = { kind = "gaussian", mean = 0.0, sd = 1.0 }
//! ```

use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;

use crate::action::ActionSet;
use crate::diffusion::{self, ContControl, DiffusionSpec, InitialLaw};
use crate::error::{Error, Result};
use crate::game::{GameSpec, Limits, Model};
use crate::measure::SimplexMeasure;
use crate::models::{self, TableModel, TableParts};
use crate::space::{StateSpace, TimeGrid};

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub description: Option<String>,
    pub game: Option<GameSection>,
    pub diffusion: Option<DiffusionSection>,
    pub limits: Option<LimitsSection>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GameSection {
    /// `example71`, `crowd_aversion`, `congestion`, `path_switching`,
    /// `constant`, `random`, `random_path` or `table`.
    pub builtin: String,
    pub a0: Option<f64>,
    pub horizon: Option<usize>,
    pub value: Option<f64>,
    pub seed: Option<u64>,
    pub states: Option<usize>,
    pub actions: Option<usize>,
    pub mu_dependent: Option<bool>,
    pub initial: Option<Vec<f64>>,
    pub table: Option<TableSection>,
}

/// Dense coefficient tables in row-major order over
/// `(t, x, action index, x')` for `q`, `(t, x, action index)` for `f` and
/// `x` for `g`; the `_mu` tables append a trailing measure index.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TableSection {
    pub states: Vec<String>,
    pub horizon: usize,
    pub action_box: [f64; 2],
    pub action_grid: Vec<f64>,
    pub c_q: f64,
    pub c0: f64,
    pub q: Vec<f64>,
    pub q_mu: Option<Vec<f64>>,
    pub f: Vec<f64>,
    pub f_mu: Option<Vec<f64>>,
    pub g: Vec<f64>,
    pub g_mu: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DiffusionSection {
    pub builtin: Option<String>,
    pub horizon: Option<f64>,
    pub dt: Option<f64>,
    pub domain: Option<[f64; 2]>,
    pub nx: Option<usize>,
    pub action_box: Option<[f64; 2]>,
    pub action_points: Option<usize>,
    pub drift: Option<String>,
    pub running: Option<String>,
    pub terminal: Option<String>,
    pub stats: Option<Vec<String>>,
    pub c0: Option<f64>,
    pub l0: Option<f64>,
    pub control: Option<String>,
    pub initial: Option<InitialSection>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialSection {
    Gaussian { mean: f64, sd: f64 },
    Uniform { lo: f64, hi: f64 },
    Points { points: Vec<f64> },
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LimitsSection {
    pub max_paths: Option<usize>,
    pub max_controls: Option<f64>,
    pub max_lambda_atoms: Option<f64>,
    pub max_product_states: Option<usize>,
}

/// Diffusion part of a loaded scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionScenario {
    pub spec: DiffusionSpec,
    pub initial: InitialLaw,
    pub control: ContControl,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub description: Option<String>,
    pub game: Option<GameSpec>,
    pub initial: Option<SimplexMeasure>,
    pub diffusion: Option<DiffusionScenario>,
}

fn need<T>(v: Option<T>, what: &str, builtin: &str) -> Result<T> {
    v.ok_or_else(|| Error::Scenario(format!("`{builtin}` needs `{what}`")))
}

fn build_table(t: TableSection) -> Result<GameSpec> {
    let actions = ActionSet::interval(t.action_box[0], t.action_box[1], &t.action_grid)?;
    let d = t.states.len();
    let model = TableModel::new(
        d,
        t.horizon,
        actions.clone(),
        TableParts {
            q: t.q,
            q_mu: t.q_mu,
            f: t.f,
            f_mu: t.f_mu,
            g: t.g,
            g_mu: t.g_mu,
        },
    )?;
    GameSpec::new(
        "table",
        StateSpace::new(t.states)?,
        TimeGrid::new(t.horizon)?,
        actions,
        Model::State(Arc::new(model)),
        t.c_q,
        t.c0,
    )
}

fn build_game(g: GameSection) -> Result<(GameSpec, Option<Vec<f64>>)> {
    let b = g.builtin.as_str();
    let spec = match b {
        "example71" => models::example71_spec(need(g.a0, "a0", b)?)?,
        "crowd_aversion" => models::crowd_aversion_spec()?,
        "congestion" => models::congestion_spec()?,
        "path_switching" => models::path_switching_spec(need(g.horizon, "horizon", b)?)?,
        "constant" => {
            models::constant_spec(need(g.value, "value", b)?, need(g.horizon, "horizon", b)?)?
        }
        "random" => models::random_table_spec(
            need(g.seed, "seed", b)?,
            need(g.states, "states", b)?,
            need(g.horizon, "horizon", b)?,
            need(g.actions, "actions", b)?,
            g.mu_dependent.unwrap_or(false),
        )?,
        "random_path" => models::random_path_spec(
            need(g.seed, "seed", b)?,
            need(g.horizon, "horizon", b)?,
            need(g.actions, "actions", b)?,
        )?,
        "table" => build_table(need(g.table, "table", b)?)?,
        other => return Err(Error::Scenario(format!("unknown game builtin `{other}`"))),
    };
    Ok((spec, g.initial))
}

fn build_diffusion(s: DiffusionSection) -> Result<DiffusionScenario> {
    let mut parts = match s.builtin.as_deref() {
        Some("drift") => diffusion::drift_parts(),
        Some("crowd") => diffusion::crowd_parts(),
        Some("coordination") => diffusion::coordination_parts(),
        Some(other) => {
            return Err(Error::Scenario(format!(
                "unknown diffusion builtin `{other}`"
            )))
        }
        None => {
            let missing = [
                (s.drift.is_none(), "drift"),
                (s.running.is_none(), "running"),
                (s.terminal.is_none(), "terminal"),
                (s.c0.is_none(), "c0"),
                (s.l0.is_none(), "l0"),
            ];
            if let Some((_, what)) = missing.iter().find(|m| m.0) {
                return Err(Error::Scenario(format!(
                    "diffusion without a builtin needs `{what}`"
                )));
            }
            let mut p = diffusion::drift_parts();
            p.name = "custom".into();
            p.stats = Vec::new();
            p
        }
    };
    if let Some(v) = s.horizon {
        parts.horizon = v;
    }
    if let Some(v) = s.dt {
        parts.dt = v;
    }
    if let Some([lo, hi]) = s.domain {
        parts.x_min = lo;
        parts.x_max = hi;
    }
    if let Some(v) = s.nx {
        parts.nx = v;
    }
    if let Some([lo, hi]) = s.action_box {
        parts.action_box = (lo, hi);
    }
    if let Some(v) = s.action_points {
        parts.action_points = v;
    }
    if let Some(v) = s.drift {
        parts.drift = v;
    }
    if let Some(v) = s.running {
        parts.running = v;
    }
    if let Some(v) = s.terminal {
        parts.terminal = v;
    }
    if let Some(v) = s.stats {
        parts.stats = v;
    }
    if let Some(v) = s.c0 {
        parts.c0 = v;
    }
    if let Some(v) = s.l0 {
        parts.l0 = v;
    }
    let spec = DiffusionSpec::new(&parts)?;
    let initial = match s.initial {
        None => InitialLaw::Gaussian { mean: 0.0, sd: 1.0 },
        Some(InitialSection::Gaussian { mean, sd }) => InitialLaw::Gaussian { mean, sd },
        Some(InitialSection::Uniform { lo, hi }) => InitialLaw::Uniform { lo, hi },
        Some(InitialSection::Points { points }) => InitialLaw::Points(points),
    };
    initial.masses(spec.grid())?;
    let control = match s.control {
        Some(src) => ContControl::formula(&src)?,
        None => ContControl::Constant(0.0),
    };
    Ok(DiffusionScenario {
        spec,
        initial,
        control,
    })
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
    let mut game = None;
    let mut initial = None;
    if let Some(g) = file.game {
        let (mut spec, init) = build_game(g)?;
        if let Some(l) = &file.limits {
            let d = Limits::default();
            spec = spec.with_limits(Limits {
                max_paths: l.max_paths.unwrap_or(d.max_paths),
                max_controls: l.max_controls.unwrap_or(d.max_controls),
                max_lambda_atoms: l.max_lambda_atoms.unwrap_or(d.max_lambda_atoms),
                max_product_states: l.max_product_states.unwrap_or(d.max_product_states),
            })?;
        }
        if let Some(w) = init {
            let mu = SimplexMeasure::new(w)?;
            if mu.len() != spec.d() {
                return Err(Error::DimensionMismatch {
                    expected: spec.d(),
                    got: mu.len(),
                });
            }
            initial = Some(mu);
        }
        game = Some(spec);
    }
    let diffusion = file.diffusion.map(build_diffusion).transpose()?;
    if game.is_none() && diffusion.is_none() {
        return Err(Error::Scenario(
            "a scenario needs a [game] or a [diffusion] section".into(),
        ));
    }
    Ok(Scenario {
        name: file.name,
        description: file.description,
        game,
        initial,
        diffusion,
    })
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Scenario(format!("{}: {e}", path.display())))?;
    parse_scenario(&text)
}
