use std::fs;
use std::path::PathBuf;

use mfgset::control::{PurePathControl, PureStateControl};
use mfgset::diffusion::{ContControl, DiffusionSpec};
use mfgset::scenario::{parse_scenario, Scenario};
use mfgset::setvalue::{set_value_eps, StateControlGrid};
use mfgset::{GameSpec, PathMeasure, SimplexMeasure};
use serde_json::Value;

use crate::error::{input, CliResult};
use crate::output::{Manifest, Output};
use crate::Common;

pub struct Ctx {
    pub common: Common,
    scenario: Option<(PathBuf, Vec<u8>, Scenario)>,
}

pub struct Game {
    pub spec: GameSpec,
    pub mu: SimplexMeasure,
}

impl Game {
    pub fn path_measure(&self) -> PathMeasure {
        PathMeasure::from_states(&self.mu)
    }

    pub fn require_state(&self, what: &str) -> CliResult<()> {
        if self.spec.is_path_dependent() {
            return Err(input(format!(
                "{what} needs a state game; `{}` is path dependent",
                self.spec.name()
            )));
        }
        Ok(())
    }

    fn expand(&self, idx: &[usize], len: usize) -> CliResult<Vec<usize>> {
        match idx.len() {
            1 => Ok(vec![idx[0]; len]),
            n if n == len => Ok(idx.to_vec()),
            n => Err(input(format!(
                "--actions needs 1 or {len} indices, got {n}"
            ))),
        }
    }

    pub fn state_control(&self, idx: &[usize]) -> CliResult<PureStateControl> {
        let idx = self.expand(idx, self.spec.horizon() * self.spec.d())?;
        Ok(PureStateControl::from_grid_indices(&self.spec, &idx)?)
    }

    pub fn path_control(&self, idx: &[usize]) -> CliResult<PurePathControl> {
        let nodes: usize = (0..self.spec.horizon())
            .map(|s| self.spec.path_space(s).len())
            .sum();
        let idx = self.expand(idx, nodes)?;
        let grid = self.spec.actions();
        if let Some(&k) = idx.iter().find(|&&k| k >= grid.len()) {
            return Err(input(format!("grid index {k} outside 0..{}", grid.len())));
        }
        let mut next = idx.into_iter();
        Ok(PurePathControl::from_fn(&self.spec, 0, |_, _| {
            grid.point(next.next().expect("one index per node"))
                .to_vec()
        })?)
    }

    /// `--actions` when given, otherwise the first eps-equilibrium of the grid.
    pub fn state_control_or_equilibrium(
        &self,
        idx: Option<&[usize]>,
        eps: f64,
    ) -> CliResult<(PureStateControl, String)> {
        if let Some(idx) = idx {
            return Ok((self.state_control(idx)?, "given".into()));
        }
        let sv = set_value_eps(&self.spec, 0, &self.mu, eps)?;
        let g = sv
            .generators
            .first()
            .ok_or_else(|| input(format!("no {eps}-equilibrium on the action grid")))?;
        let grid = StateControlGrid::new(&self.spec, 0, self.spec.horizon())?;
        Ok((
            grid.control(&self.spec, g.control_id),
            format!("grid control {} ({eps}-equilibrium)", g.control_id),
        ))
    }
}

pub struct Diffusion {
    pub spec: DiffusionSpec,
    pub mu: Vec<f64>,
    pub control: ContControl,
}

impl Ctx {
    pub fn new(common: Common) -> CliResult<Self> {
        let scenario = match &common.scenario {
            Some(path) => {
                let bytes =
                    fs::read(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
                let text = String::from_utf8(bytes.clone())
                    .map_err(|e| input(format!("{}: {e}", path.display())))?;
                let parsed = parse_scenario(&text)?;
                Some((path.clone(), bytes, parsed))
            }
            None => None,
        };
        Ok(Self { common, scenario })
    }

    fn scenario(&self) -> CliResult<&Scenario> {
        self.scenario
            .as_ref()
            .map(|s| &s.2)
            .ok_or_else(|| input("this command needs --scenario"))
    }

    pub fn game(&self) -> CliResult<Game> {
        let s = self.scenario()?;
        let mut spec = s
            .game
            .clone()
            .ok_or_else(|| input(format!("scenario `{}` has no [game] section", s.name)))?;
        if let Some(n) = self.common.grid_resolution {
            spec = spec.with_grid_resolution(n)?;
        }
        let mu = s
            .initial
            .clone()
            .ok_or_else(|| input(format!("scenario `{}` has no initial measure", s.name)))?;
        Ok(Game { spec, mu })
    }

    pub fn diffusion(&self) -> CliResult<Diffusion> {
        let s = self.scenario()?;
        let d = s
            .diffusion
            .as_ref()
            .ok_or_else(|| input(format!("scenario `{}` has no [diffusion] section", s.name)))?;
        let spec = match self.common.grid_resolution {
            Some(nx) => d.spec.with_grid(nx, d.spec.dt())?,
            None => d.spec.clone(),
        };
        let mu = d.initial.masses(spec.grid())?;
        Ok(Diffusion {
            spec,
            mu,
            control: d.control.clone(),
        })
    }

    pub fn is_diffusion(&self) -> bool {
        self.scenario.as_ref().is_some_and(|s| s.2.game.is_none())
    }

    pub fn eps_or(&self, default: &[f64]) -> CliResult<Vec<f64>> {
        let eps = self.common.eps.clone().unwrap_or_else(|| default.to_vec());
        if eps.is_empty() || eps.iter().any(|e| !e.is_finite() || *e < 0.0) {
            return Err(input(format!(
                "--eps must be finite and nonnegative: {eps:?}"
            )));
        }
        Ok(eps)
    }

    pub fn n_list_or(&self, default: &[usize]) -> CliResult<Vec<usize>> {
        let n = self
            .common
            .n_list
            .clone()
            .unwrap_or_else(|| default.to_vec());
        if n.is_empty() || n.contains(&0) {
            return Err(input(format!("--n-list must hold positive sizes: {n:?}")));
        }
        Ok(n)
    }

    /// Split times: `--t0` or every `1..=T`.
    pub fn splits(&self, horizon: usize) -> CliResult<Vec<usize>> {
        match self.common.t0 {
            Some(t0) if t0 == 0 || t0 > horizon => {
                Err(input(format!("--t0 must lie in 1..={horizon}")))
            }
            Some(t0) => Ok(vec![t0]),
            None => Ok((1..=horizon).collect()),
        }
    }

    pub fn manifest(&self, command: &str) -> Manifest {
        let mut m = Manifest::new(
            command,
            self.scenario
                .as_ref()
                .map(|(p, b, _)| (p.as_path(), b.as_slice())),
        );
        if let Some(n) = self.common.grid_resolution {
            m.param("grid_resolution", n);
        }
        m
    }

    pub fn output(&self, manifest: Manifest) -> CliResult<Output> {
        Output::new(&self.common.out_dir, manifest)
    }
}

pub fn summary(pairs: Vec<(&str, Value)>) -> serde_json::Map<String, Value> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}
