//! Equilibrium gaps, raw and approximate set values, DPP checks and the
//! state-versus-path counterexample.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::control::{PurePathControl, PureStateControl, StatePolicy};
use crate::dynamics::{
    flow_unchecked, policy_costs_unchecked, terminal_costs, value_backward, FlowRecord,
};
use crate::error::{guard, Error, Result};
use crate::game::GameSpec;
use crate::measure::{PathMeasure, SimplexMeasure};
use crate::pathdyn::{
    path_flow_unchecked, path_policy_costs_unchecked, path_terminal_costs, path_value_backward,
};
use crate::{DEDUP_TOL, TOL_EXACT};

/// One point of a set value: the equilibrium cost vector of a control.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    /// `J(t, mu, alpha*; ., alpha*)`.
    pub values: Vec<f64>,
    /// Index of the control in its enumeration.
    pub control_id: u64,
    /// `max_x (J - v)`.
    pub gap: f64,
    /// `v(mu^alpha*; t, .)`, generators of the variant family.
    pub v_values: Vec<f64>,
}

/// Finite union of sup-norm balls of radius `epsilon` around generators.
#[derive(Clone, Debug, PartialEq)]
pub struct SetValueApprox {
    pub epsilon: f64,
    pub t: usize,
    pub measure: Vec<f64>,
    pub family: String,
    pub generators: Vec<Generator>,
}

pub fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

impl SetValueApprox {
    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    /// Smallest sup distance from `phi` to a generator (infinite when empty).
    pub fn distance(&self, phi: &[f64]) -> f64 {
        self.generators
            .iter()
            .map(|g| sup_distance(phi, &g.values))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, phi: &[f64]) -> bool {
        self.distance(phi) <= self.epsilon + DEDUP_TOL
    }

    /// Membership in the variant family built from `v(mu^alpha*; t, .)`.
    pub fn contains_variant(&self, phi: &[f64]) -> bool {
        self.generators
            .iter()
            .any(|g| sup_distance(phi, &g.v_values) <= self.epsilon + DEDUP_TOL)
    }

    pub fn values(&self) -> Vec<&[f64]> {
        self.generators
            .iter()
            .map(|g| g.values.as_slice())
            .collect()
    }
}

/// Keeps the first generator of every cluster closer than [`DEDUP_TOL`];
/// input order (control id) decides which one survives.
pub fn dedup_generators(cands: Vec<Generator>) -> Vec<Generator> {
    let mut kept: Vec<Generator> = Vec::new();
    for g in cands {
        if !kept
            .iter()
            .any(|k| sup_distance(&k.values, &g.values) <= DEDUP_TOL)
        {
            kept.push(g);
        }
    }
    kept
}

/// Digits of `id` in base `n`, most significant first.
pub(crate) fn mixed_digits(mut id: u64, n: usize, slots: usize) -> Vec<usize> {
    let mut out = vec![0; slots];
    for slot in out.iter_mut().rev() {
        *slot = (id % n as u64) as usize;
        id /= n as u64;
    }
    out
}

pub(crate) fn enumeration_size(base: usize, slots: usize) -> f64 {
    (base as f64).powi(slots as i32)
}

/// Grid state controls acting on `[from, to)`; grid point 0 elsewhere.
#[derive(Clone, Copy, Debug)]
pub struct StateControlGrid {
    pub from: usize,
    pub to: usize,
    pub d: usize,
    pub n_actions: usize,
}

impl StateControlGrid {
    pub fn new(spec: &GameSpec, from: usize, to: usize) -> Result<Self> {
        let g = Self {
            from,
            to,
            d: spec.d(),
            n_actions: spec.actions().len(),
        };
        guard(
            format!("grid state controls on [{from}, {to})"),
            g.size(),
            spec.limits().max_controls,
        )?;
        Ok(g)
    }

    pub fn slots(&self) -> usize {
        (self.to - self.from) * self.d
    }

    pub fn size(&self) -> f64 {
        enumeration_size(self.n_actions, self.slots())
    }

    pub fn count(&self) -> u64 {
        self.size() as u64
    }

    pub fn control(&self, spec: &GameSpec, id: u64) -> PureStateControl {
        let digits = mixed_digits(id, self.n_actions, self.slots());
        let mut idx = vec![0; spec.horizon() * self.d];
        idx[self.from * self.d..self.to * self.d].copy_from_slice(&digits);
        PureStateControl::from_grid_indices(spec, &idx).expect("grid indices in range")
    }
}

/// Per-state gap `J(t, mu, alpha; x, alpha) - v(mu^alpha; t, x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GapReport {
    pub gap: Vec<f64>,
    pub costs: Vec<f64>,
    pub values: Vec<f64>,
    pub flow: FlowRecord,
}

impl GapReport {
    pub fn max_gap(&self) -> f64 {
        self.gap.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_eps_mfe(&self, eps: f64) -> bool {
        self.max_gap() <= eps
    }
}

/// Equilibrium gap of a state control. The value minimizes over the grid and
/// the control's own actions, so the gap is nonnegative up to rounding even
/// for off-grid controls.
pub fn mfe_gap(
    spec: &GameSpec,
    t: usize,
    mu: &SimplexMeasure,
    alpha: &dyn StatePolicy,
) -> Result<GapReport> {
    let flow = crate::dynamics::measure_flow(spec, t, mu, alpha)?;
    let model = spec.state_model("mfe_gap")?;
    let g = terminal_costs(model, spec.d(), flow.at(spec.horizon()));
    let costs = policy_costs_unchecked(model, spec, &flow, spec.horizon(), &g, t, alpha);
    let values = value_backward(model, spec, &flow, spec.horizon(), &g, t, Some(alpha))
        .initial()
        .to_vec();
    let gap = costs.iter().zip(&values).map(|(j, v)| j - v).collect();
    Ok(GapReport {
        gap,
        costs,
        values,
        flow,
    })
}

fn check_state_measure(spec: &GameSpec, t: usize, mu: &SimplexMeasure) -> Result<()> {
    spec.check_time(t)?;
    spec.state_model("set value")?;
    if mu.len() != spec.d() {
        return Err(Error::DimensionMismatch {
            expected: spec.d(),
            got: mu.len(),
        });
    }
    mu.require_full_support()
}

/// All grid state controls on `[t, T)` with `max gap <= threshold`, in
/// control-id order, before deduplication.
pub(crate) fn state_mfe_candidates(
    spec: &GameSpec,
    t: usize,
    mu: &SimplexMeasure,
    threshold: f64,
) -> Result<Vec<Generator>> {
    check_state_measure(spec, t, mu)?;
    let model = spec.state_model("set value")?;
    let grid = StateControlGrid::new(spec, t, spec.horizon())?;
    let horizon = spec.horizon();
    let out = (0..grid.count())
        .into_par_iter()
        .filter_map(|id| {
            let alpha = grid.control(spec, id);
            let flow = flow_unchecked(model, spec, t, mu.weights().to_vec(), &alpha, horizon);
            let g = terminal_costs(model, spec.d(), flow.at(horizon));
            let costs = policy_costs_unchecked(model, spec, &flow, horizon, &g, t, &alpha);
            let v = value_backward(model, spec, &flow, horizon, &g, t, None)
                .initial()
                .to_vec();
            let gap = costs
                .iter()
                .zip(&v)
                .map(|(j, v)| j - v)
                .fold(f64::NEG_INFINITY, f64::max);
            (gap <= threshold).then_some(Generator {
                values: costs,
                control_id: id,
                gap,
                v_values: v,
            })
        })
        .collect();
    Ok(out)
}

/// Set value generated by exact equilibria (`max gap <= tol_exact`).
pub fn raw_set_value(
    spec: &GameSpec,
    t: usize,
    mu: &SimplexMeasure,
    tol_exact: f64,
) -> Result<SetValueApprox> {
    let cands = state_mfe_candidates(spec, t, mu, tol_exact)?;
    Ok(SetValueApprox {
        epsilon: 0.0,
        t,
        measure: mu.weights().to_vec(),
        family: "state".into(),
        generators: dedup_generators(cands),
    })
}

/// Set value at tolerance `eps`: generators are equilibrium costs of grid
/// `eps`-MFE (gap `<= eps + TOL_EXACT`), members lie within `eps` of one.
pub fn set_value_eps(
    spec: &GameSpec,
    t: usize,
    mu: &SimplexMeasure,
    eps: f64,
) -> Result<SetValueApprox> {
    check_eps(eps)?;
    let cands = state_mfe_candidates(spec, t, mu, eps + TOL_EXACT)?;
    Ok(SetValueApprox {
        epsilon: eps,
        t,
        measure: mu.weights().to_vec(),
        family: "state".into(),
        generators: dedup_generators(cands),
    })
}

pub(crate) fn check_eps(eps: f64) -> Result<()> {
    if !(eps >= 0.0) || !eps.is_finite() {
        Err(Error::InvalidArgument(format!(
            "epsilon must be finite and nonnegative, got {eps}"
        )))
    } else {
        Ok(())
    }
}

fn measure_key(w: &[f64]) -> Vec<u64> {
    w.iter().map(|v| v.to_bits()).collect()
}

/// Right side of the DPP: truncated equilibrium costs over pairs
/// `(psi, alpha*)`, `alpha*` a grid control on `[t, t0)` that is an
/// `eps`-MFE of the game stopped at `t0` with terminal `psi`, and `psi` a
/// generator of the set value at `(t0, mu^alpha*_t0)`.
pub fn dpp_rhs(
    spec: &GameSpec,
    t: usize,
    t0: usize,
    mu: &SimplexMeasure,
    eps: f64,
) -> Result<SetValueApprox> {
    check_eps(eps)?;
    check_state_measure(spec, t, mu)?;
    check_split(spec, t, t0)?;
    let model = spec.state_model("dpp_rhs")?;
    let grid = StateControlGrid::new(spec, t, t0)?;
    let flows: Vec<(PureStateControl, FlowRecord)> = (0..grid.count())
        .into_par_iter()
        .map(|id| {
            let alpha = grid.control(spec, id);
            let flow = flow_unchecked(model, spec, t, mu.weights().to_vec(), &alpha, t0);
            (alpha, flow)
        })
        .collect();
    let mut keys: Vec<Vec<u64>> = Vec::new();
    let mut seen = HashMap::new();
    for (_, flow) in &flows {
        let k = measure_key(flow.at(t0));
        if !seen.contains_key(&k) {
            seen.insert(k.clone(), keys.len());
            keys.push(k);
        }
    }
    let continuation: Vec<Vec<Generator>> = keys
        .par_iter()
        .map(|k| {
            let nu = SimplexMeasure::from_raw(k.iter().map(|b| f64::from_bits(*b)).collect());
            set_value_eps(spec, t0, &nu, eps).map(|sv| sv.generators)
        })
        .collect::<Result<_>>()?;
    let threshold = eps + TOL_EXACT;
    let cands: Vec<Generator> = flows
        .par_iter()
        .enumerate()
        .flat_map_iter(|(id, (alpha, flow))| {
            let cont = &continuation[seen[&measure_key(flow.at(t0))]];
            cont.iter()
                .filter_map(|psi| {
                    let j = policy_costs_unchecked(model, spec, flow, t0, &psi.values, t, alpha);
                    let v = value_backward(model, spec, flow, t0, &psi.values, t, None)
                        .initial()
                        .to_vec();
                    let gap = j
                        .iter()
                        .zip(&v)
                        .map(|(a, b)| a - b)
                        .fold(f64::NEG_INFINITY, f64::max);
                    (gap <= threshold).then_some(Generator {
                        values: j,
                        control_id: id as u64,
                        gap,
                        v_values: v,
                    })
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(SetValueApprox {
        epsilon: eps,
        t,
        measure: mu.weights().to_vec(),
        family: format!("dpp(t0={t0})"),
        generators: dedup_generators(cands),
    })
}

pub(crate) fn check_split(spec: &GameSpec, t: usize, t0: usize) -> Result<()> {
    if t0 <= t || t0 > spec.horizon() {
        Err(Error::TimeOutOfRange {
            time: t0,
            lo: t + 1,
            hi: spec.horizon(),
        })
    } else {
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Right side at `eps` inside the set value at the inflated tolerance.
    Forward,
    /// Set value at `eps` inside the right side at the inflated tolerance.
    Backward,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DppRow {
    pub epsilon: f64,
    pub direction: Direction,
    /// Tolerance of the containing set.
    pub inflated: f64,
    /// Generators checked.
    pub checked: usize,
    /// Largest distance from a checked generator to the containing set.
    pub worst_distance: f64,
    /// Amount by which that distance exceeds the inflated tolerance.
    pub defect: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DppReport {
    pub t: usize,
    pub t0: usize,
    pub constant: f64,
    pub rows: Vec<DppRow>,
}

impl DppReport {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Compares the generators of `inner` against the balls of `outer`.
pub(crate) fn inclusion_row(
    eps: f64,
    direction: Direction,
    inner: &SetValueApprox,
    outer: &SetValueApprox,
) -> DppRow {
    let worst = inner
        .generators
        .iter()
        .map(|g| outer.distance(&g.values))
        .fold(0.0, f64::max);
    let defect = (worst - outer.epsilon - DEDUP_TOL).max(0.0);
    DppRow {
        epsilon: eps,
        direction,
        inflated: outer.epsilon,
        checked: inner.len(),
        worst_distance: worst,
        defect,
        pass: defect == 0.0,
    }
}

/// Finite-tolerance DPP inclusions with `C = c_q^{-(t0 - t)}`.
pub fn dpp_check(
    spec: &GameSpec,
    t: usize,
    t0: usize,
    mu: &SimplexMeasure,
    eps_list: &[f64],
) -> Result<DppReport> {
    check_split(spec, t, t0)?;
    let c = spec.c_q().powi(-((t0 - t) as i32));
    let mut rows = Vec::new();
    for &eps in eps_list {
        let rhs = dpp_rhs(spec, t, t0, mu, eps)?;
        let big = set_value_eps(spec, t, mu, c * eps)?;
        rows.push(inclusion_row(eps, Direction::Forward, &rhs, &big));
        let sv = set_value_eps(spec, t, mu, eps)?;
        let big_rhs = dpp_rhs(spec, t, t0, mu, c * eps)?;
        rows.push(inclusion_row(eps, Direction::Backward, &sv, &big_rhs));
    }
    Ok(DppReport {
        t,
        t0,
        constant: c,
        rows,
    })
}

/// Pure path controls on `[from, T)` indexed by mixed radix over nodes
/// ordered by time then path id.
#[derive(Clone, Copy, Debug)]
pub struct PathControlGrid {
    pub from: usize,
    pub to: usize,
    pub d: usize,
    pub n_actions: usize,
}

impl PathControlGrid {
    pub fn new(spec: &GameSpec, from: usize, to: usize) -> Result<Self> {
        spec.check_path_cap()?;
        let g = Self {
            from,
            to,
            d: spec.d(),
            n_actions: spec.actions().len(),
        };
        guard(
            format!("pure path controls on [{from}, {to})"),
            g.size(),
            spec.limits().max_controls,
        )?;
        Ok(g)
    }

    pub fn slots(&self) -> usize {
        crate::space::path_node_count(self.d, self.from, self.to)
    }

    pub fn size(&self) -> f64 {
        enumeration_size(self.n_actions, self.slots())
    }

    pub fn count(&self) -> u64 {
        self.size() as u64
    }

    /// The control starts at `from` and uses grid point 0 from `to` on.
    pub fn control(&self, spec: &GameSpec, id: u64) -> PurePathControl {
        let digits = mixed_digits(id, self.n_actions, self.slots());
        let grid = spec.actions();
        let mut i = 0;
        PurePathControl::from_fn_unchecked(self.d, spec.horizon(), self.from, grid.dim(), |s, _| {
            let k = if s < self.to {
                i += 1;
                digits[i - 1]
            } else {
                0
            };
            grid.point(k).to_vec()
        })
    }
}

pub(crate) fn check_path_measure(spec: &GameSpec, t: usize, mu: &PathMeasure) -> Result<()> {
    spec.check_time(t)?;
    spec.check_path_cap()?;
    if mu.time() != t || mu.space().d() != spec.d() {
        return Err(Error::InvalidArgument(format!(
            "measure lives on X_{} but the set value is taken at {t}",
            mu.time()
        )));
    }
    mu.require_full_support()
}

/// Set value over pure path controls at tolerance `eps` (gap threshold
/// `eps + TOL_EXACT`); `eps = 0` gives the raw path set value.
pub fn path_set_value_eps(
    spec: &GameSpec,
    t: usize,
    mu: &PathMeasure,
    eps: f64,
) -> Result<SetValueApprox> {
    check_eps(eps)?;
    check_path_measure(spec, t, mu)?;
    let grid = PathControlGrid::new(spec, t, spec.horizon())?;
    let horizon = spec.horizon();
    let threshold = eps + TOL_EXACT;
    let cands: Vec<Generator> = (0..grid.count())
        .into_par_iter()
        .filter_map(|id| {
            let alpha = grid.control(spec, id);
            let flow = path_flow_unchecked(spec, t, mu.weights().to_vec(), &alpha, horizon);
            let g = path_terminal_costs(spec, flow.at(horizon));
            let j = path_policy_costs_unchecked(spec, &flow, horizon, &g, t, &alpha);
            let v = path_value_backward(spec, &flow, horizon, &g, t)
                .initial()
                .to_vec();
            let gap = j
                .iter()
                .zip(&v)
                .map(|(a, b)| a - b)
                .fold(f64::NEG_INFINITY, f64::max);
            (gap <= threshold).then_some(Generator {
                values: j,
                control_id: id,
                gap,
                v_values: v,
            })
        })
        .collect();
    Ok(SetValueApprox {
        epsilon: eps,
        t,
        measure: mu.weights().to_vec(),
        family: "path".into(),
        generators: dedup_generators(cands),
    })
}

/// State-dependent and path-dependent raw set values of the two-state
/// counterexample at `mu = (mu_lo, 1 - mu_lo)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Example71Report {
    pub a0: f64,
    pub mu_lo: f64,
    /// Sorted constant values of the state generators.
    pub state_values: Vec<f64>,
    /// `a0 (2 - a0)`, `1/2 + a0 - a0^2`, `1 - a0^2`.
    pub expected_state: [f64; 3],
    /// `mu_lo a0 + (1 - mu_lo)(1 - a0) + a0 (1 - a0)`.
    pub path_value: f64,
    pub path_generators: usize,
    pub path_member: bool,
    pub absent_from_state: bool,
    /// The path value coincides with a state value for this measure.
    pub coincidence: bool,
    pub state_controls: u64,
    pub path_controls: u64,
}

impl Example71Report {
    /// State set matches the closed form and the path value behaves as
    /// claimed (a coincidence is reported, not failed).
    pub fn pass(&self) -> bool {
        let state_ok = self.state_values.len() == 3
            && self
                .state_values
                .iter()
                .zip(&self.expected_state)
                .all(|(a, b)| (a - b).abs() <= 1e-10);
        state_ok && self.path_member && (self.absent_from_state || self.coincidence)
    }
}

pub fn example71_counterexample(a0: f64, mu_lo: f64) -> Result<Example71Report> {
    let spec = crate::models::example71_spec(a0)?;
    let mu = SimplexMeasure::binary(mu_lo)?;
    mu.require_full_support()?;
    let state = raw_set_value(&spec, 0, &mu, TOL_EXACT)?;
    let mut state_values = Vec::new();
    for g in &state.generators {
        if sup_distance(&g.values, &vec![g.values[0]; g.values.len()]) > DEDUP_TOL {
            return Err(Error::InvalidArgument(
                "state generator depends on the initial state".into(),
            ));
        }
        state_values.push(g.values[0]);
    }
    state_values.sort_by(f64::total_cmp);
    let path = path_set_value_eps(&spec, 0, &PathMeasure::from_states(&mu), 0.0)?;
    let path_value = mu_lo * a0 + (1.0 - mu_lo) * (1.0 - a0) + a0 * (1.0 - a0);
    let phi = vec![path_value; spec.d()];
    let path_member = path.contains(&phi);
    let coincidence = state.contains(&phi);
    Ok(Example71Report {
        a0,
        mu_lo,
        state_values,
        expected_state: [a0 * (2.0 - a0), 0.5 + a0 - a0 * a0, 1.0 - a0 * a0],
        path_value,
        path_generators: path.len(),
        path_member,
        absent_from_state: !coincidence,
        coincidence,
        state_controls: StateControlGrid::new(&spec, 0, spec.horizon())?.count(),
        path_controls: PathControlGrid::new(&spec, 0, spec.horizon())?.count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{constant_spec, crowd_aversion_spec, example71_spec};

    #[test]
    fn example71_raw_triple() {
        let spec = example71_spec(0.25).unwrap();
        let sv = raw_set_value(&spec, 0, &SimplexMeasure::binary(0.3).unwrap(), TOL_EXACT).unwrap();
        let mut vals: Vec<f64> = sv.generators.iter().map(|g| g.values[0]).collect();
        vals.sort_by(f64::total_cmp);
        assert_eq!(vals.len(), 3);
        for (v, e) in vals.iter().zip([0.4375, 0.6875, 0.9375]) {
            assert!((v - e).abs() < 1e-12);
        }
    }

    #[test]
    fn half_action_gap() {
        let spec = example71_spec(0.25).unwrap();
        let alpha = PureStateControl::constant(&spec, &[0.5]).unwrap();
        let rep = mfe_gap(&spec, 0, &SimplexMeasure::binary(0.4).unwrap(), &alpha).unwrap();
        for g in &rep.gap {
            assert!((g - (0.25 - 0.1875)).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_game_singleton() {
        let spec = constant_spec(0.4, 2).unwrap();
        let mu = SimplexMeasure::binary(0.5).unwrap();
        let sv = raw_set_value(&spec, 0, &mu, TOL_EXACT).unwrap();
        assert_eq!(sv.len(), 1);
        assert!(sup_distance(&sv.generators[0].values, &[0.4, 0.4]) < 1e-15);
        let all = state_mfe_candidates(&spec, 0, &mu, TOL_EXACT).unwrap();
        assert_eq!(all.len(), 16);
    }

    #[test]
    fn crowd_aversion_has_empty_raw_value() {
        let spec = crowd_aversion_spec().unwrap();
        let mu = SimplexMeasure::binary(0.5).unwrap();
        assert!(raw_set_value(&spec, 0, &mu, TOL_EXACT).unwrap().is_empty());
        assert!(!set_value_eps(&spec, 0, &mu, 0.05).unwrap().is_empty());
    }

    #[test]
    fn dpp_at_horizon_matches_set_value() {
        let spec = example71_spec(0.25).unwrap();
        let mu = SimplexMeasure::binary(0.3).unwrap();
        for eps in [0.0, 0.05] {
            let a = dpp_rhs(&spec, 0, 2, &mu, eps).unwrap();
            let b = set_value_eps(&spec, 0, &mu, eps).unwrap();
            assert_eq!(a.values(), b.values());
        }
        let rep = dpp_check(&spec, 0, 1, &mu, &[0.0]).unwrap();
        assert!(rep.pass());
        assert!(rep.rows.iter().all(|r| r.defect == 0.0));
    }

    #[test]
    fn counterexample_flags() {
        let r = example71_counterexample(0.25, 0.3).unwrap();
        assert!(r.pass() && r.absent_from_state && (r.path_value - 0.7875).abs() < 1e-12);
        let r = example71_counterexample(0.25, 0.5).unwrap();
        assert!(r.pass() && r.coincidence);
        assert_eq!((r.state_controls, r.path_controls), (81, 729));
    }
}
