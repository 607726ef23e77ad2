//! State-level forward flows, deviator laws, costs and backward values.

use crate::control::{MuControl, PureStateControl, StatePolicy};
use crate::error::{Error, Result};
use crate::game::{GameSpec, StateModel};
use crate::measure::SimplexMeasure;

/// Measures `mu_s` for `s = start..=end`. Path flows store measures on `X_s`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowRecord {
    start: usize,
    measures: Vec<Vec<f64>>,
}

impl FlowRecord {
    pub(crate) fn new(start: usize, measures: Vec<Vec<f64>>) -> Self {
        Self { start, measures }
    }

    pub fn start(&self) -> usize {
        self.start
    }

    /// Last time covered.
    pub fn end(&self) -> usize {
        self.start + self.measures.len() - 1
    }

    pub fn at(&self, s: usize) -> &[f64] {
        &self.measures[s - self.start]
    }

    pub fn measures(&self) -> &[Vec<f64>] {
        &self.measures
    }

    pub fn covers(&self, from: usize, to: usize) -> Result<()> {
        if from < self.start || to > self.end() || from > to {
            Err(Error::TimeOutOfRange {
                time: if from < self.start { from } else { to },
                lo: self.start,
                hi: self.end(),
            })
        } else {
            Ok(())
        }
    }

    /// Largest `W1` distance between the two flows over common times.
    pub fn max_w1(&self, other: &Self) -> f64 {
        let lo = self.start.max(other.start);
        let hi = self.end().min(other.end());
        (lo..=hi)
            .map(|s| {
                self.at(s)
                    .iter()
                    .zip(other.at(s))
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

/// Terminal functional `psi(y, nu)` of a truncated game.
pub type Terminal<'a> = &'a dyn Fn(usize, &[f64]) -> f64;

fn check_mu(spec: &GameSpec, mu: &SimplexMeasure) -> Result<()> {
    if mu.len() != spec.d() {
        return Err(Error::DimensionMismatch {
            expected: spec.d(),
            got: mu.len(),
        });
    }
    mu.require_full_support()
}

/// Forward flow of the population using `alpha` from `(t, mu)` to `T`.
pub fn measure_flow(
    spec: &GameSpec,
    t: usize,
    mu: &SimplexMeasure,
    alpha: &dyn StatePolicy,
) -> Result<FlowRecord> {
    measure_flow_until(spec, t, mu, alpha, spec.horizon())
}

/// Same recursion stopped at `end`.
pub fn measure_flow_until(
    spec: &GameSpec,
    t: usize,
    mu: &SimplexMeasure,
    alpha: &dyn StatePolicy,
    end: usize,
) -> Result<FlowRecord> {
    let model = spec.state_model("measure_flow")?;
    spec.check_time(end)?;
    if t > end {
        return Err(Error::TimeOutOfRange {
            time: t,
            lo: 0,
            hi: end,
        });
    }
    check_mu(spec, mu)?;
    Ok(flow_unchecked(
        model,
        spec,
        t,
        mu.weights().to_vec(),
        alpha,
        end,
    ))
}

pub(crate) fn flow_unchecked(
    model: &dyn StateModel,
    spec: &GameSpec,
    t: usize,
    mu: Vec<f64>,
    alpha: &dyn StatePolicy,
    end: usize,
) -> FlowRecord {
    let d = spec.d();
    let mut a = vec![0.0; spec.actions().dim()];
    let mut row = vec![0.0; d];
    let mut measures = Vec::with_capacity(end - t + 1);
    measures.push(mu);
    for s in t..end {
        let cur = measures.last().expect("nonempty");
        let mut next = vec![0.0; d];
        for x in 0..d {
            if cur[x] == 0.0 {
                continue;
            }
            alpha.act(s, x, cur, &mut a);
            model.transition(s, x, cur, &a, &mut row);
            for (n, q) in next.iter_mut().zip(&row) {
                *n += cur[x] * q;
            }
        }
        measures.push(next);
    }
    FlowRecord::new(t, measures)
}

/// Marginal laws `nu_s`, `s = t..=end`, of a deviator started at `x` at time
/// `t` and playing `alpha` against the frozen population flow.
pub fn individual_law(
    spec: &GameSpec,
    flow: &FlowRecord,
    t: usize,
    x: usize,
    alpha: &dyn StatePolicy,
) -> Result<Vec<Vec<f64>>> {
    let model = spec.state_model("individual_law")?;
    flow.covers(t, flow.end())?;
    check_state(spec, x)?;
    let d = spec.d();
    let mut a = vec![0.0; spec.actions().dim()];
    let mut row = vec![0.0; d];
    let mut law = vec![vec![0.0; d]];
    law[0][x] = 1.0;
    for s in t..flow.end() {
        let mu = flow.at(s);
        let cur = law.last().expect("nonempty");
        let mut next = vec![0.0; d];
        for y in 0..d {
            if cur[y] == 0.0 {
                continue;
            }
            alpha.act(s, y, mu, &mut a);
            model.transition(s, y, mu, &a, &mut row);
            for (n, q) in next.iter_mut().zip(&row) {
                *n += cur[y] * q;
            }
        }
        law.push(next);
    }
    Ok(law)
}

fn check_state(spec: &GameSpec, x: usize) -> Result<()> {
    if x >= spec.d() {
        Err(Error::InvalidArgument(format!(
            "state {x} outside 0..{}",
            spec.d()
        )))
    } else {
        Ok(())
    }
}

/// `G(., mu_T)` as a vector.
pub fn terminal_costs(model: &dyn StateModel, d: usize, mu: &[f64]) -> Vec<f64> {
    (0..d).map(|y| model.terminal_cost(y, mu)).collect()
}

/// Expected cost of a deviator at `(s, x)` playing `alpha` against `flow`,
/// computed forward through [`individual_law`].
#[allow(non_snake_case)]
pub fn cost_J(
    spec: &GameSpec,
    flow: &FlowRecord,
    s: usize,
    x: usize,
    alpha: &dyn StatePolicy,
) -> Result<f64> {
    let model = spec.state_model("cost_J")?;
    let g = |y: usize, nu: &[f64]| model.terminal_cost(y, nu);
    cost_J_truncated(spec, flow, spec.horizon(), &g, s, x, alpha)
}

/// Cost of the game stopped at `t0` with terminal functional `psi`.
#[allow(non_snake_case)]
pub fn cost_J_truncated(
    spec: &GameSpec,
    flow: &FlowRecord,
    t0: usize,
    psi: Terminal<'_>,
    s: usize,
    x: usize,
    alpha: &dyn StatePolicy,
) -> Result<f64> {
    let model = spec.state_model("cost_J_truncated")?;
    flow.covers(s, t0)?;
    check_state(spec, x)?;
    let d = spec.d();
    let mut a = vec![0.0; spec.actions().dim()];
    let mut row = vec![0.0; d];
    let mut law = vec![0.0; d];
    law[x] = 1.0;
    let mut total = 0.0;
    for r in s..t0 {
        let mu = flow.at(r);
        let mut next = vec![0.0; d];
        for y in 0..d {
            if law[y] == 0.0 {
                continue;
            }
            alpha.act(r, y, mu, &mut a);
            total += law[y] * model.running_cost(r, y, mu, &a);
            model.transition(r, y, mu, &a, &mut row);
            for (n, q) in next.iter_mut().zip(&row) {
                *n += law[y] * q;
            }
        }
        law = next;
    }
    let mu_end = flow.at(t0);
    for y in 0..d {
        if law[y] != 0.0 {
            total += law[y] * psi(y, mu_end);
        }
    }
    Ok(total)
}

/// Cost vector `J(s, .)` of `alpha` by backward recursion from `terminal`
/// at `t0`; agrees with [`cost_J_truncated`] up to rounding.
pub fn policy_costs(
    spec: &GameSpec,
    flow: &FlowRecord,
    t0: usize,
    terminal: &[f64],
    s: usize,
    alpha: &dyn StatePolicy,
) -> Result<Vec<f64>> {
    let model = spec.state_model("policy_costs")?;
    flow.covers(s, t0)?;
    if terminal.len() != spec.d() {
        return Err(Error::DimensionMismatch {
            expected: spec.d(),
            got: terminal.len(),
        });
    }
    Ok(policy_costs_unchecked(
        model, spec, flow, t0, terminal, s, alpha,
    ))
}

pub(crate) fn policy_costs_unchecked(
    model: &dyn StateModel,
    spec: &GameSpec,
    flow: &FlowRecord,
    t0: usize,
    terminal: &[f64],
    s: usize,
    alpha: &dyn StatePolicy,
) -> Vec<f64> {
    let d = spec.d();
    let mut a = vec![0.0; spec.actions().dim()];
    let mut row = vec![0.0; d];
    let mut u = terminal.to_vec();
    for r in (s..t0).rev() {
        let mu = flow.at(r);
        let mut prev = vec![0.0; d];
        for (x, p) in prev.iter_mut().enumerate() {
            alpha.act(r, x, mu, &mut a);
            model.transition(r, x, mu, &a, &mut row);
            let cont: f64 = row.iter().zip(&u).map(|(q, v)| q * v).sum();
            *p = model.running_cost(r, x, mu, &a) + cont;
        }
        u = prev;
    }
    u
}

/// Backward value table `v(r, .)` for `r = start..=end` with minimizing
/// grid indices for `r < end`.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueTable {
    start: usize,
    values: Vec<Vec<f64>>,
    argmin: Vec<Vec<usize>>,
}

impl ValueTable {
    pub(crate) fn new(start: usize, values: Vec<Vec<f64>>, argmin: Vec<Vec<usize>>) -> Self {
        Self {
            start,
            values,
            argmin,
        }
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn end(&self) -> usize {
        self.start + self.values.len() - 1
    }

    pub fn at(&self, r: usize) -> &[f64] {
        &self.values[r - self.start]
    }

    /// Value at the start time.
    pub fn initial(&self) -> &[f64] {
        &self.values[0]
    }

    /// Lowest minimizing grid index at `(r, x)`; `usize::MAX` marks a node
    /// where an extra candidate action beat the grid.
    pub fn argmin(&self, r: usize, x: usize) -> usize {
        self.argmin[r - self.start][x]
    }

    /// Minimizing grid feedback on `[start, end)`, grid point 0 elsewhere.
    pub fn feedback(&self, spec: &GameSpec) -> Result<PureStateControl> {
        PureStateControl::from_fn(spec, |s, x| {
            let k = if s >= self.start && s < self.end() {
                self.argmin(s, x)
            } else {
                0
            };
            spec.actions()
                .point(if k == usize::MAX { 0 } else { k })
                .to_vec()
        })
    }
}

/// Value `v(mu; s, .)` of the control problem against `flow`, minimizing
/// over the action grid; ties go to the lowest grid index.
pub fn value_v(spec: &GameSpec, flow: &FlowRecord, s: usize) -> Result<ValueTable> {
    let model = spec.state_model("value_v")?;
    flow.covers(s, spec.horizon())?;
    let g = terminal_costs(model, spec.d(), flow.at(spec.horizon()));
    Ok(value_backward(
        model,
        spec,
        flow,
        spec.horizon(),
        &g,
        s,
        None,
    ))
}

/// Value of the game stopped at `t0` with terminal functional `psi`.
pub fn value_v_truncated(
    spec: &GameSpec,
    flow: &FlowRecord,
    t0: usize,
    psi: Terminal<'_>,
    s: usize,
) -> Result<ValueTable> {
    let model = spec.state_model("value_v_truncated")?;
    flow.covers(s, t0)?;
    let nu = flow.at(t0);
    let terminal: Vec<f64> = (0..spec.d()).map(|y| psi(y, nu)).collect();
    Ok(value_backward(model, spec, flow, t0, &terminal, s, None))
}

/// Backward minimization over the grid, optionally also over the actions
/// of `extra` so that the value never exceeds the cost of `extra`.
pub(crate) fn value_backward(
    model: &dyn StateModel,
    spec: &GameSpec,
    flow: &FlowRecord,
    t0: usize,
    terminal: &[f64],
    s: usize,
    extra: Option<&dyn StatePolicy>,
) -> ValueTable {
    let d = spec.d();
    let grid = spec.actions();
    let mut row = vec![0.0; d];
    let mut a = vec![0.0; grid.dim()];
    let mut values = vec![terminal.to_vec()];
    let mut argmin = Vec::with_capacity(t0 - s);
    for r in (s..t0).rev() {
        let mu = flow.at(r);
        let next = values.last().expect("nonempty");
        let mut cur = vec![0.0; d];
        let mut arg = vec![0; d];
        for x in 0..d {
            let mut best = f64::INFINITY;
            let mut best_k = 0;
            for k in 0..grid.len() {
                let p = grid.point(k);
                model.transition(r, x, mu, p, &mut row);
                let val = model.running_cost(r, x, mu, p)
                    + row.iter().zip(next).map(|(q, v)| q * v).sum::<f64>();
                if val < best {
                    best = val;
                    best_k = k;
                }
            }
            if let Some(e) = extra {
                e.act(r, x, mu, &mut a);
                if grid.grid_index(&a).is_none() {
                    model.transition(r, x, mu, &a, &mut row);
                    let val = model.running_cost(r, x, mu, &a)
                        + row.iter().zip(next).map(|(q, v)| q * v).sum::<f64>();
                    if val < best {
                        best = val;
                        best_k = usize::MAX;
                    }
                }
            }
            cur[x] = best;
            arg[x] = best_k;
        }
        values.push(cur);
        argmin.push(arg);
    }
    values.reverse();
    argmin.reverse();
    ValueTable::new(s, values, argmin)
}

/// `max_x |J(t, mu, alpha; x, alpha~) - J(t0, psi; t, mu, alpha; x, alpha~)|`
/// with `psi(y, nu) = J(t0, nu, alpha; y, alpha~)`, the continuation flow
/// being recomputed from `nu`.
pub fn tower_check(
    spec: &GameSpec,
    t: usize,
    mu: &SimplexMeasure,
    alpha: &dyn StatePolicy,
    alpha_tilde: &dyn StatePolicy,
    t0: usize,
) -> Result<f64> {
    if t0 < t || t0 > spec.horizon() {
        return Err(Error::TimeOutOfRange {
            time: t0,
            lo: t,
            hi: spec.horizon(),
        });
    }
    let flow = measure_flow(spec, t, mu, alpha)?;
    let psi = |y: usize, nu: &[f64]| -> f64 {
        let nu = SimplexMeasure::from_raw(nu.to_vec());
        let tail = measure_flow(spec, t0, &nu, alpha).expect("continuation flow");
        cost_J(spec, &tail, t0, y, alpha_tilde).expect("continuation cost")
    };
    let mut worst = 0.0f64;
    for x in 0..spec.d() {
        let full = cost_J(spec, &flow, t, x, alpha_tilde)?;
        let split = cost_J_truncated(spec, &flow, t0, &psi, t, x, alpha_tilde)?;
        worst = worst.max((full - split).abs());
    }
    Ok(worst)
}

/// Pure control `(s, x) -> alpha(s, x, mu^alpha_s)` generating the same flow
/// from `(t, mu)`. Times before `t` use `mu` itself.
pub fn freeze_mu_dependence(
    spec: &GameSpec,
    t: usize,
    mu: &SimplexMeasure,
    alpha: &MuControl,
) -> Result<PureStateControl> {
    match alpha {
        MuControl::Independent(c) | MuControl::Frozen { control: c, .. } => Ok(c.clone()),
        MuControl::Affine(_) => {
            let flow = measure_flow(spec, t, mu, alpha)?;
            let mut out = vec![0.0; spec.actions().dim()];
            PureStateControl::from_fn(spec, |s, x| {
                let m = if s >= t { flow.at(s) } else { mu.weights() };
                alpha.act(s, x, m, &mut out);
                out.clone()
            })
        }
    }
}

/// The frozen control together with the flow it reproduces.
pub fn freeze_with_flow(
    spec: &GameSpec,
    t: usize,
    mu: &SimplexMeasure,
    alpha: &MuControl,
) -> Result<MuControl> {
    let control = freeze_mu_dependence(spec, t, mu, alpha)?;
    let flow = measure_flow(spec, t, mu, &control)?;
    Ok(MuControl::Frozen { control, flow })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::AffineClipped;
    use crate::models::{congestion_spec, constant_spec, example71_spec};

    fn mu(p: f64) -> SimplexMeasure {
        SimplexMeasure::binary(p).unwrap()
    }

    #[test]
    fn example71_flow_and_cost() {
        let spec = example71_spec(0.25).unwrap();
        let alpha = PureStateControl::constant(&spec, &[0.25]).unwrap();
        for p in [0.3, 0.5, 0.7] {
            let flow = measure_flow(&spec, 0, &mu(p), &alpha).unwrap();
            assert!((flow.at(1)[0] - 0.5).abs() < 1e-15);
            assert!((flow.at(2)[0] - 0.25).abs() < 1e-15);
            for x in 0..2 {
                let law = individual_law(&spec, &flow, 0, x, &alpha).unwrap();
                assert_eq!(law[1], vec![0.5, 0.5]);
                let j = cost_J(&spec, &flow, 0, x, &alpha).unwrap();
                assert!((j - 0.4375).abs() < 1e-15);
            }
            let v = value_v(&spec, &flow, 1).unwrap();
            assert!((v.initial()[0] - (0.25 + 0.1875)).abs() < 1e-15);
        }
    }

    #[test]
    fn boundary_measure_rejected() {
        let spec = example71_spec(0.25).unwrap();
        let alpha = PureStateControl::constant(&spec, &[0.25]).unwrap();
        let e = measure_flow(&spec, 0, &SimplexMeasure::dirac(2, 0), &alpha).unwrap_err();
        assert!(matches!(e, Error::NotFullSupport { .. }));
    }

    #[test]
    fn constant_costs_everywhere() {
        let spec = constant_spec(0.7, 2).unwrap();
        let alpha = PureStateControl::constant(&spec, &[0.3]).unwrap();
        let flow = measure_flow(&spec, 0, &mu(0.4), &alpha).unwrap();
        assert_eq!(cost_J(&spec, &flow, 0, 1, &alpha).unwrap(), 0.7);
        assert_eq!(value_v(&spec, &flow, 0).unwrap().initial(), &[0.7, 0.7]);
        let zero = |_: usize, _: &[f64]| 0.0;
        assert_eq!(
            cost_J_truncated(&spec, &flow, 1, &zero, 0, 0, &alpha).unwrap(),
            0.0
        );
    }

    #[test]
    fn backward_costs_match_forward() {
        let spec = congestion_spec().unwrap();
        let alpha = PureStateControl::from_grid_indices(&spec, &[0, 4, 2, 1]).unwrap();
        let dev = PureStateControl::from_grid_indices(&spec, &[3, 3, 0, 2]).unwrap();
        let flow = measure_flow(&spec, 0, &mu(0.35), &alpha).unwrap();
        let g = terminal_costs(spec.state_model("t").unwrap(), 2, flow.at(2));
        let back = policy_costs(&spec, &flow, 2, &g, 0, &dev).unwrap();
        for x in 0..2 {
            let fwd = cost_J(&spec, &flow, 0, x, &dev).unwrap();
            assert!((fwd - back[x]).abs() < 1e-14);
        }
    }

    #[test]
    fn tower_edges_are_exact() {
        let spec = congestion_spec().unwrap();
        let alpha = PureStateControl::from_grid_indices(&spec, &[0, 4, 2, 1]).unwrap();
        let dev = PureStateControl::from_grid_indices(&spec, &[1, 2, 3, 4]).unwrap();
        assert_eq!(
            tower_check(&spec, 0, &mu(0.4), &alpha, &dev, 0).unwrap(),
            0.0
        );
        assert_eq!(
            tower_check(&spec, 0, &mu(0.4), &alpha, &dev, 2).unwrap(),
            0.0
        );
        assert!(tower_check(&spec, 0, &mu(0.4), &alpha, &dev, 1).unwrap() < 1e-12);
    }

    #[test]
    fn freezing_reproduces_flow() {
        let spec = congestion_spec().unwrap();
        let n = spec.horizon() * spec.d();
        let aff = MuControl::Affine(
            AffineClipped::new(&spec, vec![0.3; n], vec![0.8; n], vec![0.0, 1.0], 0.4).unwrap(),
        );
        let m = mu(0.45);
        let frozen = freeze_mu_dependence(&spec, 0, &m, &aff).unwrap();
        let f1 = measure_flow(&spec, 0, &m, &aff).unwrap();
        let f2 = measure_flow(&spec, 0, &m, &frozen).unwrap();
        assert!(f1.max_w1(&f2) < 1e-12);
        let again =
            freeze_mu_dependence(&spec, 0, &m, &MuControl::Independent(frozen.clone())).unwrap();
        assert_eq!(again, frozen);
    }
}
