//! Flows, costs and values on stopped-path spaces.
//!
//! Every policy is read through [`PathPolicy`], so pure path controls,
//! relaxed controls and lifted state controls share one recursion. The
//! kernel at a node is the atom average `sum_a w(a) q(s, path, mu_s, a; .)`;
//! a Dirac row therefore reproduces the pure recursion bit for bit.

use crate::control::PathPolicy;
use crate::dynamics::{FlowRecord, Terminal, ValueTable};
use crate::error::{Error, Result};
use crate::game::GameSpec;
use crate::measure::PathMeasure;

fn check_policy(policy: &dyn PathPolicy, t: usize) -> Result<()> {
    if policy.start() > t {
        Err(Error::InvalidArgument(format!(
            "policy starts at {} but is needed from {t}",
            policy.start()
        )))
    } else {
        Ok(())
    }
}

/// Averaged kernel and running cost at a node.
fn node_step(
    step: &crate::game::PathStep<'_>,
    policy: &dyn PathPolicy,
    s: usize,
    path: usize,
    d: usize,
    row: &mut [f64],
    agg: &mut [f64],
) -> f64 {
    agg.iter_mut().for_each(|v| *v = 0.0);
    let mut cost = 0.0;
    policy.for_each_atom(s, path, &mut |a, w| {
        step.transition(path, a, row);
        for (g, q) in agg.iter_mut().zip(row.iter()) {
            *g += w * q;
        }
        cost += w * step.running_cost(path, a);
    });
    debug_assert_eq!(agg.len(), d);
    cost
}

/// Population flow on path space from `(t, mu)` to `T`.
pub fn path_measure_flow(
    spec: &GameSpec,
    t: usize,
    mu: &PathMeasure,
    policy: &dyn PathPolicy,
) -> Result<FlowRecord> {
    path_measure_flow_until(spec, t, mu, policy, spec.horizon())
}

pub fn path_measure_flow_until(
    spec: &GameSpec,
    t: usize,
    mu: &PathMeasure,
    policy: &dyn PathPolicy,
    end: usize,
) -> Result<FlowRecord> {
    spec.check_path_cap()?;
    spec.check_time(end)?;
    if mu.time() != t || mu.space().d() != spec.d() {
        return Err(Error::InvalidArgument(format!(
            "measure lives on X_{} but the flow starts at {t}",
            mu.time()
        )));
    }
    if t > end {
        return Err(Error::TimeOutOfRange {
            time: t,
            lo: 0,
            hi: end,
        });
    }
    mu.require_full_support()?;
    check_policy(policy, t)?;
    Ok(path_flow_unchecked(
        spec,
        t,
        mu.weights().to_vec(),
        policy,
        end,
    ))
}

pub(crate) fn path_flow_unchecked(
    spec: &GameSpec,
    t: usize,
    mu: Vec<f64>,
    policy: &dyn PathPolicy,
    end: usize,
) -> FlowRecord {
    let d = spec.d();
    let mut row = vec![0.0; d];
    let mut agg = vec![0.0; d];
    let mut measures = Vec::with_capacity(end - t + 1);
    measures.push(mu);
    for s in t..end {
        let cur = measures.last().expect("nonempty");
        let step = spec.path_step(s, cur);
        let mut next = vec![0.0; cur.len() * d];
        for (p, &m) in cur.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            node_step(&step, policy, s, p, d, &mut row, &mut agg);
            for (x, g) in agg.iter().enumerate() {
                next[p * d + x] = m * g;
            }
        }
        measures.push(next);
    }
    FlowRecord::new(t, measures)
}

/// Laws on `X_r`, `r = s..=end`, of a deviator started on `path` in `X_s`.
pub fn path_individual_law(
    spec: &GameSpec,
    flow: &FlowRecord,
    s: usize,
    path: usize,
    policy: &dyn PathPolicy,
) -> Result<Vec<Vec<f64>>> {
    flow.covers(s, flow.end())?;
    check_policy(policy, s)?;
    let d = spec.d();
    let n = spec.path_space(s).len();
    if path >= n {
        return Err(Error::InvalidArgument(format!("path {path} outside X_{s}")));
    }
    let mut row = vec![0.0; d];
    let mut agg = vec![0.0; d];
    let mut law = vec![0.0; n];
    law[path] = 1.0;
    let mut out = vec![law];
    for r in s..flow.end() {
        let step = spec.path_step(r, flow.at(r));
        let cur = out.last().expect("nonempty");
        let mut next = vec![0.0; cur.len() * d];
        for (p, &m) in cur.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            node_step(&step, policy, r, p, d, &mut row, &mut agg);
            for (x, g) in agg.iter().enumerate() {
                next[p * d + x] = m * g;
            }
        }
        out.push(next);
    }
    Ok(out)
}

/// `G(., mu_T)` over `X_T`.
pub fn path_terminal_costs(spec: &GameSpec, mu_t: &[f64]) -> Vec<f64> {
    let step = spec.path_step(spec.horizon(), mu_t);
    (0..mu_t.len()).map(|p| step.terminal_cost(p)).collect()
}

#[allow(non_snake_case)]
pub fn path_cost_J(
    spec: &GameSpec,
    flow: &FlowRecord,
    s: usize,
    path: usize,
    policy: &dyn PathPolicy,
) -> Result<f64> {
    let horizon = spec.horizon();
    flow.covers(s, horizon)?;
    let g = path_terminal_costs(spec, flow.at(horizon));
    let psi = |y: usize, _: &[f64]| g[y];
    path_cost_J_truncated(spec, flow, horizon, &psi, s, path, policy)
}

/// Forward cost of the path game stopped at `t0`; `psi` reads `(path in X_t0, nu on X_t0)`.
#[allow(non_snake_case)]
pub fn path_cost_J_truncated(
    spec: &GameSpec,
    flow: &FlowRecord,
    t0: usize,
    psi: Terminal<'_>,
    s: usize,
    path: usize,
    policy: &dyn PathPolicy,
) -> Result<f64> {
    flow.covers(s, t0)?;
    check_policy(policy, s)?;
    let d = spec.d();
    let n = spec.path_space(s).len();
    if path >= n {
        return Err(Error::InvalidArgument(format!("path {path} outside X_{s}")));
    }
    let mut row = vec![0.0; d];
    let mut agg = vec![0.0; d];
    // Mass restricted to the descendants of `path`, which form a block.
    let mut lo = path;
    let mut law = vec![1.0];
    let mut total = 0.0;
    for r in s..t0 {
        let step = spec.path_step(r, flow.at(r));
        let mut next = vec![0.0; law.len() * d];
        for (i, &m) in law.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            let p = lo + i;
            total += m * node_step(&step, policy, r, p, d, &mut row, &mut agg);
            for (x, g) in agg.iter().enumerate() {
                next[i * d + x] = m * g;
            }
        }
        law = next;
        lo *= d;
    }
    let nu = flow.at(t0);
    for (i, &m) in law.iter().enumerate() {
        if m != 0.0 {
            total += m * psi(lo + i, nu);
        }
    }
    Ok(total)
}

/// Cost vector over `X_s` by backward recursion from `terminal` on `X_t0`.
pub fn path_policy_costs(
    spec: &GameSpec,
    flow: &FlowRecord,
    t0: usize,
    terminal: &[f64],
    s: usize,
    policy: &dyn PathPolicy,
) -> Result<Vec<f64>> {
    flow.covers(s, t0)?;
    check_policy(policy, s)?;
    if terminal.len() != spec.path_space(t0).len() {
        return Err(Error::DimensionMismatch {
            expected: spec.path_space(t0).len(),
            got: terminal.len(),
        });
    }
    Ok(path_policy_costs_unchecked(
        spec, flow, t0, terminal, s, policy,
    ))
}

pub(crate) fn path_policy_costs_unchecked(
    spec: &GameSpec,
    flow: &FlowRecord,
    t0: usize,
    terminal: &[f64],
    s: usize,
    policy: &dyn PathPolicy,
) -> Vec<f64> {
    let d = spec.d();
    let mut row = vec![0.0; d];
    let mut agg = vec![0.0; d];
    let mut u = terminal.to_vec();
    for r in (s..t0).rev() {
        let step = spec.path_step(r, flow.at(r));
        let n = u.len() / d;
        let mut prev = vec![0.0; n];
        for (p, slot) in prev.iter_mut().enumerate() {
            let cost = node_step(&step, policy, r, p, d, &mut row, &mut agg);
            let cont: f64 = agg
                .iter()
                .zip(&u[p * d..(p + 1) * d])
                .map(|(q, v)| q * v)
                .sum();
            *slot = cost + cont;
        }
        u = prev;
    }
    u
}

/// Value over `X_r`, `r = s..=T`, minimizing over the action grid; this is
/// also the value against relaxed deviations since each step is linear in
/// the row.
pub fn path_value_v(spec: &GameSpec, flow: &FlowRecord, s: usize) -> Result<ValueTable> {
    let horizon = spec.horizon();
    flow.covers(s, horizon)?;
    let g = path_terminal_costs(spec, flow.at(horizon));
    Ok(path_value_backward(spec, flow, horizon, &g, s))
}

pub fn path_value_v_truncated(
    spec: &GameSpec,
    flow: &FlowRecord,
    t0: usize,
    psi: Terminal<'_>,
    s: usize,
) -> Result<ValueTable> {
    flow.covers(s, t0)?;
    let nu = flow.at(t0);
    let terminal: Vec<f64> = (0..nu.len()).map(|y| psi(y, nu)).collect();
    Ok(path_value_backward(spec, flow, t0, &terminal, s))
}

pub(crate) fn path_value_backward(
    spec: &GameSpec,
    flow: &FlowRecord,
    t0: usize,
    terminal: &[f64],
    s: usize,
) -> ValueTable {
    let d = spec.d();
    let grid = spec.actions();
    let mut row = vec![0.0; d];
    let mut values = vec![terminal.to_vec()];
    let mut argmin = Vec::with_capacity(t0 - s);
    for r in (s..t0).rev() {
        let step = spec.path_step(r, flow.at(r));
        let next = values.last().expect("nonempty");
        let n = next.len() / d;
        let mut cur = vec![0.0; n];
        let mut arg = vec![0; n];
        for p in 0..n {
            let mut best = f64::INFINITY;
            for k in 0..grid.len() {
                let a = grid.point(k);
                step.transition(p, a, &mut row);
                let val = step.running_cost(p, a)
                    + row
                        .iter()
                        .zip(&next[p * d..(p + 1) * d])
                        .map(|(q, v)| q * v)
                        .sum::<f64>();
                if val < best {
                    best = val;
                    arg[p] = k;
                }
            }
            cur[p] = best;
        }
        values.push(cur);
        argmin.push(arg);
    }
    values.reverse();
    argmin.reverse();
    ValueTable::new(s, values, argmin)
}

/// Path analogue of the tower identity: `max_x |J - J(t0, psi)|` with
/// `psi(y, nu) = J(t0, nu, policy; y, tilde)`.
pub fn path_tower_check(
    spec: &GameSpec,
    t: usize,
    mu: &PathMeasure,
    policy: &dyn PathPolicy,
    tilde: &dyn PathPolicy,
    t0: usize,
) -> Result<f64> {
    if t0 < t || t0 > spec.horizon() {
        return Err(Error::TimeOutOfRange {
            time: t0,
            lo: t,
            hi: spec.horizon(),
        });
    }
    let flow = path_measure_flow(spec, t, mu, policy)?;
    let psi = |y: usize, nu: &[f64]| -> f64 {
        let nu = PathMeasure::from_raw(spec.path_space(t0), nu.to_vec());
        let tail = path_measure_flow(spec, t0, &nu, policy).expect("continuation flow");
        path_cost_J(spec, &tail, t0, y, tilde).expect("continuation cost")
    };
    let mut worst = 0.0f64;
    for x in 0..mu.weights().len() {
        let full = path_cost_J(spec, &flow, t, x, tilde)?;
        let split = path_cost_J_truncated(spec, &flow, t0, &psi, t, x, tilde)?;
        worst = worst.max((full - split).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{PurePathControl, PureStateControl, RelaxedControl};
    use crate::dynamics::{cost_J, measure_flow, value_v};
    use crate::measure::SimplexMeasure;
    use crate::models::{example71_spec, path_switching_spec};

    #[test]
    fn lifted_state_control_matches_state_flow() {
        let spec = example71_spec(0.25).unwrap();
        let alpha = PureStateControl::from_grid_indices(&spec, &[1, 2, 0, 2]).unwrap();
        let mu = SimplexMeasure::binary(0.3).unwrap();
        let sflow = measure_flow(&spec, 0, &mu, &alpha).unwrap();
        let pflow = path_measure_flow(&spec, 0, &PathMeasure::from_states(&mu), &alpha).unwrap();
        for s in 0..=2 {
            let m = spec.path_space(s).marginal(pflow.at(s));
            for x in 0..2 {
                assert!((m[x] - sflow.at(s)[x]).abs() < 1e-15);
            }
        }
        for x in 0..2 {
            let a = cost_J(&spec, &sflow, 0, x, &alpha).unwrap();
            let b = path_cost_J(&spec, &pflow, 0, x, &alpha).unwrap();
            assert!((a - b).abs() < 1e-15);
        }
        let v = value_v(&spec, &sflow, 0).unwrap();
        let pv = path_value_v(&spec, &pflow, 0).unwrap();
        for x in 0..2 {
            assert!((v.initial()[x] - pv.initial()[x]).abs() < 1e-15);
        }
    }

    #[test]
    fn dirac_rows_reproduce_pure_flow_bitwise() {
        let spec = path_switching_spec(2).unwrap();
        let g = spec.actions().clone();
        let pure =
            PurePathControl::from_fn(&spec, 0, |s, p| g.point((s + p) % 3).to_vec()).unwrap();
        let relaxed = RelaxedControl::dirac(&spec, &pure).unwrap();
        let mu = PathMeasure::uniform(spec.path_space(0));
        let f1 = path_measure_flow(&spec, 0, &mu, &pure).unwrap();
        let f2 = path_measure_flow(&spec, 0, &mu, &relaxed).unwrap();
        assert_eq!(f1, f2);
    }

    #[test]
    fn backward_matches_forward_and_tower() {
        let spec = path_switching_spec(3).unwrap();
        let g = spec.actions().clone();
        let pol =
            PurePathControl::from_fn(&spec, 0, |s, p| g.point((s * 2 + p) % 3).to_vec()).unwrap();
        let dev = RelaxedControl::from_rows(&spec, 0, |s, p| {
            if (s + p) % 2 == 0 {
                vec![0.5, 0.0, 0.5]
            } else {
                vec![0.0, 1.0, 0.0]
            }
        })
        .unwrap();
        let mu = PathMeasure::new(spec.path_space(0), vec![0.4, 0.6]).unwrap();
        let flow = path_measure_flow(&spec, 0, &mu, &pol).unwrap();
        let gt = path_terminal_costs(&spec, flow.at(3));
        let back = path_policy_costs(&spec, &flow, 3, &gt, 0, &dev).unwrap();
        for x in 0..2 {
            let fwd = path_cost_J(&spec, &flow, 0, x, &dev).unwrap();
            assert!((fwd - back[x]).abs() < 1e-14);
        }
        for t0 in 0..=3 {
            assert!(path_tower_check(&spec, 0, &mu, &pol, &dev, t0).unwrap() < 1e-12);
        }
        assert_eq!(path_tower_check(&spec, 0, &mu, &pol, &dev, 3).unwrap(), 0.0);
    }
}
