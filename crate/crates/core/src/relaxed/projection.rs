//! Projection of relaxed path controls onto state-dependent ones for games
//! whose coefficients read only the current state.

use rayon::prelude::*;

use crate::control::{PathPolicy, RelaxedControl, StateRelaxedControl};
use crate::dynamics::{terminal_costs, value_backward, FlowRecord};
use crate::error::{guard, Error, Result};
use crate::game::{GameSpec, StateModel};
use crate::measure::{PathMeasure, SimplexMeasure};
use crate::pathdyn::path_measure_flow;
use crate::setvalue::{
    dedup_generators, enumeration_size, mixed_digits, sup_distance, GapReport, Generator,
};
use crate::TOL_EXACT;

use super::{relaxed_candidates, simplex_lattice};

/// `gamma~(s, x) = sum over paths ending at x of mu^gamma_s(path) gamma(s, path)`,
/// normalized by `mu^gamma_s(x)`.
pub fn state_projection(
    spec: &GameSpec,
    mu: &PathMeasure,
    gamma: &RelaxedControl,
) -> Result<StateRelaxedControl> {
    spec.state_model("state_projection")?;
    let t = mu.time();
    let flow = path_measure_flow(spec, t, mu, gamma)?;
    let d = spec.d();
    let n = gamma.support_len();
    let mut fault = None;
    let out = StateRelaxedControl::from_rows(spec, t, gamma.flat_support().to_vec(), |s, x| {
        let w = flow.at(s);
        let mut row = vec![0.0; n];
        let mut mass = 0.0;
        for p in (x..w.len()).step_by(d) {
            mass += w[p];
            for (r, g) in row.iter_mut().zip(gamma.row(s, p)) {
                *r += w[p] * g;
            }
        }
        if mass <= 0.0 {
            fault.get_or_insert(Error::InvalidMeasure(format!(
                "state {x} carries no mass at time {s}"
            )));
            row[0] = 1.0;
        } else {
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|r| *r /= total);
        }
        row
    })?;
    match fault {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

fn averaged(
    model: &dyn StateModel,
    gamma: &StateRelaxedControl,
    s: usize,
    x: usize,
    mu: &[f64],
    row: &mut [f64],
    agg: &mut [f64],
) -> f64 {
    agg.iter_mut().for_each(|v| *v = 0.0);
    let mut cost = 0.0;
    for (j, &w) in gamma.row(s, x).iter().enumerate() {
        if w > 0.0 {
            let a = gamma.support_point(j);
            model.transition(s, x, mu, a, row);
            for (g, q) in agg.iter_mut().zip(row.iter()) {
                *g += w * q;
            }
            cost += w * model.running_cost(s, x, mu, a);
        }
    }
    cost
}

fn state_flow_unchecked(
    model: &dyn StateModel,
    d: usize,
    horizon: usize,
    t: usize,
    mu: Vec<f64>,
    gamma: &StateRelaxedControl,
) -> FlowRecord {
    let mut measures = vec![mu];
    let (mut row, mut agg) = (vec![0.0; d], vec![0.0; d]);
    for s in t..horizon {
        let cur = measures.last().expect("nonempty");
        let mut next = vec![0.0; d];
        for x in 0..d {
            averaged(model, gamma, s, x, cur, &mut row, &mut agg);
            for (n, q) in next.iter_mut().zip(&agg) {
                *n += cur[x] * q;
            }
        }
        measures.push(next);
    }
    FlowRecord::new(t, measures)
}

fn check_state_relaxed(
    spec: &GameSpec,
    t: usize,
    mu: &SimplexMeasure,
    gamma: &StateRelaxedControl,
) -> Result<()> {
    spec.check_time(t)?;
    if mu.len() != spec.d() {
        return Err(Error::DimensionMismatch {
            expected: spec.d(),
            got: mu.len(),
        });
    }
    if gamma.start() > t {
        return Err(Error::InvalidArgument("control starts after t".into()));
    }
    mu.require_full_support()
}

/// Marginal flow on `S` under a state-dependent relaxed control.
pub fn state_relaxed_flow(
    spec: &GameSpec,
    t: usize,
    mu: &SimplexMeasure,
    gamma: &StateRelaxedControl,
) -> Result<FlowRecord> {
    let model = spec.state_model("state_relaxed_flow")?;
    check_state_relaxed(spec, t, mu, gamma)?;
    Ok(state_flow_unchecked(
        model,
        spec.d(),
        spec.horizon(),
        t,
        mu.weights().to_vec(),
        gamma,
    ))
}

fn state_gap_unchecked(
    model: &dyn StateModel,
    spec: &GameSpec,
    t: usize,
    mu: Vec<f64>,
    gamma: &StateRelaxedControl,
) -> GapReport {
    let (d, horizon) = (spec.d(), spec.horizon());
    let flow = state_flow_unchecked(model, d, horizon, t, mu, gamma);
    let g = terminal_costs(model, d, flow.at(horizon));
    let (mut row, mut agg) = (vec![0.0; d], vec![0.0; d]);
    let mut u = g.clone();
    for s in (t..horizon).rev() {
        let m = flow.at(s);
        u = (0..d)
            .map(|x| {
                let c = averaged(model, gamma, s, x, m, &mut row, &mut agg);
                c + agg.iter().zip(&u).map(|(q, v)| q * v).sum::<f64>()
            })
            .collect();
    }
    let values = value_backward(model, spec, &flow, horizon, &g, t, None)
        .initial()
        .to_vec();
    let gap = u.iter().zip(&values).map(|(j, v)| j - v).collect();
    GapReport {
        gap,
        costs: u,
        values,
        flow,
    }
}

/// Per-state gap of a state-dependent relaxed control.
pub fn state_relaxed_gap(
    spec: &GameSpec,
    t: usize,
    mu: &SimplexMeasure,
    gamma: &StateRelaxedControl,
) -> Result<GapReport> {
    let model = spec.state_model("state_relaxed_gap")?;
    check_state_relaxed(spec, t, mu, gamma)?;
    Ok(state_gap_unchecked(
        model,
        spec,
        t,
        mu.weights().to_vec(),
        gamma,
    ))
}

/// State relaxed controls on `[t, T)` with rows from the lattice of
/// resolution `m`, slot order `(s, x)`.
fn state_lattice_control(
    spec: &GameSpec,
    t: usize,
    rows: &[Vec<f64>],
    id: u64,
) -> StateRelaxedControl {
    let d = spec.d();
    let digits = mixed_digits(id, rows.len(), (spec.horizon() - t) * d);
    StateRelaxedControl::from_rows(spec, t, spec.actions().flat_grid().to_vec(), |s, x| {
        rows[digits[(s - t) * d + x]].clone()
    })
    .expect("lattice rows are probability vectors")
}

/// Comparison of the raw relaxed set values over state and path lattices.
#[derive(Clone, Debug, PartialEq)]
pub struct StatePathReport {
    pub state_len: usize,
    pub path_len: usize,
    /// Largest distance from a state-lattice generator to the path set.
    pub state_in_path: f64,
    /// Number of path-lattice exact equilibria whose projection was checked.
    pub projected: usize,
    /// Largest gap of a projected equilibrium.
    pub projected_gap: f64,
    /// Largest cost change under projection.
    pub projected_cost_diff: f64,
    /// Largest distance from a path-lattice generator to the state-lattice
    /// set; projections may leave the lattice, so this is reported only.
    pub path_in_state: f64,
    pub pass: bool,
}

/// Raw relaxed set values at `t = 0` over the state lattice and the path
/// lattice. Passes when every state-lattice value is a path-lattice value
/// and every path-lattice equilibrium projects to a state equilibrium with
/// the same costs.
pub fn relax_state_path_equivalence(
    spec: &GameSpec,
    mu: &SimplexMeasure,
    m: usize,
) -> Result<StatePathReport> {
    let model = spec.state_model("relax_state_path_equivalence")?;
    mu.require_full_support()?;
    let rows = simplex_lattice(spec.actions().len(), m.max(1));
    let d = spec.d();
    let slots = spec.horizon() * d;
    guard(
        "state relaxed lattice",
        enumeration_size(rows.len(), slots),
        spec.limits().max_controls,
    )?;
    let count = enumeration_size(rows.len(), slots) as u64;
    let state_cands: Vec<Generator> = (0..count)
        .into_par_iter()
        .filter_map(|id| {
            let gamma = state_lattice_control(spec, 0, &rows, id);
            let rep = state_gap_unchecked(model, spec, 0, mu.weights().to_vec(), &gamma);
            let gap = rep.max_gap();
            (gap <= TOL_EXACT).then_some(Generator {
                values: rep.costs,
                control_id: id,
                gap,
                v_values: rep.values,
            })
        })
        .collect();
    let state_set = dedup_generators(state_cands);

    let lifted = PathMeasure::from_states(mu);
    let path_cands = relaxed_candidates(spec, 0, &lifted, TOL_EXACT, m)?;
    let lattice = super::RelaxedLattice::new(spec, 0, spec.horizon(), m)?;
    let checks: Vec<(f64, f64)> = path_cands
        .par_iter()
        .map(|g| {
            let gamma = lattice.control(spec, g.control_id);
            let proj = state_projection(spec, &lifted, &gamma)?;
            let rep = state_gap_unchecked(model, spec, 0, mu.weights().to_vec(), &proj);
            Ok((rep.max_gap(), sup_distance(&rep.costs, &g.values)))
        })
        .collect::<Result<_>>()?;
    let projected_gap = checks.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max);
    let projected_cost_diff = checks.iter().map(|c| c.1).fold(0.0, f64::max);
    let path_set = dedup_generators(path_cands);

    let dist = |phi: &[f64], set: &[Generator]| {
        set.iter()
            .map(|g| sup_distance(phi, &g.values))
            .fold(f64::INFINITY, f64::min)
    };
    let state_in_path = state_set
        .iter()
        .map(|g| dist(&g.values, &path_set))
        .fold(0.0, f64::max);
    let path_in_state = path_set
        .iter()
        .map(|g| dist(&g.values, &state_set))
        .fold(0.0, f64::max);
    let pass = state_in_path <= crate::DEDUP_TOL
        && projected_gap <= TOL_EXACT
        && projected_cost_diff <= 1e-12;
    Ok(StatePathReport {
        state_len: state_set.len(),
        path_len: path_set.len(),
        state_in_path,
        projected: checks.len(),
        projected_gap: if checks.is_empty() {
            0.0
        } else {
            projected_gap
        },
        projected_cost_diff,
        path_in_state,
        pass,
    })
}

/// Largest sup distance between the marginals of the path flow of `gamma`
/// and the state flow of its projection, started at `t = 0`.
pub fn projected_flow_matches(
    spec: &GameSpec,
    mu: &SimplexMeasure,
    gamma: &RelaxedControl,
) -> Result<f64> {
    let lifted = PathMeasure::from_states(mu);
    let proj = state_projection(spec, &lifted, gamma)?;
    let a = path_measure_flow(spec, 0, &lifted, gamma as &dyn PathPolicy)?;
    let b = state_relaxed_flow(spec, 0, mu, &proj)?;
    let mut worst: f64 = 0.0;
    for s in 0..=spec.horizon() {
        let marg = spec.path_space(s).marginal(a.at(s));
        worst = worst.max(sup_distance(&marg, b.at(s)));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{example71_spec, path_switching_spec};

    #[test]
    fn projection_keeps_marginal_flow() {
        let spec = example71_spec(0.25).unwrap();
        let mu = SimplexMeasure::binary(0.3).unwrap();
        let gamma = RelaxedControl::from_rows(&spec, 0, |s, p| match (s * 7 + p) % 3 {
            0 => vec![0.2, 0.3, 0.5],
            1 => vec![1.0, 0.0, 0.0],
            _ => vec![0.0, 0.5, 0.5],
        })
        .unwrap();
        assert!(projected_flow_matches(&spec, &mu, &gamma).unwrap() < 1e-12);
    }

    #[test]
    fn state_control_projects_to_itself() {
        let spec = example71_spec(0.25).unwrap();
        let mu = SimplexMeasure::binary(0.4).unwrap();
        let st = StateRelaxedControl::from_rows(
            &spec,
            0,
            spec.actions().flat_grid().to_vec(),
            |s, x| {
                if s == 0 {
                    vec![1.0, 0.0, 0.0]
                } else if x == 0 {
                    vec![0.5, 0.5, 0.0]
                } else {
                    vec![0.0, 0.0, 1.0]
                }
            },
        )
        .unwrap();
        let proj = state_projection(
            &spec,
            &PathMeasure::from_states(&mu),
            &st.to_path(&spec).unwrap(),
        )
        .unwrap();
        for s in 0..2 {
            for x in 0..2 {
                let diff = sup_distance(proj.row(s, x), st.row(s, x));
                assert!(diff < 1e-15);
            }
        }
    }

    #[test]
    fn path_dependent_spec_faults() {
        let spec = path_switching_spec(2).unwrap();
        let mu = PathMeasure::uniform(spec.path_space(0));
        let gamma = RelaxedControl::from_rows(&spec, 0, |_, _| vec![1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            state_projection(&spec, &mu, &gamma),
            Err(Error::PathDependent(_))
        ));
    }

    #[test]
    fn equivalence_passes_on_example() {
        let spec = example71_spec(0.25).unwrap();
        let mu = SimplexMeasure::binary(0.3).unwrap();
        let rep = relax_state_path_equivalence(&spec, &mu, 2).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rep.projected >= rep.path_len);
    }
}
