//! Relaxed path controls: flows, costs, set values on a finite lattice of
//! rows, and the DPP check. Global measures live in [`global`], the
//! state projection in [`projection`].

pub mod global;
pub mod projection;

use std::collections::HashMap;

use rayon::prelude::*;

use crate::control::{PathPolicy, RelaxedControl};
use crate::dynamics::{FlowRecord, ValueTable};
use crate::error::{guard, Result};
use crate::game::GameSpec;
use crate::measure::PathMeasure;
use crate::pathdyn::{
    path_cost_J, path_flow_unchecked, path_measure_flow, path_policy_costs_unchecked,
    path_terminal_costs, path_value_backward, path_value_v,
};
use crate::setvalue::{
    check_eps, check_path_measure, check_split, dedup_generators, enumeration_size, inclusion_row,
    mixed_digits, Direction, DppReport, Generator, SetValueApprox,
};
use crate::space::path_node_count;
use crate::TOL_EXACT;

pub use global::{
    gamma_from_lambda, global_mfe_gap, global_set_value, lambda_from_gamma, lambda_measure_flow,
    lambda_round_trip, relaxed_global_equivalence, EquivalenceReport, GlobalGapReport,
    GlobalMeasure, RoundTripReport,
};
pub use projection::{
    projected_flow_matches, relax_state_path_equivalence, state_projection, state_relaxed_flow,
    state_relaxed_gap, StatePathReport,
};

/// Default resolution of lattice rows.
pub const DEFAULT_LATTICE_RESOLUTION: usize = 2;

/// Rows `(k_1/m, .., k_n/m)` with nonnegative integers summing to `m`,
/// ordered so that the Dirac row at the first point comes first.
pub fn simplex_lattice(n: usize, m: usize) -> Vec<Vec<f64>> {
    fn rec(n: usize, left: usize, m: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if cur.len() + 1 == n {
            cur.push(left);
            out.push(cur.iter().map(|&k| k as f64 / m as f64).collect());
            cur.pop();
            return;
        }
        for k in (0..=left).rev() {
            cur.push(k);
            rec(n, left - k, m, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 || m == 0 {
        return out;
    }
    rec(n, m, m, &mut Vec::new(), &mut out);
    out
}

/// Relaxed controls whose rows on the nodes of `[from, to)` come from a
/// fixed row list; later nodes carry the Dirac row at grid point 0.
#[derive(Clone, Debug)]
pub struct RelaxedLattice {
    pub from: usize,
    pub to: usize,
    pub d: usize,
    pub rows: Vec<Vec<f64>>,
}

impl RelaxedLattice {
    pub fn new(spec: &GameSpec, from: usize, to: usize, m: usize) -> Result<Self> {
        spec.check_path_cap()?;
        let lat = Self {
            from,
            to,
            d: spec.d(),
            rows: simplex_lattice(spec.actions().len(), m.max(1)),
        };
        guard(
            format!("relaxed lattice on [{from}, {to}) with resolution {m}"),
            lat.size(),
            spec.limits().max_controls,
        )?;
        Ok(lat)
    }

    pub fn slots(&self) -> usize {
        path_node_count(self.d, self.from, self.to)
    }

    pub fn size(&self) -> f64 {
        enumeration_size(self.rows.len(), self.slots())
    }

    pub fn count(&self) -> u64 {
        self.size() as u64
    }

    pub fn control(&self, spec: &GameSpec, id: u64) -> RelaxedControl {
        let digits = mixed_digits(id, self.rows.len(), self.slots());
        let mut i = 0;
        RelaxedControl::from_rows(spec, self.from, |s, _| {
            if s < self.to {
                i += 1;
                self.rows[digits[i - 1]].clone()
            } else {
                self.rows[0].clone()
            }
        })
        .expect("lattice rows are probability vectors")
    }
}

/// Flow of the population under a relaxed control.
pub fn relaxed_measure_flow(
    spec: &GameSpec,
    t: usize,
    mu: &PathMeasure,
    gamma: &dyn PathPolicy,
) -> Result<FlowRecord> {
    path_measure_flow(spec, t, mu, gamma)
}

/// Cost of a relaxed deviator, running cost averaged over its rows.
#[allow(non_snake_case)]
pub fn relaxed_cost_J(
    spec: &GameSpec,
    flow: &FlowRecord,
    s: usize,
    path: usize,
    gamma: &dyn PathPolicy,
) -> Result<f64> {
    path_cost_J(spec, flow, s, path, gamma)
}

/// Value against relaxed deviations; Dirac rows attain the infimum.
pub fn relaxed_value_v(spec: &GameSpec, flow: &FlowRecord, s: usize) -> Result<ValueTable> {
    path_value_v(spec, flow, s)
}

/// Per-path gap of a relaxed control with the costs and values behind it.
#[derive(Clone, Debug, PartialEq)]
pub struct PathGapReport {
    pub gap: Vec<f64>,
    pub costs: Vec<f64>,
    pub values: Vec<f64>,
    pub flow: FlowRecord,
}

impl PathGapReport {
    pub fn max_gap(&self) -> f64 {
        self.gap.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn relaxed_mfe_gap(
    spec: &GameSpec,
    t: usize,
    mu: &PathMeasure,
    gamma: &dyn PathPolicy,
) -> Result<PathGapReport> {
    let flow = path_measure_flow(spec, t, mu, gamma)?;
    let horizon = spec.horizon();
    let g = path_terminal_costs(spec, flow.at(horizon));
    let costs = path_policy_costs_unchecked(spec, &flow, horizon, &g, t, gamma);
    let values = path_value_backward(spec, &flow, horizon, &g, t)
        .initial()
        .to_vec();
    let gap = costs.iter().zip(&values).map(|(j, v)| j - v).collect();
    Ok(PathGapReport {
        gap,
        costs,
        values,
        flow,
    })
}

/// Lattice controls on `[t, T)` with gap at most `threshold`, in id order.
pub(crate) fn relaxed_candidates(
    spec: &GameSpec,
    t: usize,
    mu: &PathMeasure,
    threshold: f64,
    m: usize,
) -> Result<Vec<Generator>> {
    check_path_measure(spec, t, mu)?;
    let lattice = RelaxedLattice::new(spec, t, spec.horizon(), m)?;
    let horizon = spec.horizon();
    Ok((0..lattice.count())
        .into_par_iter()
        .filter_map(|id| {
            let gamma = lattice.control(spec, id);
            let flow = path_flow_unchecked(spec, t, mu.weights().to_vec(), &gamma, horizon);
            let g = path_terminal_costs(spec, flow.at(horizon));
            let j = path_policy_costs_unchecked(spec, &flow, horizon, &g, t, &gamma);
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
        .collect())
}

/// Relaxed set value at tolerance `eps` over the lattice of resolution `m`.
pub fn relaxed_set_value(
    spec: &GameSpec,
    t: usize,
    mu: &PathMeasure,
    eps: f64,
    m: usize,
) -> Result<SetValueApprox> {
    check_eps(eps)?;
    let cands = relaxed_candidates(spec, t, mu, eps + TOL_EXACT, m)?;
    Ok(SetValueApprox {
        epsilon: eps,
        t,
        measure: mu.weights().to_vec(),
        family: format!("relaxed(m={m})"),
        generators: dedup_generators(cands),
    })
}

fn measure_key(w: &[f64]) -> Vec<u64> {
    w.iter().map(|v| v.to_bits()).collect()
}

/// Lattice flows on `[t, t0)` with the undeduplicated continuation
/// candidates at every reached measure, enumerated once up to `max_eps` so
/// the right side can be read off at any smaller tolerance.
struct RhsCache {
    flows: Vec<(RelaxedControl, FlowRecord)>,
    slot: Vec<usize>,
    continuation: Vec<Vec<Generator>>,
}

impl RhsCache {
    fn new(
        spec: &GameSpec,
        t: usize,
        t0: usize,
        mu: &PathMeasure,
        max_eps: f64,
        m: usize,
    ) -> Result<Self> {
        check_path_measure(spec, t, mu)?;
        check_split(spec, t, t0)?;
        let lattice = RelaxedLattice::new(spec, t, t0, m)?;
        let flows: Vec<(RelaxedControl, FlowRecord)> = (0..lattice.count())
            .into_par_iter()
            .map(|id| {
                let gamma = lattice.control(spec, id);
                let flow = path_flow_unchecked(spec, t, mu.weights().to_vec(), &gamma, t0);
                (gamma, flow)
            })
            .collect();
        let mut keys: Vec<Vec<u64>> = Vec::new();
        let mut seen = HashMap::new();
        let mut slot = Vec::with_capacity(flows.len());
        for (_, flow) in &flows {
            let k = measure_key(flow.at(t0));
            let next = keys.len();
            let i = *seen.entry(k.clone()).or_insert(next);
            if i == next {
                keys.push(k);
            }
            slot.push(i);
        }
        let space = spec.path_space(t0);
        let continuation = keys
            .par_iter()
            .map(|k| {
                let nu =
                    PathMeasure::from_raw(space, k.iter().map(|b| f64::from_bits(*b)).collect());
                relaxed_candidates(spec, t0, &nu, max_eps + TOL_EXACT, m)
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            flows,
            slot,
            continuation,
        })
    }

    fn at(
        &self,
        spec: &GameSpec,
        t: usize,
        t0: usize,
        mu: &PathMeasure,
        eps: f64,
        m: usize,
    ) -> SetValueApprox {
        let threshold = eps + TOL_EXACT;
        let continuation: Vec<Vec<Generator>> = self
            .continuation
            .iter()
            .map(|c| dedup_generators(c.iter().filter(|g| g.gap <= threshold).cloned().collect()))
            .collect();
        let cands: Vec<Generator> = self
            .flows
            .par_iter()
            .enumerate()
            .flat_map_iter(|(id, (gamma, flow))| {
                continuation[self.slot[id]]
                    .iter()
                    .filter_map(|psi| {
                        let j = path_policy_costs_unchecked(spec, flow, t0, &psi.values, t, gamma);
                        let v = path_value_backward(spec, flow, t0, &psi.values, t)
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
        SetValueApprox {
            epsilon: eps,
            t,
            measure: mu.weights().to_vec(),
            family: format!("relaxed-dpp(t0={t0},m={m})"),
            generators: dedup_generators(cands),
        }
    }
}

/// Right side of the relaxed DPP over the lattice: pairs `(psi, gamma*)`
/// with `gamma*` on `[t, t0)` and `psi` a continuation generator.
pub fn relaxed_dpp_rhs(
    spec: &GameSpec,
    t: usize,
    t0: usize,
    mu: &PathMeasure,
    eps: f64,
    m: usize,
) -> Result<SetValueApprox> {
    check_eps(eps)?;
    Ok(RhsCache::new(spec, t, t0, mu, eps, m)?.at(spec, t, t0, mu, eps, m))
}

/// Forward factor of the relaxed DPP check.
pub const RELAXED_FORWARD_FACTOR: f64 = 4.0;

/// Relaxed DPP inclusions: right side at `eps` inside the set value at
/// `4 eps`, set value at `eps` inside the right side at `C eps` with
/// `C = c_q^{-(t0 - t)}`.
pub fn relaxed_dpp_check(
    spec: &GameSpec,
    t: usize,
    t0: usize,
    mu: &PathMeasure,
    eps_list: &[f64],
    m: usize,
) -> Result<DppReport> {
    check_split(spec, t, t0)?;
    for &eps in eps_list {
        check_eps(eps)?;
    }
    let c = spec.c_q().powi(-((t0 - t) as i32));
    let max_eps = eps_list.iter().copied().fold(0.0, f64::max);
    // fail on the size guard before enumerating the shorter lattices
    RelaxedLattice::new(spec, t, spec.horizon(), m)?;
    let rhs = RhsCache::new(spec, t, t0, mu, c.max(1.0) * max_eps, m)?;
    let cands = relaxed_candidates(spec, t, mu, RELAXED_FORWARD_FACTOR * max_eps + TOL_EXACT, m)?;
    let set_value = |eps: f64| SetValueApprox {
        epsilon: eps,
        t,
        measure: mu.weights().to_vec(),
        family: format!("relaxed(m={m})"),
        generators: dedup_generators(
            cands
                .iter()
                .filter(|g| g.gap <= eps + TOL_EXACT)
                .cloned()
                .collect(),
        ),
    };
    let mut rows = Vec::new();
    for &eps in eps_list {
        let small_rhs = rhs.at(spec, t, t0, mu, eps, m);
        rows.push(inclusion_row(
            eps,
            Direction::Forward,
            &small_rhs,
            &set_value(RELAXED_FORWARD_FACTOR * eps),
        ));
        let big_rhs = rhs.at(spec, t, t0, mu, c * eps, m);
        rows.push(inclusion_row(
            eps,
            Direction::Backward,
            &set_value(eps),
            &big_rhs,
        ));
    }
    Ok(DppReport {
        t,
        t0,
        constant: c,
        rows,
    })
}
