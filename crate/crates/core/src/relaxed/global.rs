//! Global measures on `X_t x A^t_path`, the transforms between them and
//! relaxed controls, and the global equilibrium gap.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::control::{PathPolicy, PurePathControl, RelaxedControl};
use crate::dynamics::FlowRecord;
use crate::error::{guard, Error, Result};
use crate::game::GameSpec;
use crate::measure::{PathMeasure, SIMPLEX_TOL};
use crate::pathdyn::{path_policy_costs_unchecked, path_terminal_costs, path_value_backward};
use crate::setvalue::{check_eps, check_path_measure, dedup_generators, Generator, SetValueApprox};
use crate::space::PathSpace;
use crate::{DEDUP_TOL, TOL_EXACT};

use super::{relaxed_set_value, RelaxedLattice};

/// Finite measure over pairs `(x in X_t, pure path control on [t, T))`.
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalMeasure {
    t: usize,
    d: usize,
    atoms: Vec<Vec<(PurePathControl, f64)>>,
}

impl GlobalMeasure {
    /// `atoms[x]` lists the weighted controls attached to `x in X_t`.
    pub fn new(spec: &GameSpec, t: usize, atoms: Vec<Vec<(PurePathControl, f64)>>) -> Result<Self> {
        spec.check_time(t)?;
        spec.check_path_cap()?;
        let space = spec.path_space(t);
        if atoms.len() != space.len() {
            return Err(Error::DimensionMismatch {
                expected: space.len(),
                got: atoms.len(),
            });
        }
        let mut total = 0.0;
        for (a, w) in atoms.iter().flatten() {
            if a.start() != t || a.horizon() != spec.horizon() || a.d() != spec.d() {
                return Err(Error::InvalidArgument(
                    "control does not live on [t, T)".into(),
                ));
            }
            if !(*w >= 0.0) {
                return Err(Error::InvalidMeasure(format!("negative atom weight {w}")));
            }
            total += w;
        }
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidMeasure(format!(
                "global measure has mass {total}"
            )));
        }
        Ok(Self {
            t,
            d: spec.d(),
            atoms,
        })
    }

    pub fn time(&self) -> usize {
        self.t
    }

    pub fn atoms(&self, x: usize) -> &[(PurePathControl, f64)] {
        &self.atoms[x]
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.iter().map(Vec::len).sum()
    }

    /// `Lambda(x, A^t_path)` for every `x in X_t`.
    pub fn start_measure(&self) -> Vec<f64> {
        self.atoms
            .iter()
            .map(|a| a.iter().map(|(_, w)| w).sum())
            .collect()
    }

    /// Weights merged over controls that agree on the nodes reachable from
    /// their root; keys are `(x, action bits on those nodes)`.
    pub fn canonical(&self) -> BTreeMap<(usize, Vec<u64>), f64> {
        let space = PathSpace::new(self.d, self.t);
        let mut out = BTreeMap::new();
        for (x, list) in self.atoms.iter().enumerate() {
            for (a, w) in list {
                if *w == 0.0 {
                    continue;
                }
                let mut key = Vec::new();
                for s in self.t..a.horizon() {
                    for p in space.descendants(x, s) {
                        key.extend(a.action(s, p).iter().map(|v| v.to_bits()));
                    }
                }
                *out.entry((x, key)).or_insert(0.0) += w;
            }
        }
        out
    }
}

/// Flow together with each atom's own law `Q^t_s Lambda(x, d alpha)` on `X_s`.
fn atom_laws(spec: &GameSpec, lam: &GlobalMeasure) -> (FlowRecord, Vec<Vec<Vec<f64>>>) {
    let (t, d, horizon) = (lam.t, lam.d, spec.horizon());
    let list: Vec<(usize, &PurePathControl, f64)> = lam
        .atoms
        .iter()
        .enumerate()
        .flat_map(|(x, l)| l.iter().map(move |(a, w)| (x, a, *w)))
        .collect();
    let n0 = spec.path_space(t).len();
    let mut laws: Vec<Vec<Vec<f64>>> = list
        .iter()
        .map(|(x, _, w)| {
            let mut l = vec![0.0; n0];
            l[*x] = *w;
            vec![l]
        })
        .collect();
    let mut measures = Vec::with_capacity(horizon - t + 1);
    let mut row = vec![0.0; d];
    for s in t..=horizon {
        let space = spec.path_space(s);
        let mut mu = vec![0.0; space.len()];
        for l in &laws {
            for (m, v) in mu.iter_mut().zip(l.last().expect("law per step")) {
                *m += v;
            }
        }
        if s < horizon {
            let step = spec.path_step(s, &mu);
            for ((x, a, _), l) in list.iter().zip(laws.iter_mut()) {
                let cur = l.last().expect("law per step");
                let mut next = vec![0.0; space.len() * d];
                for p in PathSpace::new(d, t).descendants(*x, s) {
                    if cur[p] == 0.0 {
                        continue;
                    }
                    step.transition(p, a.action(s, p), &mut row);
                    for (y, q) in row.iter().enumerate() {
                        next[space.child(p, y)] += cur[p] * q;
                    }
                }
                l.push(next);
            }
        }
        measures.push(mu);
    }
    (FlowRecord::new(t, measures), laws)
}

/// `mu^Lambda_s`, `s = t..=T`.
pub fn lambda_measure_flow(spec: &GameSpec, lam: &GlobalMeasure) -> Result<FlowRecord> {
    check_global(spec, lam)?;
    Ok(atom_laws(spec, lam).0)
}

fn check_global(spec: &GameSpec, lam: &GlobalMeasure) -> Result<()> {
    spec.check_path_cap()?;
    if lam.d != spec.d() || lam.t > spec.horizon() {
        return Err(Error::InvalidArgument(
            "global measure does not match the game".into(),
        ));
    }
    Ok(())
}

/// `gamma^Lambda`: rows are the `Q`-weighted laws of the atoms' actions.
/// The support is the spec grid when every action lies on it.
pub fn gamma_from_lambda(spec: &GameSpec, lam: &GlobalMeasure) -> Result<RelaxedControl> {
    check_global(spec, lam)?;
    let (flow, laws) = atom_laws(spec, lam);
    let grid = spec.actions();
    let dim = grid.dim();
    let controls: Vec<&PurePathControl> = lam.atoms.iter().flatten().map(|(a, _)| a).collect();
    let on_grid = controls.iter().all(|a| {
        a.flat_actions()
            .chunks(dim)
            .all(|p| grid.grid_index(p).is_some())
    });
    let support: Vec<f64> = if on_grid {
        grid.flat_grid().to_vec()
    } else {
        let mut pts: Vec<Vec<f64>> = Vec::new();
        for a in &controls {
            for p in a.flat_actions().chunks(dim) {
                if !pts.iter().any(|q| q.as_slice() == p) {
                    pts.push(p.to_vec());
                }
            }
        }
        pts.concat()
    };
    let n = support.len() / dim;
    let index = |a: &[f64]| -> usize {
        if on_grid {
            grid.grid_index(a).expect("checked on grid")
        } else {
            support
                .chunks(dim)
                .position(|q| q == a)
                .expect("collected above")
        }
    };
    let t = lam.t;
    let mut fault = None;
    let gamma = RelaxedControl::with_support(spec, t, support.clone(), |s, p| {
        let mass = flow.at(s)[p];
        let mut row = vec![0.0; n];
        if mass <= 0.0 {
            fault.get_or_insert(Error::InvalidMeasure(format!(
                "path {} carries no mass at time {s}",
                spec.path_space(s).label(p)
            )));
            row[0] = 1.0;
            return row;
        }
        for (a, l) in controls.iter().zip(&laws) {
            let w = l[s - t][p];
            if w > 0.0 {
                row[index(a.action(s, p))] += w;
            }
        }
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= total);
        row
    });
    match fault {
        Some(e) => Err(e),
        None => gamma,
    }
}

/// `Lambda^gamma(x, d alpha) = mu(x) prod gamma(s, x~, d alpha(s, x~))` over
/// the nodes reachable from `x`; other nodes carry the first support point.
pub fn lambda_from_gamma(
    spec: &GameSpec,
    t: usize,
    mu: &PathMeasure,
    gamma: &RelaxedControl,
) -> Result<GlobalMeasure> {
    spec.check_time(t)?;
    spec.check_path_cap()?;
    if mu.time() != t || gamma.start() > t {
        return Err(Error::InvalidArgument(
            "measure and control must cover time t".into(),
        ));
    }
    let (d, horizon) = (spec.d(), spec.horizon());
    let space = spec.path_space(t);
    let nodes: Vec<Vec<(usize, usize)>> = (0..space.len())
        .map(|x| {
            (t..horizon)
                .flat_map(|s| space.descendants(x, s).map(move |p| (s, p)))
                .collect()
        })
        .collect();
    let positive = |s: usize, p: usize| -> Vec<(usize, f64)> {
        gamma
            .row(s, p)
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(j, w)| (j, *w))
            .collect()
    };
    let estimate: f64 = nodes
        .iter()
        .zip(mu.weights())
        .filter(|(_, w)| **w > 0.0)
        .map(|(ns, _)| {
            ns.iter()
                .map(|&(s, p)| positive(s, p).len() as f64)
                .product::<f64>()
        })
        .sum();
    guard(
        "support of the global measure",
        estimate,
        spec.limits().max_lambda_atoms,
    )?;
    let dim = spec.actions().dim();
    let mut atoms = Vec::with_capacity(space.len());
    for (x, ns) in nodes.iter().enumerate() {
        let mut list = Vec::new();
        let wx = mu.weights()[x];
        if wx > 0.0 {
            let choices: Vec<Vec<(usize, f64)>> = ns.iter().map(|&(s, p)| positive(s, p)).collect();
            let total: usize = choices.iter().map(Vec::len).product();
            for mut id in 0..total {
                let mut w = wx;
                let mut pick: BTreeMap<(usize, usize), usize> = BTreeMap::new();
                // last node varies fastest
                for (i, &(s, p)) in ns.iter().enumerate().rev() {
                    let (j, r) = choices[i][id % choices[i].len()];
                    id /= choices[i].len();
                    w *= r;
                    pick.insert((s, p), j);
                }
                let control = PurePathControl::from_fn_unchecked(d, horizon, t, dim, |s, p| {
                    gamma
                        .support_point(pick.get(&(s, p)).copied().unwrap_or(0))
                        .to_vec()
                });
                list.push((control, w));
            }
        }
        atoms.push(list);
    }
    Ok(GlobalMeasure { t, d, atoms })
}

/// Per-`x` global gap with the ingredients behind it.
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalGapReport {
    /// `int [J(t, Lambda; x, alpha) - v(t, Lambda; x)] Lambda(x, d alpha)`.
    pub gap: Vec<f64>,
    /// `v(t, Lambda; .)`.
    pub values: Vec<f64>,
    /// `int J(t, Lambda; x, alpha) Lambda(x, d alpha)`.
    pub weighted_costs: Vec<f64>,
    pub flow: FlowRecord,
}

impl GlobalGapReport {
    pub fn max_gap(&self) -> f64 {
        self.gap.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn global_mfe_gap(spec: &GameSpec, lam: &GlobalMeasure) -> Result<GlobalGapReport> {
    check_global(spec, lam)?;
    Ok(global_gap_unchecked(spec, lam))
}

fn global_gap_unchecked(spec: &GameSpec, lam: &GlobalMeasure) -> GlobalGapReport {
    let horizon = spec.horizon();
    let t = lam.t;
    let flow = atom_laws(spec, lam).0;
    let g = path_terminal_costs(spec, flow.at(horizon));
    let values = path_value_backward(spec, &flow, horizon, &g, t)
        .initial()
        .to_vec();
    let mut gap = vec![0.0; values.len()];
    let mut weighted = vec![0.0; values.len()];
    for (x, list) in lam.atoms.iter().enumerate() {
        for (a, w) in list {
            if *w == 0.0 {
                continue;
            }
            let j =
                path_policy_costs_unchecked(spec, &flow, horizon, &g, t, a as &dyn PathPolicy)[x];
            gap[x] += w * (j - values[x]);
            weighted[x] += w * j;
        }
    }
    GlobalGapReport {
        gap,
        values,
        weighted_costs: weighted,
        flow,
    }
}

/// Global set value over `Lambda^gamma`, `gamma` in the lattice of
/// resolution `m`; generators are `v(t, Lambda*; .)`.
pub fn global_set_value(
    spec: &GameSpec,
    t: usize,
    mu: &PathMeasure,
    eps: f64,
    m: usize,
) -> Result<SetValueApprox> {
    check_eps(eps)?;
    check_path_measure(spec, t, mu)?;
    let lattice = RelaxedLattice::new(spec, t, spec.horizon(), m)?;
    // one representative to surface the support guard before the parallel map
    lambda_from_gamma(spec, t, mu, &lattice.control(spec, lattice.count() - 1))?;
    let threshold = eps + TOL_EXACT;
    let cands: Vec<Generator> = (0..lattice.count())
        .into_par_iter()
        .filter_map(|id| {
            let gamma = lattice.control(spec, id);
            let lam = lambda_from_gamma(spec, t, mu, &gamma).ok()?;
            let rep = global_gap_unchecked(spec, &lam);
            let gap = rep.max_gap();
            (gap <= threshold).then(|| Generator {
                values: rep.values.clone(),
                control_id: id,
                gap,
                v_values: rep.values,
            })
        })
        .collect();
    Ok(SetValueApprox {
        epsilon: eps,
        t,
        measure: mu.weights().to_vec(),
        family: format!("global(m={m})"),
        generators: dedup_generators(cands),
    })
}

/// Two-way comparison of the relaxed and global set values on one lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct EquivalenceReport {
    pub epsilon: f64,
    /// `c_mu = min_x mu(x)`.
    pub c_mu: f64,
    pub relaxed_len: usize,
    pub global_len: usize,
    /// Largest distance from a relaxed(eps) generator to global(eps).
    pub relaxed_in_global: f64,
    /// Largest distance from a global(eps) generator to relaxed(eps / c_mu).
    pub global_in_relaxed: f64,
    pub pass: bool,
}

/// Relaxed(eps) generators lie in global(eps), and global(eps) generators
/// lie in relaxed(eps / c_mu).
pub fn relaxed_global_equivalence(
    spec: &GameSpec,
    t: usize,
    mu: &PathMeasure,
    eps: f64,
    m: usize,
) -> Result<EquivalenceReport> {
    let c_mu = mu.weights().iter().copied().fold(f64::INFINITY, f64::min);
    let relaxed = relaxed_set_value(spec, t, mu, eps, m)?;
    let global = global_set_value(spec, t, mu, eps, m)?;
    let relaxed_wide = relaxed_set_value(spec, t, mu, eps / c_mu, m)?;
    let worst = |inner: &SetValueApprox, outer: &SetValueApprox| {
        inner
            .generators
            .iter()
            .map(|g| outer.distance(&g.values))
            .fold(0.0, f64::max)
    };
    let a = worst(&relaxed, &global);
    let b = worst(&global, &relaxed_wide);
    Ok(EquivalenceReport {
        epsilon: eps,
        c_mu,
        relaxed_len: relaxed.len(),
        global_len: global.len(),
        relaxed_in_global: a,
        global_in_relaxed: b,
        pass: a <= eps + DEDUP_TOL && b <= eps / c_mu + DEDUP_TOL,
    })
}

/// Comparison of `Lambda` with `Lambda^(gamma^Lambda)` after merging atoms
/// that agree on reachable nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundTripReport {
    pub atoms_before: usize,
    pub atoms_after: usize,
    pub max_weight_diff: f64,
    pub identical: bool,
}

pub fn lambda_round_trip(spec: &GameSpec, lam: &GlobalMeasure) -> Result<RoundTripReport> {
    let gamma = gamma_from_lambda(spec, lam)?;
    let mu = PathMeasure::new(spec.path_space(lam.t), lam.start_measure())?;
    let back = lambda_from_gamma(spec, lam.t, &mu, &gamma)?;
    let a = lam.canonical();
    let b = back.canonical();
    let mut diff: f64 = 0.0;
    for (k, w) in &a {
        diff = diff.max((w - b.get(k).copied().unwrap_or(0.0)).abs());
    }
    for (k, w) in &b {
        if !a.contains_key(k) {
            diff = diff.max(w.abs());
        }
    }
    Ok(RoundTripReport {
        atoms_before: a.len(),
        atoms_after: b.len(),
        max_weight_diff: diff,
        identical: diff <= 1e-12,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::SimplexMeasure;
    use crate::models::{example71_spec, path_switching_spec};
    use crate::pathdyn::{path_cost_J, path_measure_flow};

    fn mixed(spec: &GameSpec) -> RelaxedControl {
        RelaxedControl::from_rows(spec, 0, |s, p| match (s + p) % 3 {
            0 => vec![0.5, 0.5, 0.0],
            1 => vec![0.0, 0.0, 1.0],
            _ => vec![0.25, 0.25, 0.5],
        })
        .unwrap()
    }

    #[test]
    fn lambda_of_gamma_identities() {
        let spec = path_switching_spec(2).unwrap();
        let mu = PathMeasure::new(spec.path_space(0), vec![0.4, 0.6]).unwrap();
        let gamma = mixed(&spec);
        let lam = lambda_from_gamma(&spec, 0, &mu, &gamma).unwrap();
        let start = lam.start_measure();
        assert!((start[0] - 0.4).abs() < 1e-15 && (start[1] - 0.6).abs() < 1e-15);
        let f1 = lambda_measure_flow(&spec, &lam).unwrap();
        let f2 = path_measure_flow(&spec, 0, &mu, &gamma).unwrap();
        assert!(f1.max_w1(&f2) < 1e-12);
        let back = gamma_from_lambda(&spec, &lam).unwrap();
        assert!(back.max_abs_diff(&gamma) < 1e-12);
        let rep = global_mfe_gap(&spec, &lam).unwrap();
        for x in 0..2 {
            let j = path_cost_J(&spec, &f2, 0, x, &gamma).unwrap();
            assert!((rep.weighted_costs[x] / mu.weights()[x] - j).abs() < 1e-12);
        }
    }

    #[test]
    fn single_control_lambda_is_dirac() {
        let spec = path_switching_spec(2).unwrap();
        let a = PurePathControl::from_fn(&spec, 0, |s, p| {
            vec![if (s + p) % 2 == 0 { 0.25 } else { 0.75 }]
        })
        .unwrap();
        let lam = GlobalMeasure::new(
            &spec,
            0,
            vec![vec![(a.clone(), 0.3)], vec![(a.clone(), 0.7)]],
        )
        .unwrap();
        let gamma = gamma_from_lambda(&spec, &lam).unwrap();
        assert!(gamma.is_pure());
        assert_eq!(
            gamma.max_abs_diff(&RelaxedControl::dirac(&spec, &a).unwrap()),
            0.0
        );
    }

    #[test]
    fn global_gap_scales_relaxed_gap() {
        let spec = path_switching_spec(2).unwrap();
        let mu = PathMeasure::new(spec.path_space(0), vec![0.4, 0.6]).unwrap();
        let gamma = mixed(&spec);
        let lam = lambda_from_gamma(&spec, 0, &mu, &gamma).unwrap();
        let g = global_mfe_gap(&spec, &lam).unwrap();
        let r = super::super::relaxed_mfe_gap(&spec, 0, &mu, &gamma).unwrap();
        for x in 0..2 {
            assert!((g.gap[x] - mu.weights()[x] * r.gap[x]).abs() < 1e-12);
        }
    }

    #[test]
    fn equivalence_on_example() {
        let spec = example71_spec(0.25).unwrap();
        let mu = PathMeasure::from_states(&SimplexMeasure::binary(0.3).unwrap());
        for eps in [0.0, 0.05] {
            let rep = relaxed_global_equivalence(&spec, 0, &mu, eps, 2).unwrap();
            assert!(rep.pass, "{rep:?}");
        }
    }

    #[test]
    fn round_trip_of_lambda_gamma_is_identity() {
        let spec = path_switching_spec(2).unwrap();
        let mu = PathMeasure::new(spec.path_space(0), vec![0.4, 0.6]).unwrap();
        let lam = lambda_from_gamma(&spec, 0, &mu, &mixed(&spec)).unwrap();
        assert!(lambda_round_trip(&spec, &lam).unwrap().identical);
    }

    #[test]
    fn correlated_lambda_is_not_recovered() {
        // two controls that correlate the actions at time 0 and time 1
        let spec = path_switching_spec(2).unwrap();
        let a = PurePathControl::from_fn(&spec, 0, |_, _| vec![0.25]).unwrap();
        let b = PurePathControl::from_fn(&spec, 0, |_, _| vec![0.75]).unwrap();
        let lam = GlobalMeasure::new(
            &spec,
            0,
            vec![vec![(a.clone(), 0.25), (b.clone(), 0.25)], vec![(a, 0.5)]],
        )
        .unwrap();
        let rep = lambda_round_trip(&spec, &lam).unwrap();
        assert!(!rep.identical);
        assert!(rep.atoms_after > rep.atoms_before);
    }
}
