//! Integrated equilibrium gaps, damped fixed-point search, sampled set
//! values and the DPP probe.

use super::grid::{backward_solve, flow_from, GridFlow, Policy, Scheme};
use super::{ContControl, ControlTable, DiffusionSpec};
use crate::error::{Error, Result};

/// Gaps above `-SOLVER_TOL` count as nonnegative and gaps below it as zero.
pub const SOLVER_TOL: f64 = 1e-8;

/// Sup change of the control table at which the search stops.
pub const FIXED_POINT_TOL: f64 = 1e-9;

/// `L1(mu)` distance below which two sampled values are merged.
const VALUE_MERGE_TOL: f64 = 1e-6;

/// Costs, values and the integrated gap of a control at `(t, mu)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ContGap {
    pub gap: f64,
    pub costs: Vec<f64>,
    pub values: Vec<f64>,
    pub masses: Vec<f64>,
    pub flow: GridFlow,
}

impl ContGap {
    pub fn pointwise_max(&self) -> f64 {
        self.costs
            .iter()
            .zip(&self.values)
            .zip(&self.masses)
            .filter(|(_, w)| **w > 0.0)
            .map(|((j, v), _)| j - v)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `mu{|J - v| > eps}`, the probability form of the gap.
    pub fn alternate_mass(&self, eps: f64) -> f64 {
        self.costs
            .iter()
            .zip(&self.values)
            .zip(&self.masses)
            .filter(|((j, v), _)| (*j - *v).abs() > eps)
            .map(|(_, w)| w)
            .sum()
    }

    pub fn alternate_holds(&self, eps: f64) -> bool {
        self.alternate_mass(eps) < eps
    }
}

fn l1_distance(masses: &[f64], a: &[f64], b: &[f64]) -> f64 {
    masses
        .iter()
        .zip(a.iter().zip(b))
        .map(|(w, (x, y))| w * (x - y).abs())
        .sum()
}

pub(crate) fn gap_at(
    spec: &DiffusionSpec,
    start: usize,
    mu: &[f64],
    alpha: &ContControl,
) -> Result<ContGap> {
    let flow = flow_from(spec, start, mu, alpha, Scheme::Implicit)?;
    let end = spec.steps();
    let v = backward_solve(
        spec,
        &flow,
        start,
        end,
        None,
        Policy::Optimize { extra: Some(alpha) },
    )?;
    let u = backward_solve(spec, &flow, start, end, None, Policy::Follow(alpha))?;
    let costs = u.initial().to_vec();
    let values = v.initial().to_vec();
    let gap = mu
        .iter()
        .zip(costs.iter().zip(&values))
        .map(|(w, (j, v))| w * (j - v))
        .sum();
    Ok(ContGap {
        gap,
        costs,
        values,
        masses: mu.to_vec(),
        flow,
    })
}

/// `int (J - v) dmu` for `alpha` started from `mu` at time `t`. The HJB
/// minimizes over the action grid and the actions of `alpha`, so the gap
/// is nonnegative up to rounding.
pub fn cont_mfe_gap(
    spec: &DiffusionSpec,
    t: f64,
    mu: &[f64],
    alpha: &ContControl,
) -> Result<ContGap> {
    gap_at(spec, spec.time_index(t)?, mu, alpha)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchOptions {
    pub iterations: usize,
    /// Weight kept on the previous control in each update.
    pub damping: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            iterations: 200,
            damping: 0.5,
        }
    }
}

/// Limit of one damped iteration `alpha -> HJB feedback on the flow of alpha`.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedPointRun {
    pub seed: usize,
    pub control: ControlTable,
    pub gap: ContGap,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
}

fn fixed_point_at(
    spec: &DiffusionSpec,
    start: usize,
    mu: &[f64],
    alpha0: &ContControl,
    opts: SearchOptions,
    seed: usize,
) -> Result<FixedPointRun> {
    if !(0.0..1.0).contains(&opts.damping) {
        return Err(Error::InvalidArgument(format!(
            "damping {} outside [0, 1)",
            opts.damping
        )));
    }
    let first = flow_from(spec, start, mu, alpha0, Scheme::Implicit)?;
    let mut cur = alpha0.freeze(spec, start, first.stats());
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < opts.iterations {
        iterations += 1;
        let alpha = ContControl::Table(cur.clone());
        let flow = flow_from(spec, start, mu, &alpha, Scheme::Implicit)?;
        let v = backward_solve(
            spec,
            &flow,
            start,
            spec.steps(),
            None,
            Policy::Optimize {
                extra: Some(&alpha),
            },
        )?;
        let feedback = v.feedback();
        let rows = cur
            .rows()
            .iter()
            .zip(feedback.rows())
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| opts.damping * x + (1.0 - opts.damping) * y)
                    .collect()
            })
            .collect();
        let next = ControlTable::new(*spec.grid(), spec.dt(), start, rows)?;
        residual = next.distance(&cur);
        cur = next;
        if residual <= FIXED_POINT_TOL {
            break;
        }
    }
    let gap = gap_at(spec, start, mu, &ContControl::Table(cur.clone()))?;
    Ok(FixedPointRun {
        seed,
        control: cur,
        gap,
        converged: residual <= FIXED_POINT_TOL,
        iterations,
        residual,
    })
}

/// Damped fixed-point search from `alpha0`. Non-convergence is reported in
/// the run, not raised.
pub fn mfe_fixed_point(
    spec: &DiffusionSpec,
    t: f64,
    mu: &[f64],
    alpha0: &ContControl,
    iterations: usize,
    damping: f64,
) -> Result<FixedPointRun> {
    fixed_point_at(
        spec,
        spec.time_index(t)?,
        mu,
        alpha0,
        SearchOptions {
            iterations,
            damping,
        },
        0,
    )
}

/// Constant controls at both ends and the middle of the action box.
pub fn default_seeds(spec: &DiffusionSpec) -> Vec<ContControl> {
    let (lo, hi) = spec.action_box();
    let mut out = vec![ContControl::Constant(lo)];
    if hi > lo {
        out.push(ContControl::Constant(0.5 * (lo + hi)));
        out.push(ContControl::Constant(hi));
    }
    out
}

fn runs_at(
    spec: &DiffusionSpec,
    start: usize,
    mu: &[f64],
    seeds: &[ContControl],
    opts: SearchOptions,
) -> Result<Vec<FixedPointRun>> {
    seeds
        .iter()
        .enumerate()
        .map(|(i, s)| fixed_point_at(spec, start, mu, s, opts, i))
        .collect()
}

/// Runs whose costs differ pairwise by more than `tol` in `L1(mu)`.
pub fn distinct_runs(runs: &[FixedPointRun], tol: f64) -> Vec<&FixedPointRun> {
    let mut out: Vec<&FixedPointRun> = Vec::new();
    for r in runs {
        if out
            .iter()
            .all(|o| l1_distance(&r.gap.masses, &o.gap.costs, &r.gap.costs) > tol)
        {
            out.push(r);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContGenerator {
    pub seed: usize,
    pub values: Vec<f64>,
    pub gap: f64,
}

/// Sampled inner approximation of the set value at `(t, mu)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ContSetValue {
    pub epsilon: f64,
    pub masses: Vec<f64>,
    pub generators: Vec<ContGenerator>,
    /// Set when `epsilon` is below the solver tolerance; the set is then
    /// left empty.
    pub below_solver_tol: bool,
    pub runs: usize,
    pub converged: usize,
}

impl ContSetValue {
    /// Smallest `L1(mu)` distance from `phi` to a generator.
    pub fn distance(&self, phi: &[f64]) -> f64 {
        self.generators
            .iter()
            .map(|g| l1_distance(&self.masses, phi, &g.values))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, phi: &[f64]) -> bool {
        self.distance(phi) <= self.epsilon
    }
}

pub fn cont_set_value_sample(
    spec: &DiffusionSpec,
    t: f64,
    mu: &[f64],
    eps: f64,
    seeds: &[ContControl],
    opts: SearchOptions,
) -> Result<ContSetValue> {
    let start = spec.time_index(t)?;
    if eps < SOLVER_TOL {
        return Ok(ContSetValue {
            epsilon: eps,
            masses: mu.to_vec(),
            generators: Vec::new(),
            below_solver_tol: true,
            runs: 0,
            converged: 0,
        });
    }
    let runs = runs_at(spec, start, mu, seeds, opts)?;
    let converged = runs.iter().filter(|r| r.converged).count();
    let passing: Vec<FixedPointRun> = runs.iter().filter(|r| r.gap.gap <= eps).cloned().collect();
    let generators = distinct_runs(&passing, VALUE_MERGE_TOL)
        .into_iter()
        .map(|r| ContGenerator {
            seed: r.seed,
            values: r.gap.costs.clone(),
            gap: r.gap.gap,
        })
        .collect();
    Ok(ContSetValue {
        epsilon: eps,
        masses: mu.to_vec(),
        generators,
        below_solver_tol: false,
        runs: runs.len(),
        converged,
    })
}

/// `first` on `[first.start, t0)` followed by `second` on `[t0, T)`.
pub fn concatenate(first: &ControlTable, second: &ControlTable, t0: usize) -> Result<ControlTable> {
    if first.start() > t0
        || second.start() > t0
        || first.grid() != second.grid()
        || first.dt() != second.dt()
    {
        return Err(Error::InvalidArgument(
            "controls do not cover the concatenation".into(),
        ));
    }
    let mut rows: Vec<Vec<f64>> = (first.start()..t0).map(|n| first.row(n).to_vec()).collect();
    rows.extend((t0..second.end()).map(|n| second.row(n).to_vec()));
    ControlTable::new(*first.grid(), first.dt(), first.start(), rows)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DppRow {
    pub outer_seed: usize,
    /// Continuation seed, absent for forward rows.
    pub inner_seed: Option<usize>,
    pub outer_gap: f64,
    /// Gap of the outer control restricted to `[t0, T]`, or of the
    /// continuation control on backward rows.
    pub continuation_gap: f64,
    /// Gap of the outer control in the game stopped at `t0` with terminal
    /// cost the continuation costs.
    pub stopped_gap: f64,
    /// Gap of the concatenated control at `(t, mu)`.
    pub concat_gap: f64,
    /// `L1(mu)` distance between the stopped-game costs and the costs of
    /// the concatenated control.
    pub membership: f64,
    pub within: bool,
}

/// Sampled check of both inclusions of the set-valued DPP.
#[derive(Clone, Debug, PartialEq)]
pub struct DppProbe {
    pub epsilon: f64,
    pub forward: Vec<DppRow>,
    pub backward: Vec<DppRow>,
    /// Pairs whose stopped gap exceeded `epsilon`; not checked further.
    pub skipped: usize,
    pub pass: bool,
}

/// Forward rows take each outer candidate with gap at most `eps` and check
/// that its continuation and the stopped game it induces stay within `4 eps`.
/// Backward rows take continuation candidates at `(t0, mu_t0)`, keep outer
/// candidates whose stopped gap is at most `eps`, and check the gap and cost
/// distance of the concatenation against `4 eps`.
pub fn cont_dpp_probe(
    spec: &DiffusionSpec,
    t: f64,
    t0: f64,
    mu: &[f64],
    eps: f64,
    seeds: &[ContControl],
    opts: SearchOptions,
) -> Result<DppProbe> {
    let start = spec.time_index(t)?;
    let mid = spec.time_index(t0)?;
    if mid < start {
        return Err(Error::InvalidArgument("t0 precedes t".into()));
    }
    let bound = 4.0 * eps;
    let outer = runs_at(spec, start, mu, seeds, opts)?;
    let mut forward = Vec::new();
    let mut backward = Vec::new();
    let mut skipped = 0;
    for run in &outer {
        let alpha = ContControl::Table(run.control.clone());
        let flow = &run.gap.flow;
        let nu = flow.at(mid).to_vec();
        let stopped = |psi: &[f64]| -> Result<(f64, Vec<f64>)> {
            let v = backward_solve(
                spec,
                flow,
                start,
                mid,
                Some(psi),
                Policy::Optimize {
                    extra: Some(&alpha),
                },
            )?;
            let u = backward_solve(spec, flow, start, mid, Some(psi), Policy::Follow(&alpha))?;
            let gap = mu
                .iter()
                .zip(u.initial().iter().zip(v.initial()))
                .map(|(w, (j, v))| w * (j - v))
                .sum();
            Ok((gap, u.initial().to_vec()))
        };
        if run.gap.gap <= eps {
            let rest = gap_at(spec, mid, &nu, &alpha)?;
            let (stopped_gap, phi) = stopped(&rest.costs)?;
            let membership = l1_distance(mu, &phi, &run.gap.costs);
            let within = rest.gap <= bound && stopped_gap <= bound && membership <= bound;
            forward.push(DppRow {
                outer_seed: run.seed,
                inner_seed: None,
                outer_gap: run.gap.gap,
                continuation_gap: rest.gap,
                stopped_gap,
                concat_gap: run.gap.gap,
                membership,
                within,
            });
        }
        for inner in runs_at(spec, mid, &nu, seeds, opts)? {
            if inner.gap.gap > eps {
                continue;
            }
            let (stopped_gap, phi) = stopped(&inner.gap.costs)?;
            if stopped_gap > eps {
                skipped += 1;
                continue;
            }
            let joined = ContControl::Table(concatenate(&run.control, &inner.control, mid)?);
            let whole = gap_at(spec, start, mu, &joined)?;
            let membership = l1_distance(mu, &phi, &whole.costs);
            backward.push(DppRow {
                outer_seed: run.seed,
                inner_seed: Some(inner.seed),
                outer_gap: run.gap.gap,
                continuation_gap: inner.gap.gap,
                stopped_gap,
                concat_gap: whole.gap,
                membership,
                within: whole.gap <= bound && membership <= bound,
            });
        }
    }
    let pass = forward.iter().chain(&backward).all(|r| r.within);
    Ok(DppProbe {
        epsilon: eps,
        forward,
        backward,
        skipped,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{builtin, coordination_parts, crowd_parts, DiffusionSpec, InitialLaw};
    use super::*;

    fn coarse(mut p: super::super::DiffusionParts) -> DiffusionSpec {
        p.nx = 281;
        p.dt = 0.05;
        DiffusionSpec::new(&p).unwrap()
    }

    fn gauss(spec: &DiffusionSpec, mean: f64, sd: f64) -> Vec<f64> {
        InitialLaw::Gaussian { mean, sd }
            .masses(spec.grid())
            .unwrap()
    }

    #[test]
    fn constant_costs_have_zero_gap() {
        let mut p = crowd_parts();
        p.running = "0.3".into();
        p.terminal = "-0.2".into();
        let spec = coarse(p);
        let mu = gauss(&spec, 0.0, 1.0);
        let g = cont_mfe_gap(
            &spec,
            0.0,
            &mu,
            &ContControl::formula("tanh(3 * x)").unwrap(),
        )
        .unwrap();
        assert!(g.gap.abs() < 1e-12, "{}", g.gap);
        let sv = cont_set_value_sample(
            &spec,
            0.0,
            &mu,
            0.01,
            &default_seeds(&spec),
            SearchOptions::default(),
        )
        .unwrap();
        assert_eq!(sv.generators.len(), 1);
    }

    #[test]
    fn suboptimal_control_has_positive_gap() {
        let spec = coarse(crowd_parts());
        let mu = gauss(&spec, 0.0, 1.0);
        let g = cont_mfe_gap(&spec, 0.0, &mu, &ContControl::Constant(1.0)).unwrap();
        assert!(g.gap > 0.05, "{}", g.gap);
        assert!(g.pointwise_max() >= g.gap);
    }

    #[test]
    fn fixed_point_is_an_equilibrium_and_stays_put() {
        let spec = coarse(crowd_parts());
        let mu = gauss(&spec, 0.5, 0.8);
        let run = mfe_fixed_point(&spec, 0.0, &mu, &ContControl::Constant(0.0), 200, 0.5).unwrap();
        assert!(run.converged, "{} {}", run.iterations, run.residual);
        assert!(run.gap.gap.abs() < SOLVER_TOL, "{}", run.gap.gap);
        let again = mfe_fixed_point(
            &spec,
            0.0,
            &mu,
            &ContControl::Table(run.control.clone()),
            5,
            0.0,
        )
        .unwrap();
        assert!(again.converged);
        assert!(again.control.distance(&run.control) <= 2.0 * FIXED_POINT_TOL);
    }

    #[test]
    fn coordination_has_several_equilibria() {
        let spec = coarse(coordination_parts());
        let mu = gauss(&spec, 0.0, 0.5);
        let sv = cont_set_value_sample(
            &spec,
            0.0,
            &mu,
            1e-3,
            &default_seeds(&spec),
            SearchOptions::default(),
        )
        .unwrap();
        assert!(sv.generators.len() >= 2, "{sv:?}");
        for g in &sv.generators {
            assert!(sv.contains(&g.values));
        }
        let empty = cont_set_value_sample(
            &spec,
            0.0,
            &mu,
            1e-12,
            &default_seeds(&spec),
            SearchOptions::default(),
        )
        .unwrap();
        assert!(empty.below_solver_tol && empty.generators.is_empty());
    }

    #[test]
    fn dpp_probe_holds_on_crowd() {
        let spec = coarse(crowd_parts());
        let mu = gauss(&spec, 0.0, 0.7);
        let rep = cont_dpp_probe(
            &spec,
            0.0,
            0.5,
            &mu,
            1e-3,
            &default_seeds(&spec),
            SearchOptions::default(),
        )
        .unwrap();
        assert!(
            !rep.forward.is_empty() && !rep.backward.is_empty(),
            "{rep:?}"
        );
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn concatenation_keeps_rows() {
        let spec = builtin("drift").unwrap();
        let a = ContControl::Constant(0.25).freeze(&spec, 0, &vec![vec![]; 51]);
        let b = ContControl::Constant(-0.5).freeze(&spec, 10, &vec![vec![]; 41]);
        let c = concatenate(&a, &b, 20).unwrap();
        assert_eq!(c.row(19)[0], 0.25);
        assert_eq!(c.row(20)[0], -0.5);
        assert_eq!(c.end(), 50);
    }
}
