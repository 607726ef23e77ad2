//! N-player games where players may use distinct path controls.
//!
//! A profile assigns a start path and a control to each player. The profile
//! lifts to global measures (`Lambda^N`, and `Lambda-bar^N` after freezing
//! measure-dependent controls along the lifted flow), and relaxed equilibria
//! of the mean field game come back down through discretization, rounding
//! of the global measure to multiples of `1/N`, and assignment of controls
//! to players. Equilibrium gaps are estimated by Monte Carlo with common
//! random numbers across deviations.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;

use crate::control::{MuControl, PurePathControl, RelaxedControl, StatePolicy};
use crate::dynamics::FlowRecord;
use crate::error::{Error, Result};
use crate::game::GameSpec;
use crate::measure::{largest_remainder, w1_finite, PathMeasure};
use crate::relaxed::{global_mfe_gap, lambda_from_gamma, relaxed_measure_flow, GlobalMeasure};
use crate::rng::{player_rngs, sample_index};
use crate::setvalue::{check_eps, PathControlGrid};
use crate::stats::{decreasing_within_ci, mean_ci, Estimate};

/// Control of one player.
#[derive(Clone, Debug, PartialEq)]
pub enum ProfileControl {
    Pure(PurePathControl),
    /// Reads the current state and the marginal of the empirical measure.
    Feedback(MuControl),
}

impl ProfileControl {
    pub fn lipschitz(&self) -> f64 {
        match self {
            ProfileControl::Pure(_) => 0.0,
            ProfileControl::Feedback(c) => c.lipschitz(),
        }
    }

    fn act(&self, s: usize, path: usize, d: usize, marginal: &[f64], out: &mut [f64]) {
        match self {
            ProfileControl::Pure(c) => out.copy_from_slice(c.action(s, path)),
            ProfileControl::Feedback(c) => c.act(s, path % d, marginal, out),
        }
    }

    /// `alpha(s, path, nu_s)` as a pure path control on `[t, T)`.
    fn freeze(&self, spec: &GameSpec, t: usize, nu: &FlowRecord) -> PurePathControl {
        let d = spec.d();
        let dim = spec.actions().dim();
        PurePathControl::from_fn_unchecked(d, spec.horizon(), t, dim, |s, p| {
            let marginal = spec.path_space(s).marginal(nu.at(s));
            let mut a = vec![0.0; dim];
            self.act(s, p, d, &marginal, &mut a);
            a
        })
    }
}

/// Start paths `x^i in X_t` and controls of `N` players.
#[derive(Clone, Debug, PartialEq)]
pub struct HeteroProfile {
    t: usize,
    d: usize,
    paths: Vec<usize>,
    controls: Vec<ProfileControl>,
}

impl HeteroProfile {
    /// Requires every path of `X_t` to be occupied.
    pub fn new(
        spec: &GameSpec,
        t: usize,
        paths: Vec<usize>,
        controls: Vec<ProfileControl>,
    ) -> Result<Self> {
        spec.check_time(t)?;
        spec.check_path_cap()?;
        if paths.len() != controls.len() {
            return Err(Error::DimensionMismatch {
                expected: paths.len(),
                got: controls.len(),
            });
        }
        if paths.is_empty() {
            return Err(Error::Empty("profile without players"));
        }
        let space = spec.path_space(t);
        if let Some(p) = paths.iter().find(|&&p| p >= space.len()) {
            return Err(Error::InvalidArgument(format!("path {p} outside X_{t}")));
        }
        for c in &controls {
            if let ProfileControl::Pure(a) = c {
                if a.start() != t || a.horizon() != spec.horizon() || a.d() != spec.d() {
                    return Err(Error::InvalidArgument(
                        "control does not live on [t, T)".into(),
                    ));
                }
            }
        }
        let p = Self {
            t,
            d: spec.d(),
            paths,
            controls,
        };
        let min_weight = p.empirical().iter().copied().fold(f64::INFINITY, f64::min);
        if min_weight == 0.0 {
            return Err(Error::NotFullSupport { min_weight });
        }
        Ok(p)
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn n(&self) -> usize {
        self.paths.len()
    }

    pub fn paths(&self) -> &[usize] {
        &self.paths
    }

    pub fn controls(&self) -> &[ProfileControl] {
        &self.controls
    }

    /// `mu^N_{t, x}` on `X_t`.
    pub fn empirical(&self) -> Vec<f64> {
        let len = self.d.pow(self.t as u32 + 1);
        let mut counts = vec![0usize; len];
        for &p in &self.paths {
            counts[p] += 1;
        }
        counts.iter().map(|&c| c as f64 / self.n() as f64).collect()
    }

    /// `I(x)` for every `x in X_t`.
    pub fn players_at(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.d.pow(self.t as u32 + 1)];
        for (i, &p) in self.paths.iter().enumerate() {
            out[p].push(i);
        }
        out
    }

    pub fn lipschitz(&self) -> f64 {
        self.controls
            .iter()
            .map(ProfileControl::lipschitz)
            .fold(0.0, f64::max)
    }

    /// Player `perm[j]` of the result gets player `j`'s path and control.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n();
        if perm.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: perm.len(),
            });
        }
        let mut slots: Vec<Option<(usize, ProfileControl)>> = vec![None; n];
        for (j, &p) in perm.iter().enumerate() {
            if p >= n || slots[p].is_some() {
                return Err(Error::InvalidArgument("not a permutation".into()));
            }
            slots[p] = Some((self.paths[j], self.controls[j].clone()));
        }
        let (paths, controls) = slots.into_iter().map(|s| s.expect("filled")).unzip();
        Ok(Self {
            paths,
            controls,
            ..self.clone()
        })
    }

    /// Classes of players sharing a start path and a control, in order of
    /// their first member.
    fn classes(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = Vec::new();
        for i in 0..self.n() {
            match out.iter_mut().find(|c| {
                self.paths[c[0]] == self.paths[i] && self.controls[c[0]] == self.controls[i]
            }) {
                Some(c) => c.push(i),
                None => out.push(vec![i]),
            }
        }
        out
    }
}

/// Groups equal controls at each path and weights them by `count / N`.
fn lambda_from_counts(
    spec: &GameSpec,
    t: usize,
    n: usize,
    groups: Vec<Vec<(PurePathControl, usize)>>,
) -> Result<GlobalMeasure> {
    let atoms = groups
        .into_iter()
        .map(|g| {
            g.into_iter()
                .map(|(a, c)| (a, c as f64 / n as f64))
                .collect()
        })
        .collect();
    GlobalMeasure::new(spec, t, atoms)
}

/// `Lambda^N(x, d alpha) = (1/N) sum_{i in I(x)} delta_{alpha_i}`, equal
/// controls merged into one atom.
pub fn lambda_n_from_profile(spec: &GameSpec, profile: &HeteroProfile) -> Result<GlobalMeasure> {
    let mut groups: Vec<Vec<(PurePathControl, usize)>> =
        vec![Vec::new(); spec.path_space(profile.t).len()];
    for (&x, c) in profile.paths.iter().zip(&profile.controls) {
        let ProfileControl::Pure(a) = c else {
            return Err(Error::InvalidArgument(
                "measure-dependent controls have no global measure of their own; use bar_lambda_lift".into(),
            ));
        };
        match groups[x].iter_mut().find(|(b, _)| b == a) {
            Some(entry) => entry.1 += 1,
            None => groups[x].push((a.clone(), 1)),
        }
    }
    lambda_from_counts(spec, profile.t, profile.n(), groups)
}

/// Lifted flow `nu^N` and the global measure `Lambda-bar^N` on `mu`.
#[derive(Clone, Debug, PartialEq)]
pub struct BarLift {
    pub nu: FlowRecord,
    pub lambda: GlobalMeasure,
}

/// Every player's law evolves from its start path under its own control
/// read against `nu^N`, the average of those laws; `Lambda-bar^N` puts
/// `mu(x) / |I(x)|` on each frozen control `alpha_i(., ., nu^N)`.
pub fn bar_lambda_lift(
    spec: &GameSpec,
    profile: &HeteroProfile,
    mu: &PathMeasure,
) -> Result<BarLift> {
    let t = profile.t;
    if mu.time() != t || mu.space().d() != spec.d() {
        return Err(Error::InvalidArgument(
            "target measure must live on X_t".into(),
        ));
    }
    mu.require_full_support()?;
    let (d, horizon, n) = (spec.d(), spec.horizon(), profile.n());
    let mut laws: Vec<Vec<f64>> = profile
        .paths
        .iter()
        .map(|&x| {
            let mut l = vec![0.0; spec.path_space(t).len()];
            l[x] = 1.0;
            l
        })
        .collect();
    let mut measures = Vec::with_capacity(horizon - t + 1);
    let mut a = vec![0.0; spec.actions().dim()];
    let mut row = vec![0.0; d];
    for s in t..=horizon {
        let space = spec.path_space(s);
        let mut nu = vec![0.0; space.len()];
        for l in &laws {
            for (m, v) in nu.iter_mut().zip(l) {
                *m += v / n as f64;
            }
        }
        if s < horizon {
            let marginal = space.marginal(&nu);
            let step = spec.path_step(s, &nu);
            for (l, c) in laws.iter_mut().zip(&profile.controls) {
                let mut next = vec![0.0; space.len() * d];
                for (p, &w) in l.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    c.act(s, p, d, &marginal, &mut a);
                    step.transition(p, &a, &mut row);
                    for (y, q) in row.iter().enumerate() {
                        next[space.child(p, y)] += w * q;
                    }
                }
                *l = next;
            }
        }
        measures.push(nu);
    }
    let nu = FlowRecord::new(t, measures);
    let at = profile.players_at();
    let mut atoms: Vec<Vec<(PurePathControl, f64)>> = vec![Vec::new(); at.len()];
    for (x, players) in at.iter().enumerate() {
        for &i in players {
            let frozen = profile.controls[i].freeze(spec, t, &nu);
            atoms[x].push((frozen, mu.weights()[x] / players.len() as f64));
        }
    }
    Ok(BarLift {
        lambda: GlobalMeasure::new(spec, t, atoms)?,
        nu,
    })
}

/// Simulates replication `rep` of the profile with player `i` optionally
/// replaced; returns realized costs and, when `record` is set, the
/// empirical measures on `X_s`.
fn simulate_profile(
    spec: &GameSpec,
    profile: &HeteroProfile,
    replace: Option<(usize, &ProfileControl)>,
    seed: u64,
    rep: u64,
    record: bool,
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let (t, d, n, horizon) = (profile.t, spec.d(), profile.n(), spec.horizon());
    let mut rngs = player_rngs(seed, n as u64, rep);
    let mut paths = profile.paths.clone();
    let mut costs = vec![0.0; n];
    let mut flows = Vec::new();
    let mut a = vec![0.0; spec.actions().dim()];
    let mut row = vec![0.0; d];
    for s in t..=horizon {
        let space = spec.path_space(s);
        let mut mu = vec![0.0; space.len()];
        for &p in &paths {
            mu[p] += 1.0 / n as f64;
        }
        let step = spec.path_step(s, &mu);
        if s == horizon {
            for (c, &p) in costs.iter_mut().zip(&paths) {
                *c += step.terminal_cost(p);
            }
        } else {
            let marginal = space.marginal(&mu);
            for j in 0..n {
                let control = match replace {
                    Some((i, c)) if i == j => c,
                    _ => &profile.controls[j],
                };
                control.act(s, paths[j], d, &marginal, &mut a);
                costs[j] += step.running_cost(paths[j], &a);
                step.transition(paths[j], &a, &mut row);
                paths[j] = space.child(paths[j], sample_index(&row, rngs[j].random()));
            }
        }
        if record {
            flows.push(mu);
        }
    }
    (costs, flows)
}

/// Monte Carlo budget: `samples` replications for reported estimates and
/// `pilot` disjoint replications for choosing best responses.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McOptions {
    pub samples: usize,
    pub pilot: usize,
    pub seed: u64,
}

impl Default for McOptions {
    fn default() -> Self {
        Self {
            samples: 2000,
            pilot: 200,
            seed: 0,
        }
    }
}

/// Deviations considered for a heterogeneous best response.
#[derive(Clone, Debug)]
pub enum HeteroFamily {
    /// Every grid pure path control on `[t, T)`.
    Grid,
    Controls {
        controls: Vec<ProfileControl>,
        lipschitz: f64,
    },
}

/// Gap of one class of players sharing a start path and a control.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassGap {
    pub path: usize,
    pub players: Vec<usize>,
    /// `J_i` under the profile.
    pub cost: Estimate,
    /// `J_i` with player `i` switched to the pilot's best response.
    pub value: Estimate,
    /// Paired difference `cost - value`.
    pub gap: Estimate,
    /// Best family member on the pilot; `None` keeps the own control.
    pub best: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeteroEqReport {
    pub epsilon: f64,
    pub classes: Vec<ClassGap>,
    /// Per-player gap estimates, clamped at zero since `J_i >= v_i`.
    pub gaps: Vec<f64>,
    /// `(1/N) sum_i gap_i`; the half-width adds the class half-widths.
    pub average_gap: Estimate,
    /// Fraction of players with `gap_i >= sqrt(eps)` and `gap_i > 0`.
    pub fraction_above: f64,
    /// `average <= eps` implies `fraction <= sqrt(eps)`.
    pub chebyshev_ok: bool,
    pub pass: bool,
}

impl HeteroEqReport {
    /// Estimated `v^N_i` per player.
    pub fn values(&self) -> Vec<f64> {
        let n = self.gaps.len();
        let mut out = vec![0.0; n];
        for c in &self.classes {
            for &i in &c.players {
                out[i] = c.value.mean;
            }
        }
        out
    }
}

fn family_member(spec: &GameSpec, t: usize, family: &HeteroFamily, id: u64) -> ProfileControl {
    match family {
        HeteroFamily::Grid => {
            let grid = PathControlGrid::new(spec, t, spec.horizon()).expect("size checked before");
            ProfileControl::Pure(grid.control(spec, id))
        }
        HeteroFamily::Controls { controls, .. } => controls[id as usize].clone(),
    }
}

fn family_size(spec: &GameSpec, t: usize, family: &HeteroFamily) -> Result<u64> {
    match family {
        HeteroFamily::Grid => Ok(PathControlGrid::new(spec, t, spec.horizon())?.count()),
        HeteroFamily::Controls {
            controls,
            lipschitz,
        } => {
            if let Some(c) = controls.iter().find(|c| c.lipschitz() > *lipschitz) {
                return Err(Error::InvalidArgument(format!(
                    "deviation with Lipschitz constant {} above {lipschitz}",
                    c.lipschitz()
                )));
            }
            Ok(controls.len() as u64)
        }
    }
}

/// Averaged equilibrium gap of a profile. Players in one class have equal
/// costs and values, so one representative per class is simulated.
pub fn hetero_eq_check(
    spec: &GameSpec,
    profile: &HeteroProfile,
    eps: f64,
    family: &HeteroFamily,
    mc: McOptions,
) -> Result<HeteroEqReport> {
    check_eps(eps)?;
    spec.check_path_cap()?;
    if mc.samples < 2 {
        return Err(Error::InvalidArgument(
            "at least two replications are needed".into(),
        ));
    }
    let t = profile.t;
    let size = family_size(spec, t, family)?;
    let n = profile.n();
    let pilot_reps: Vec<u64> = (mc.samples as u64..(mc.samples + mc.pilot) as u64).collect();
    let main_reps: Vec<u64> = (0..mc.samples as u64).collect();
    let mut classes = Vec::new();
    for members in profile.classes() {
        let i = members[0];
        let pilot_cost = |c: Option<&ProfileControl>| -> f64 {
            pilot_reps
                .iter()
                .map(|&r| {
                    simulate_profile(spec, profile, c.map(|c| (i, c)), mc.seed, r, false).0[i]
                })
                .sum::<f64>()
        };
        let own = pilot_cost(None);
        let devs: Vec<f64> = (0..size)
            .into_par_iter()
            .map(|id| pilot_cost(Some(&family_member(spec, t, family, id))))
            .collect();
        let mut best = (own, None);
        for (id, c) in devs.into_iter().enumerate() {
            if c < best.0 {
                best = (c, Some(id as u64));
            }
        }
        let dev = best.1.map(|id| family_member(spec, t, family, id));
        let pairs: Vec<(f64, f64)> = main_reps
            .par_iter()
            .map(|&r| {
                let j = simulate_profile(spec, profile, None, mc.seed, r, false).0[i];
                let v = match &dev {
                    Some(c) => {
                        simulate_profile(spec, profile, Some((i, c)), mc.seed, r, false).0[i]
                    }
                    None => j,
                };
                (j, v)
            })
            .collect();
        let js: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let vs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let diffs: Vec<f64> = pairs.iter().map(|p| p.0 - p.1).collect();
        classes.push(ClassGap {
            path: profile.paths[i],
            players: members,
            cost: mean_ci(&js)?,
            value: mean_ci(&vs)?,
            gap: mean_ci(&diffs)?,
            best: best.1,
        });
    }
    let mut gaps = vec![0.0; n];
    let mut hw = 0.0;
    for c in &classes {
        for &i in &c.players {
            gaps[i] = c.gap.mean.max(0.0);
        }
        hw += c.gap.half_width * c.players.len() as f64 / n as f64;
    }
    let avg = gaps.iter().sum::<f64>() / n as f64;
    let root = eps.sqrt();
    let fraction_above = gaps.iter().filter(|g| **g >= root && **g > 0.0).count() as f64 / n as f64;
    Ok(HeteroEqReport {
        epsilon: eps,
        classes,
        gaps,
        average_gap: Estimate {
            mean: avg,
            half_width: hw,
            samples: mc.samples,
        },
        fraction_above,
        chebyshev_ok: avg > eps || fraction_above <= root,
        pass: avg <= eps,
    })
}

/// Values `v^N_i` of an equilibrium profile grouped by start path.
#[derive(Clone, Debug, PartialEq)]
pub struct HeteroGenerator {
    pub epsilon: f64,
    pub values_at: Vec<Vec<f64>>,
}

impl HeteroGenerator {
    pub fn new(epsilon: f64, paths: &[usize], values: &[f64], len: usize) -> Result<Self> {
        if paths.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: paths.len(),
                got: values.len(),
            });
        }
        let mut values_at = vec![Vec::new(); len];
        for (&p, &v) in paths.iter().zip(values) {
            values_at
                .get_mut(p)
                .ok_or_else(|| Error::InvalidArgument(format!("path {p} outside 0..{len}")))?
                .push(v);
        }
        Ok(Self { epsilon, values_at })
    }

    /// `max_x min_{i in I(x)} |phi(x) - v_i|`.
    pub fn max_min_distance(&self, phi: &[f64]) -> f64 {
        self.distance(phi, |vals, f| {
            vals.iter()
                .map(|v| (f - v).abs())
                .fold(f64::INFINITY, f64::min)
        })
    }

    /// `max_x max_{i in I(x)} |phi(x) - v_i|`, the stricter alternative.
    pub fn max_max_distance(&self, phi: &[f64]) -> f64 {
        self.distance(phi, |vals, f| {
            vals.iter().map(|v| (f - v).abs()).fold(0.0, f64::max)
        })
    }

    fn distance(&self, phi: &[f64], per_x: impl Fn(&[f64], f64) -> f64) -> f64 {
        self.values_at
            .iter()
            .zip(phi)
            .map(|(vals, &f)| per_x(vals, f))
            .fold(0.0, f64::max)
    }

    pub fn contains(&self, phi: &[f64]) -> bool {
        self.max_min_distance(phi) <= self.epsilon + crate::DEDUP_TOL
    }
}

/// Generators of the heterogeneous set value from candidate profiles:
/// profiles passing the averaged check contribute their values.
pub fn hetero_set_value(
    spec: &GameSpec,
    profiles: &[HeteroProfile],
    eps: f64,
    family: &HeteroFamily,
    mc: McOptions,
) -> Result<Vec<HeteroGenerator>> {
    let mut out = Vec::new();
    for p in profiles {
        let rep = hetero_eq_check(spec, p, eps, family, mc)?;
        if rep.pass {
            out.push(HeteroGenerator::new(
                eps,
                &p.paths,
                &rep.values(),
                spec.path_space(p.t).len(),
            )?);
        }
    }
    Ok(out)
}

/// Outcome of moving relaxed rows onto grid representatives.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretizationReport {
    pub epsilon: f64,
    /// Largest `|a - a_k|` over atoms with positive weight.
    pub max_shift: f64,
    /// Largest row mass carried by atoms moved farther than `epsilon`.
    pub far_mass: f64,
    /// Largest change of row mass over all nodes (zero up to rounding).
    pub mass_error: f64,
}

/// `gamma^eps(s, x, da) = sum_k gamma(s, x, A_k) delta_{a_k}` with `A_k` the
/// cells of the nearest grid point.
pub fn discretize_relaxed(
    spec: &GameSpec,
    gamma: &RelaxedControl,
    eps: f64,
) -> Result<(DiscretizationReport, RelaxedControl)> {
    check_eps(eps)?;
    let grid = spec.actions();
    let cell: Vec<(usize, f64)> = (0..gamma.support_len())
        .map(|j| {
            let a = gamma.support_point(j);
            let k = grid.nearest(a);
            let shift = grid
                .point(k)
                .iter()
                .zip(a)
                .map(|(p, v)| (p - v).abs())
                .fold(0.0, f64::max);
            (k, shift)
        })
        .collect();
    let mut report = DiscretizationReport {
        epsilon: eps,
        max_shift: 0.0,
        far_mass: 0.0,
        mass_error: 0.0,
    };
    let out = RelaxedControl::from_rows(spec, gamma.start(), |s, p| {
        let mut row = vec![0.0; grid.len()];
        let mut far = 0.0;
        for (j, &w) in gamma.row(s, p).iter().enumerate() {
            if w > 0.0 {
                row[cell[j].0] += w;
                report.max_shift = report.max_shift.max(cell[j].1);
                if cell[j].1 > eps {
                    far += w;
                }
            }
        }
        report.far_mass = report.far_mass.max(far);
        let before: f64 = gamma.row(s, p).iter().sum();
        report.mass_error = report
            .mass_error
            .max((row.iter().sum::<f64>() - before).abs());
        row
    })?;
    Ok((report, out))
}

/// Largest `W1` between the flows of `gamma` and its discretization.
pub fn discretization_drift(
    spec: &GameSpec,
    mu: &PathMeasure,
    gamma: &RelaxedControl,
    gamma_eps: &RelaxedControl,
) -> Result<f64> {
    let a = relaxed_measure_flow(spec, mu.time(), mu, gamma)?;
    let b = relaxed_measure_flow(spec, mu.time(), mu, gamma_eps)?;
    Ok(a.max_w1(&b))
}

/// `Lambda` rounded to multiples of `1/N` with the per-path masses of the
/// players' start paths.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundedLambda {
    pub n: usize,
    pub lambda: GlobalMeasure,
    /// Multiplicities `N Lambda^eps(x, alpha)` per path, in atom order of
    /// the input (zero counts kept).
    pub counts: Vec<Vec<usize>>,
    /// Largest `|Lambda^eps(x, alpha) - Lambda(x, alpha)|`.
    pub max_deviation: f64,
    /// Largest `1/N + |mu^N(x) - mu(x)|` over paths.
    pub bound: f64,
}

/// Splits `|I(x)|` players over the atoms at `x` by largest remainder of
/// `|I(x)| Lambda(x, alpha) / Lambda(x)`, ties to the lower atom index.
pub fn lambda_eps_rounding(
    spec: &GameSpec,
    paths: &[usize],
    lam: &GlobalMeasure,
) -> Result<RoundedLambda> {
    let t = lam.time();
    let len = spec.path_space(t).len();
    let n = paths.len();
    if n == 0 {
        return Err(Error::Empty("rounding for no players"));
    }
    let mut occupancy = vec![0usize; len];
    for &p in paths {
        *occupancy
            .get_mut(p)
            .ok_or_else(|| Error::InvalidArgument(format!("path {p} outside X_{t}")))? += 1;
    }
    let start = lam.start_measure();
    let mut counts = Vec::with_capacity(len);
    let mut groups = Vec::with_capacity(len);
    let mut max_deviation = 0.0f64;
    let mut bound = 0.0f64;
    for x in 0..len {
        let atoms = lam.atoms(x);
        let nx = occupancy[x];
        if nx > 0 && !(start[x] > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "{nx} players start at path {x} but the measure has no atom there"
            )));
        }
        let c = if nx == 0 {
            vec![0; atoms.len()]
        } else {
            let rel: Vec<f64> = atoms.iter().map(|(_, w)| w / start[x]).collect();
            largest_remainder(&rel, nx)
        };
        for ((_, w), &k) in atoms.iter().zip(&c) {
            max_deviation = max_deviation.max((k as f64 / n as f64 - w).abs());
        }
        bound = bound.max(1.0 / n as f64 + (nx as f64 / n as f64 - start[x]).abs());
        groups.push(
            atoms
                .iter()
                .zip(&c)
                .filter(|(_, k)| **k > 0)
                .map(|((a, _), &k)| (a.clone(), k))
                .collect(),
        );
        counts.push(c);
    }
    Ok(RoundedLambda {
        n,
        lambda: lambda_from_counts(spec, t, n, groups)?,
        counts,
        max_deviation,
        bound,
    })
}

/// Assigns the rounded atoms at each path to its players in ascending
/// index order.
pub fn profile_from_lambda(
    spec: &GameSpec,
    paths: &[usize],
    rounded: &RoundedLambda,
) -> Result<HeteroProfile> {
    let t = rounded.lambda.time();
    let n = paths.len();
    if n != rounded.n {
        return Err(Error::DimensionMismatch {
            expected: rounded.n,
            got: n,
        });
    }
    let mut slots: Vec<Option<ProfileControl>> = vec![None; n];
    let mut at: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &p) in paths.iter().enumerate() {
        at.entry(p).or_default().push(i);
    }
    let len = spec.path_space(t).len();
    for x in 0..len {
        let players = at.remove(&x).unwrap_or_default();
        let atoms = rounded.lambda.atoms(x);
        let total: usize = atoms
            .iter()
            .map(|(_, w)| (w * n as f64).round() as usize)
            .sum();
        if total != players.len() {
            return Err(Error::InvalidArgument(format!(
                "path {x} has {} players but multiplicity {total}",
                players.len()
            )));
        }
        let mut it = players.into_iter();
        for (a, w) in atoms {
            for _ in 0..(w * n as f64).round() as usize {
                slots[it.next().expect("counted")] = Some(ProfileControl::Pure(a.clone()));
            }
        }
    }
    if !at.is_empty() {
        return Err(Error::InvalidArgument("start path outside X_t".into()));
    }
    HeteroProfile::new(
        spec,
        t,
        paths.to_vec(),
        slots.into_iter().map(|c| c.expect("assigned")).collect(),
    )
}

/// Start paths for `N` players: largest-remainder rounding of `N mu`,
/// assigned in ascending path order.
pub fn round_start_paths(mu: &PathMeasure, n: usize) -> Vec<usize> {
    largest_remainder(mu.weights(), n)
        .iter()
        .enumerate()
        .flat_map(|(x, &c)| std::iter::repeat_n(x, c))
        .collect()
}

/// One population size of the convergence experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct HeteroRow {
    pub n: usize,
    /// `Lambda^N` of the constructed profile equals the rounded measure.
    pub lambda_exact: bool,
    pub rounding_deviation: f64,
    pub rounding_bound: f64,
    pub eq: HeteroEqReport,
    /// `E max_s W1(mu^N_s, mu^{gamma^eps}_s)`.
    pub measure_distance: Estimate,
    /// `int [J - v] d Lambda-bar^N` of the lifted profile on `mu`.
    pub lifted_gap: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeteroConvergence {
    pub discretization: DiscretizationReport,
    pub rows: Vec<HeteroRow>,
    /// Averaged gaps decrease in `N` up to confidence half-widths.
    pub gap_decreasing: bool,
    pub chebyshev_all: bool,
    pub lambda_exact_all: bool,
}

/// Runs relaxed control -> discretization -> rounding -> profile for each
/// `N`, estimates the averaged gap and the flow distance, and lifts the
/// profile back to a global measure on `mu`.
#[allow(clippy::too_many_arguments)]
pub fn hetero_convergence(
    spec: &GameSpec,
    mu: &PathMeasure,
    gamma: &RelaxedControl,
    eps: f64,
    n_list: &[usize],
    family: &HeteroFamily,
    mc: McOptions,
) -> Result<HeteroConvergence> {
    let t = mu.time();
    let (discretization, gamma_eps) = discretize_relaxed(spec, gamma, eps)?;
    let lam = lambda_from_gamma(spec, t, mu, &gamma_eps)?;
    let flow = relaxed_measure_flow(spec, t, mu, &gamma_eps)?;
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let paths = round_start_paths(mu, n);
        let rounded = lambda_eps_rounding(spec, &paths, &lam)?;
        let profile = profile_from_lambda(spec, &paths, &rounded)?;
        let lambda_exact =
            lambda_n_from_profile(spec, &profile)?.canonical() == rounded.lambda.canonical();
        let eq = hetero_eq_check(spec, &profile, eps, family, mc)?;
        let dists: Vec<f64> = (0..mc.samples as u64)
            .into_par_iter()
            .map(|r| {
                let (_, flows) = simulate_profile(spec, &profile, None, mc.seed, r, true);
                flows
                    .iter()
                    .enumerate()
                    .map(|(k, m)| w1_finite(m, flow.at(t + k)).expect("same path space"))
                    .fold(0.0, f64::max)
            })
            .collect();
        let lift = bar_lambda_lift(spec, &profile, mu)?;
        let lifted_gap = global_mfe_gap(spec, &lift.lambda)?.gap.iter().sum();
        rows.push(HeteroRow {
            n,
            lambda_exact,
            rounding_deviation: rounded.max_deviation,
            rounding_bound: rounded.bound,
            eq,
            measure_distance: mean_ci(&dists)?,
            lifted_gap,
        });
    }
    let gap_decreasing =
        decreasing_within_ci(&rows.iter().map(|r| r.eq.average_gap).collect::<Vec<_>>());
    Ok(HeteroConvergence {
        discretization,
        gap_decreasing,
        chebyshev_all: rows.iter().all(|r| r.eq.chebyshev_ok),
        lambda_exact_all: rows.iter().all(|r| r.lambda_exact),
        rows,
    })
}
