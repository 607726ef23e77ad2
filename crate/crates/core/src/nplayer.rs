//! N-player games with empirical-measure interaction.
//!
//! Player `i` pays `E[sum_s F(s, X^i_s, mu^N_s, a) + G(X^i_T, mu^N_T)]` where
//! `mu^N_s` is the empirical measure of all `N` players, including `i`.
//! Costs are computed exactly on a Markov chain over configurations or
//! estimated by Monte Carlo.
//!
//! Two exact chains are available when every other player follows the same
//! control: the product chain on `S^N` and, for two states, the chain on
//! `(own state, number of others in state 0)`, whose transitions are
//! convolutions of two binomials.

use rand::Rng;
use rayon::prelude::*;
use statrs::distribution::{Binomial, Discrete};

use crate::control::{MuControl, PureStateControl, StatePolicy};
use crate::dynamics::measure_flow;
use crate::error::{guard, Error, Result};
use crate::game::{GameSpec, StateModel};
use crate::measure::{largest_remainder, w1_finite, SimplexMeasure};
use crate::rng::{player_rngs, sample_index};
use crate::setvalue::{check_eps, mfe_gap, set_value_eps, sup_distance, StateControlGrid};
use crate::stats::{decreasing_within_ci, mean_ci, tail_fit, Estimate, RateFit};

/// Initial states of the `N` players.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NConfig {
    d: usize,
    states: Vec<usize>,
}

impl NConfig {
    pub fn new(d: usize, states: Vec<usize>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::Empty("configuration without players"));
        }
        if let Some(x) = states.iter().find(|&&x| x >= d) {
            return Err(Error::InvalidArgument(format!("state {x} outside 0..{d}")));
        }
        Ok(Self { d, states })
    }

    /// Largest-remainder rounding of `n * mu`, players assigned to states in
    /// ascending order.
    pub fn from_measure(mu: &SimplexMeasure, n: usize) -> Result<Self> {
        let counts = largest_remainder(mu.weights(), n);
        let states = counts
            .iter()
            .enumerate()
            .flat_map(|(x, &c)| std::iter::repeat_n(x, c))
            .collect();
        Self::new(mu.len(), states)
    }

    pub fn n(&self) -> usize {
        self.states.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.d];
        for &x in &self.states {
            c[x] += 1;
        }
        c
    }

    /// Empirical measure `mu^N_x`.
    pub fn measure(&self) -> Vec<f64> {
        let n = self.n() as f64;
        self.counts().iter().map(|&c| c as f64 / n).collect()
    }

    /// Player `perm[j]` of the result starts where player `j` started.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: perm.len(),
            });
        }
        let mut states = vec![usize::MAX; self.n()];
        for (j, &p) in perm.iter().enumerate() {
            if p >= self.n() || states[p] != usize::MAX {
                return Err(Error::InvalidArgument("not a permutation".into()));
            }
            states[p] = self.states[j];
        }
        Self::new(self.d, states)
    }

    /// First player in each state, if any.
    pub fn representatives(&self) -> Vec<Option<usize>> {
        (0..self.d)
            .map(|x| self.states.iter().position(|&s| s == x))
            .collect()
    }

    fn check(&self, spec: &GameSpec) -> Result<()> {
        if self.d != spec.d() {
            return Err(Error::DimensionMismatch {
                expected: spec.d(),
                got: self.d,
            });
        }
        Ok(())
    }
}

/// Exact chain used when the other players share one control.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ChainMode {
    /// Counting chain for two states, else the product chain when `d^N`
    /// fits [`crate::Limits::max_product_states`].
    #[default]
    Auto,
    Product,
    Aggregated,
}

fn product_size(d: usize, n: usize) -> f64 {
    (d as f64).powi(n as i32)
}

fn resolve_mode(spec: &GameSpec, n: usize, mode: ChainMode) -> Result<ChainMode> {
    let d = spec.d();
    let limit = spec.limits().max_product_states as f64;
    match mode {
        ChainMode::Aggregated if d != 2 => Err(Error::InvalidArgument(format!(
            "the counting chain needs two states, got {d}"
        ))),
        ChainMode::Aggregated => Ok(ChainMode::Aggregated),
        ChainMode::Product => {
            guard("product chain states d^N", product_size(d, n), limit)?;
            Ok(ChainMode::Product)
        }
        ChainMode::Auto if d == 2 => Ok(ChainMode::Aggregated),
        ChainMode::Auto => {
            guard(
                "product chain states d^N (use the Monte Carlo estimators instead)",
                product_size(d, n),
                limit,
            )?;
            Ok(ChainMode::Product)
        }
    }
}

fn check_policies(n: usize, policies: &[&dyn StatePolicy]) -> Result<()> {
    if policies.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: policies.len(),
        });
    }
    Ok(())
}

/// Configuration index, player 0 most significant.
fn encode(states: &[usize], d: usize) -> usize {
    states.iter().fold(0, |acc, &x| acc * d + x)
}

fn decode_into(mut z: usize, d: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = z % d;
        z /= d;
    }
}

/// Laws of the configuration on `S^N` at times `t..=T`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductLaw {
    pub t: usize,
    pub n: usize,
    pub d: usize,
    /// `dists[s - t][z]`, `z` a configuration index with player 0 most
    /// significant.
    pub dists: Vec<Vec<f64>>,
}

impl ProductLaw {
    pub fn states_of(&self, z: usize) -> Vec<usize> {
        let mut out = vec![0; self.n];
        decode_into(z, self.d, &mut out);
        out
    }

    /// Law of player `i` at time `s`.
    pub fn marginal(&self, s: usize, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        let stride = self.d.pow((self.n - 1 - i) as u32);
        for (z, p) in self.dists[s - self.t].iter().enumerate() {
            out[(z / stride) % self.d] += p;
        }
        out
    }

    /// `E[mu^N_s]`.
    pub fn expected_empirical(&self, s: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        let mut buf = vec![0; self.n];
        for (z, p) in self.dists[s - self.t].iter().enumerate() {
            decode_into(z, self.d, &mut buf);
            for &x in &buf {
                out[x] += p / self.n as f64;
            }
        }
        out
    }
}

fn product_pass(
    spec: &GameSpec,
    t: usize,
    cfg: &NConfig,
    policies: &[&dyn StatePolicy],
) -> Result<(ProductLaw, Vec<f64>)> {
    spec.check_time(t)?;
    cfg.check(spec)?;
    let n = cfg.n();
    check_policies(n, policies)?;
    let d = spec.d();
    let size = product_size(d, n);
    guard(
        "product chain states d^N",
        size,
        spec.limits().max_product_states as f64,
    )?;
    let model = spec.state_model("N-player chain")?;
    let nz = size as usize;
    let mut p = vec![0.0; nz];
    p[encode(cfg.states(), d)] = 1.0;
    let mut dists = vec![p];
    let mut costs = vec![0.0; n];
    let mut states = vec![0; n];
    let mut counts = vec![0usize; d];
    let mut a = vec![0.0; spec.actions().dim()];
    let mut rows = vec![0.0; n * d];
    for s in t..spec.horizon() {
        let cur = dists.last().expect("law at s");
        let mut next = vec![0.0; nz];
        for (z, &pz) in cur.iter().enumerate() {
            if pz == 0.0 {
                continue;
            }
            decode_into(z, d, &mut states);
            let mu = empirical(&states, d, &mut counts);
            for (j, &x) in states.iter().enumerate() {
                policies[j].act(s, x, &mu, &mut a);
                costs[j] += pz * model.running_cost(s, x, &mu, &a);
                model.transition(s, x, &mu, &a, &mut rows[j * d..(j + 1) * d]);
            }
            let mut frontier = vec![(0usize, pz)];
            for j in 0..n {
                let row = &rows[j * d..(j + 1) * d];
                frontier = frontier
                    .iter()
                    .flat_map(|&(idx, w)| {
                        row.iter()
                            .enumerate()
                            .map(move |(y, q)| (idx * d + y, w * q))
                    })
                    .filter(|&(_, w)| w > 0.0)
                    .collect();
            }
            for (z2, w) in frontier {
                next[z2] += w;
            }
        }
        dists.push(next);
    }
    let last = dists.last().expect("terminal law");
    for (z, &pz) in last.iter().enumerate() {
        if pz == 0.0 {
            continue;
        }
        decode_into(z, d, &mut states);
        let mu = empirical(&states, d, &mut counts);
        for (j, &x) in states.iter().enumerate() {
            costs[j] += pz * model.terminal_cost(x, &mu);
        }
    }
    Ok((ProductLaw { t, n, d, dists }, costs))
}

fn empirical(states: &[usize], d: usize, counts: &mut [usize]) -> Vec<f64> {
    counts.iter_mut().for_each(|c| *c = 0);
    for &x in states {
        counts[x] += 1;
    }
    let n = states.len() as f64;
    (0..d).map(|x| counts[x] as f64 / n).collect()
}

/// Exact law of the configuration when player `j` follows `policies[j]`.
pub fn nplayer_law(
    spec: &GameSpec,
    t: usize,
    cfg: &NConfig,
    policies: &[&dyn StatePolicy],
) -> Result<ProductLaw> {
    Ok(product_pass(spec, t, cfg, policies)?.0)
}

/// Exact costs `J^N_i` of all players on the product chain.
pub fn nplayer_costs(
    spec: &GameSpec,
    t: usize,
    cfg: &NConfig,
    policies: &[&dyn StatePolicy],
) -> Result<Vec<f64>> {
    Ok(product_pass(spec, t, cfg, policies)?.1)
}

pub fn nplayer_cost(
    spec: &GameSpec,
    t: usize,
    cfg: &NConfig,
    policies: &[&dyn StatePolicy],
    i: usize,
) -> Result<f64> {
    if i >= cfg.n() {
        return Err(Error::InvalidArgument(format!(
            "player {i} outside 0..{}",
            cfg.n()
        )));
    }
    Ok(nplayer_costs(spec, t, cfg, policies)?[i])
}

/// One simulated replication: realized costs and empirical measures.
#[derive(Clone, Debug, PartialEq)]
pub struct Replication {
    pub costs: Vec<f64>,
    /// `mu^N_s` for `s = t..=T`.
    pub empirical: Vec<Vec<f64>>,
}

/// Where the initial states of a simulation come from.
#[derive(Clone, Copy, Debug)]
pub enum InitialStates<'a> {
    Fixed(&'a [usize]),
    /// i.i.d. draws from a measure, one per player.
    Iid(&'a [f64]),
}

/// Simulates replication `rep`; player `j`'s draws come from its own stream,
/// so runs differing only in some players' controls share randomness.
pub fn simulate(
    spec: &GameSpec,
    t: usize,
    init: InitialStates<'_>,
    policies: &[&dyn StatePolicy],
    seed: u64,
    rep: u64,
) -> Result<Replication> {
    spec.check_time(t)?;
    let model = spec.state_model("N-player simulation")?;
    let n = policies.len();
    let d = spec.d();
    let mut rngs = player_rngs(seed, n as u64, rep);
    let mut states: Vec<usize> = match init {
        InitialStates::Fixed(x) => {
            check_policies(x.len(), policies)?;
            NConfig::new(d, x.to_vec())?.states
        }
        InitialStates::Iid(mu) => {
            if mu.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: mu.len(),
                });
            }
            rngs.iter_mut()
                .map(|r| sample_index(mu, r.random()))
                .collect()
        }
    };
    if n == 0 {
        return Err(Error::Empty("simulation without players"));
    }
    let mut counts = vec![0; d];
    let mut costs = vec![0.0; n];
    let mut a = vec![0.0; spec.actions().dim()];
    let mut row = vec![0.0; d];
    let mut out = Vec::with_capacity(spec.horizon() - t + 1);
    for s in t..spec.horizon() {
        let mu = empirical(&states, d, &mut counts);
        for j in 0..n {
            let x = states[j];
            policies[j].act(s, x, &mu, &mut a);
            costs[j] += model.running_cost(s, x, &mu, &a);
            model.transition(s, x, &mu, &a, &mut row);
            states[j] = sample_index(&row, rngs[j].random());
        }
        out.push(mu);
    }
    let mu = empirical(&states, d, &mut counts);
    for j in 0..n {
        costs[j] += model.terminal_cost(states[j], &mu);
    }
    out.push(mu);
    Ok(Replication {
        costs,
        empirical: out,
    })
}

/// Monte Carlo estimates of every player's cost from a fixed configuration.
pub fn nplayer_costs_mc(
    spec: &GameSpec,
    t: usize,
    cfg: &NConfig,
    policies: &[&dyn StatePolicy],
    seed: u64,
    samples: usize,
) -> Result<Vec<Estimate>> {
    cfg.check(spec)?;
    check_policies(cfg.n(), policies)?;
    let reps: Vec<Replication> = (0..samples as u64)
        .into_par_iter()
        .map(|r| {
            simulate(
                spec,
                t,
                InitialStates::Fixed(cfg.states()),
                policies,
                seed,
                r,
            )
        })
        .collect::<Result<_>>()?;
    (0..cfg.n())
        .map(|j| {
            let xs: Vec<f64> = reps.iter().map(|r| r.costs[j]).collect();
            mean_ci(&xs)
        })
        .collect()
}

/// Chain of player `i` with every other player following one control.
///
/// State `z` packs the own state and the others: in product mode `z` is the
/// configuration index; in counting mode `z = own * N + k` with `k` the
/// number of others in state 0. Next states are `part + own' * stride`.
struct PlayerChain<'a> {
    model: &'a dyn StateModel,
    alpha: &'a dyn StatePolicy,
    t: usize,
    horizon: usize,
    n: usize,
    d: usize,
    player: usize,
    mode: ChainMode,
    start: usize,
    nz: usize,
    stride: usize,
    own: Vec<usize>,
    mus: Vec<Vec<f64>>,
    /// Counting mode: transition of `k` per step and `z`.
    counting: Vec<Vec<Vec<f64>>>,
    action_dim: usize,
    grid: Vec<Vec<f64>>,
}

impl<'a> PlayerChain<'a> {
    fn build(
        spec: &'a GameSpec,
        t: usize,
        cfg: &NConfig,
        alpha: &'a dyn StatePolicy,
        player: usize,
        mode: ChainMode,
    ) -> Result<Self> {
        spec.check_time(t)?;
        cfg.check(spec)?;
        let n = cfg.n();
        if player >= n {
            return Err(Error::InvalidArgument(format!(
                "player {player} outside 0..{n}"
            )));
        }
        let mode = resolve_mode(spec, n, mode)?;
        let model = spec.state_model("N-player chain")?;
        let d = spec.d();
        let (nz, stride, start) = match mode {
            ChainMode::Product => (
                d.pow(n as u32),
                d.pow((n - 1 - player) as u32),
                encode(cfg.states(), d),
            ),
            _ => {
                let others0 = cfg
                    .states()
                    .iter()
                    .enumerate()
                    .filter(|&(j, &x)| j != player && x == 0)
                    .count();
                (2 * n, n, cfg.states()[player] * n + others0)
            }
        };
        let mut own = vec![0; nz];
        let mut mus = vec![Vec::new(); nz];
        let mut buf = vec![0; n];
        let mut counts = vec![0; d];
        for z in 0..nz {
            match mode {
                ChainMode::Product => {
                    decode_into(z, d, &mut buf);
                    own[z] = buf[player];
                    mus[z] = empirical(&buf, d, &mut counts);
                }
                _ => {
                    let (o, k) = (z / n, z % n);
                    own[z] = o;
                    let m0 = (k + usize::from(o == 0)) as f64 / n as f64;
                    mus[z] = vec![m0, 1.0 - m0];
                }
            }
        }
        let mut chain = Self {
            model,
            alpha,
            t,
            horizon: spec.horizon(),
            n,
            d,
            player,
            mode,
            start,
            nz,
            stride,
            own,
            mus,
            counting: Vec::new(),
            action_dim: spec.actions().dim(),
            grid: spec.actions().points().map(|p| p.to_vec()).collect(),
        };
        if mode == ChainMode::Aggregated {
            chain.counting = (t..spec.horizon())
                .map(|s| chain.counting_step(s))
                .collect::<Result<_>>()?;
        }
        Ok(chain)
    }

    /// Rows `q(s, x, mu(z), alpha)` of the others, one per state.
    fn others_rows(&self, s: usize, z: usize) -> Vec<Vec<f64>> {
        let mu = &self.mus[z];
        let mut a = vec![0.0; self.action_dim];
        (0..self.d)
            .map(|x| {
                self.alpha.act(s, x, mu, &mut a);
                let mut row = vec![0.0; self.d];
                self.model.transition(s, x, mu, &a, &mut row);
                row
            })
            .collect()
    }

    fn counting_step(&self, s: usize) -> Result<Vec<Vec<f64>>> {
        let n = self.n;
        (0..self.nz)
            .map(|z| {
                let k = z % n;
                let rows = self.others_rows(s, z);
                let from0 = binomial_pmf(k, rows[0][0])?;
                let from1 = binomial_pmf(n - 1 - k, rows[1][0])?;
                let mut out = vec![0.0; n];
                for (a, pa) in from0.iter().enumerate() {
                    for (b, pb) in from1.iter().enumerate() {
                        out[a + b] += pa * pb;
                    }
                }
                Ok(out)
            })
            .collect()
    }

    /// Calls `f(part, w)` for every next configuration of the others.
    fn for_each_other(&self, s: usize, z: usize, f: &mut dyn FnMut(usize, f64)) {
        match self.mode {
            ChainMode::Product => {
                let rows = self.others_rows(s, z);
                let mut states = vec![0; self.n];
                decode_into(z, self.d, &mut states);
                let mut frontier = vec![(0usize, 1.0)];
                for (j, &x) in states.iter().enumerate() {
                    if j == self.player {
                        frontier.iter_mut().for_each(|e| e.0 *= self.d);
                        continue;
                    }
                    let row = &rows[x];
                    frontier = frontier
                        .iter()
                        .flat_map(|&(idx, w)| {
                            row.iter()
                                .enumerate()
                                .map(move |(y, q)| (idx * self.d + y, w * q))
                        })
                        .filter(|&(_, w)| w > 0.0)
                        .collect();
                }
                for (part, w) in frontier {
                    f(part, w);
                }
            }
            _ => {
                for (k, &w) in self.counting[s - self.t][z].iter().enumerate() {
                    if w > 0.0 {
                        f(k, w);
                    }
                }
            }
        }
    }

    /// `J^N_i` when player `i` follows `dev` and the others `alpha`.
    fn cost(&self, dev: &dyn StatePolicy) -> f64 {
        let mut p = vec![0.0; self.nz];
        p[self.start] = 1.0;
        let mut total = 0.0;
        let mut a = vec![0.0; self.action_dim];
        let mut row = vec![0.0; self.d];
        for s in self.t..self.horizon {
            let mut next = vec![0.0; self.nz];
            for z in 0..self.nz {
                let pz = p[z];
                if pz == 0.0 {
                    continue;
                }
                let (o, mu) = (self.own[z], &self.mus[z]);
                dev.act(s, o, mu, &mut a);
                total += pz * self.model.running_cost(s, o, mu, &a);
                self.model.transition(s, o, mu, &a, &mut row);
                self.for_each_other(s, z, &mut |part, w| {
                    for (y, q) in row.iter().enumerate() {
                        next[part + y * self.stride] += pz * w * q;
                    }
                });
            }
            p = next;
        }
        total
            + p.iter()
                .enumerate()
                .filter(|(_, pz)| **pz != 0.0)
                .map(|(z, pz)| pz * self.model.terminal_cost(self.own[z], &self.mus[z]))
                .sum::<f64>()
    }

    /// Best cost of player `i` observing the whole configuration, over grid
    /// actions and the actions `alpha` would take.
    fn full_information_value(&self) -> f64 {
        let mut v: Vec<f64> = (0..self.nz)
            .map(|z| self.model.terminal_cost(self.own[z], &self.mus[z]))
            .collect();
        let mut a = vec![0.0; self.action_dim];
        let mut row = vec![0.0; self.d];
        for s in (self.t..self.horizon).rev() {
            let mut cur = vec![0.0; self.nz];
            for z in 0..self.nz {
                let (o, mu) = (self.own[z], &self.mus[z]);
                let mut cont = vec![0.0; self.d];
                self.for_each_other(s, z, &mut |part, w| {
                    for (y, c) in cont.iter_mut().enumerate() {
                        *c += w * v[part + y * self.stride];
                    }
                });
                self.alpha.act(s, o, mu, &mut a);
                let mut best = f64::INFINITY;
                for cand in self
                    .grid
                    .iter()
                    .map(|g| g.as_slice())
                    .chain(std::iter::once(a.as_slice()))
                {
                    self.model.transition(s, o, mu, cand, &mut row);
                    let val = self.model.running_cost(s, o, mu, cand)
                        + row.iter().zip(&cont).map(|(q, c)| q * c).sum::<f64>();
                    best = best.min(val);
                }
                cur[z] = best;
            }
            v = cur;
        }
        v[self.start]
    }
}

fn binomial_pmf(trials: usize, p: f64) -> Result<Vec<f64>> {
    let b = Binomial::new(p.clamp(0.0, 1.0), trials as u64)
        .map_err(|e| Error::InvalidArgument(format!("binomial kernel: {e}")))?;
    Ok((0..=trials as u64).map(|k| b.pmf(k)).collect())
}

/// Cost of player `i` deviating to `dev` while the others follow `alpha`.
pub fn homogeneous_cost(
    spec: &GameSpec,
    t: usize,
    cfg: &NConfig,
    alpha: &dyn StatePolicy,
    dev: &dyn StatePolicy,
    i: usize,
    mode: ChainMode,
) -> Result<f64> {
    Ok(PlayerChain::build(spec, t, cfg, alpha, i, mode)?.cost(dev))
}

/// Deviations considered in a best response.
#[derive(Clone, Debug)]
pub enum DeviationFamily {
    /// Every grid state control on `[t, T)`, which ignores the measure.
    Grid,
    /// Explicit controls whose declared Lipschitz constants must not exceed
    /// `lipschitz`.
    Controls {
        controls: Vec<MuControl>,
        lipschitz: f64,
    },
}

impl DeviationFamily {
    pub fn lipschitz(&self) -> f64 {
        match self {
            DeviationFamily::Grid => 0.0,
            DeviationFamily::Controls { lipschitz, .. } => *lipschitz,
        }
    }

    fn check(&self) -> Result<()> {
        if let DeviationFamily::Controls {
            controls,
            lipschitz,
        } = self
        {
            if let Some((k, c)) = controls
                .iter()
                .enumerate()
                .find(|(_, c)| c.lipschitz() > *lipschitz)
            {
                return Err(Error::InvalidArgument(format!(
                    "deviation {k} has Lipschitz constant {} above {lipschitz}",
                    c.lipschitz()
                )));
            }
        }
        Ok(())
    }
}

/// Enclosure of the best-response value `V^N_i`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bracket {
    /// Best cost over the family and `alpha` itself.
    pub upper: f64,
    /// Full-information value, capped by `upper`.
    pub lower: f64,
    /// Minimizing family member; `None` when `alpha` itself is best.
    pub best: Option<u64>,
}

fn best_in_family(
    spec: &GameSpec,
    chain: &PlayerChain<'_>,
    family: &DeviationFamily,
    own_cost: f64,
) -> Result<(f64, Option<u64>)> {
    family.check()?;
    let costs: Vec<f64> = match family {
        DeviationFamily::Grid => {
            let grid = StateControlGrid::new(spec, chain.t, spec.horizon())?;
            (0..grid.count())
                .into_par_iter()
                .map(|id| chain.cost(&grid.control(spec, id)))
                .collect()
        }
        DeviationFamily::Controls { controls, .. } => {
            controls.par_iter().map(|c| chain.cost(c)).collect()
        }
    };
    let mut best = (own_cost, None);
    for (id, c) in costs.into_iter().enumerate() {
        if c < best.0 {
            best = (c, Some(id as u64));
        }
    }
    Ok(best)
}

/// Brackets the best response of player `i` to `alpha`.
pub fn best_response_value(
    spec: &GameSpec,
    t: usize,
    cfg: &NConfig,
    alpha: &dyn StatePolicy,
    i: usize,
    family: &DeviationFamily,
    mode: ChainMode,
) -> Result<Bracket> {
    let chain = PlayerChain::build(spec, t, cfg, alpha, i, mode)?;
    let own = chain.cost(alpha);
    let (upper, best) = best_in_family(spec, &chain, family, own)?;
    Ok(Bracket {
        upper,
        lower: chain.full_information_value().min(upper),
        best,
    })
}

/// Per-player equilibrium gaps of a common control.
#[derive(Clone, Debug, PartialEq)]
pub struct EquilibriumReport {
    pub epsilon: f64,
    pub costs: Vec<f64>,
    pub brackets: Vec<Bracket>,
    /// `J^N_i - upper_i`.
    pub gaps: Vec<f64>,
    pub max_gap: f64,
    pub average_gap: f64,
    /// `max_i gap_i <= epsilon`.
    pub pass: bool,
}

/// Checks whether `alpha` used by every player is an `eps`-equilibrium
/// against `family`. Players sharing an initial state have equal costs and
/// brackets, so one representative per occupied state is evaluated.
pub fn homo_eq_check(
    spec: &GameSpec,
    t: usize,
    cfg: &NConfig,
    alpha: &dyn StatePolicy,
    eps: f64,
    family: &DeviationFamily,
    mode: ChainMode,
) -> Result<EquilibriumReport> {
    check_eps(eps)?;
    cfg.check(spec)?;
    let mut per_state: Vec<Option<(f64, Bracket)>> = vec![None; spec.d()];
    for (x, rep) in cfg.representatives().into_iter().enumerate() {
        if let Some(i) = rep {
            let chain = PlayerChain::build(spec, t, cfg, alpha, i, mode)?;
            let own = chain.cost(alpha);
            let (upper, best) = best_in_family(spec, &chain, family, own)?;
            let lower = chain.full_information_value().min(upper);
            per_state[x] = Some((own, Bracket { upper, lower, best }));
        }
    }
    let (costs, brackets): (Vec<f64>, Vec<Bracket>) = cfg
        .states()
        .iter()
        .map(|&x| per_state[x].expect("occupied state"))
        .unzip();
    let gaps: Vec<f64> = costs
        .iter()
        .zip(&brackets)
        .map(|(j, b)| j - b.upper)
        .collect();
    let max_gap = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let average_gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
    Ok(EquilibriumReport {
        epsilon: eps,
        costs,
        brackets,
        gaps,
        max_gap,
        average_gap,
        pass: max_gap <= eps,
    })
}

/// One point of the N-player set value: the per-state cost vector of a
/// common grid control that passes the equilibrium check.
#[derive(Clone, Debug, PartialEq)]
pub struct NGenerator {
    pub control_id: u64,
    /// `J^N` of the first player in each state; `None` for empty states.
    pub values: Vec<Option<f64>>,
    pub max_gap: f64,
}

/// Grid controls on `[t, T)` that are `eps`-equilibria of the N-player game.
pub fn nplayer_set_value(
    spec: &GameSpec,
    t: usize,
    cfg: &NConfig,
    eps: f64,
    family: &DeviationFamily,
    mode: ChainMode,
) -> Result<Vec<NGenerator>> {
    check_eps(eps)?;
    let grid = StateControlGrid::new(spec, t, spec.horizon())?;
    let per_check = match family {
        DeviationFamily::Grid => grid.size(),
        DeviationFamily::Controls { controls, .. } => controls.len() as f64,
    } + 1.0;
    guard(
        "N-player set value evaluations",
        grid.size() * per_check,
        spec.limits().max_controls,
    )?;
    let reps = cfg.representatives();
    let mut out = Vec::new();
    for id in 0..grid.count() {
        let alpha = grid.control(spec, id);
        let rep = homo_eq_check(spec, t, cfg, &alpha, eps, family, mode)?;
        if rep.pass {
            out.push(NGenerator {
                control_id: id,
                values: reps.iter().map(|r| r.map(|i| rep.costs[i])).collect(),
                max_gap: rep.max_gap,
            });
        }
    }
    Ok(out)
}

/// Default population sizes for convergence experiments.
pub const DEFAULT_N_LIST: [usize; 7] = [8, 16, 32, 64, 128, 256, 512];

/// Default Monte Carlo replications per population size.
pub const DEFAULT_SAMPLES: usize = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub struct MeasureRow {
    pub n: usize,
    /// `E W1(mu^N_s, mu^alpha_s)` for `s = t..=T`.
    pub per_step: Vec<Estimate>,
    /// `E max_s W1(mu^N_s, mu^alpha_s)`.
    pub max_over_steps: Estimate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasureConvergence {
    pub rows: Vec<MeasureRow>,
    /// Log-log fit of the mean maximal distance over the four largest `N`.
    pub fit: Option<RateFit>,
    /// Maximal distances decrease in `N` up to confidence half-widths.
    pub decreasing: bool,
}

/// Distance between the N-player empirical flow and the mean field flow.
/// Initial states are i.i.d. from `mu`; player 0 may use `deviator`.
#[allow(clippy::too_many_arguments)]
pub fn convergence_measures(
    spec: &GameSpec,
    t: usize,
    mu: &SimplexMeasure,
    alpha: &dyn StatePolicy,
    deviator: Option<&dyn StatePolicy>,
    n_list: &[usize],
    samples: usize,
    seed: u64,
) -> Result<MeasureConvergence> {
    let flow = measure_flow(spec, t, mu, alpha)?;
    if n_list.is_empty() || n_list.contains(&0) {
        return Err(Error::InvalidArgument(
            "population sizes must be positive".into(),
        ));
    }
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let mut policies: Vec<&dyn StatePolicy> = vec![alpha; n];
        if let Some(dev) = deviator {
            policies[0] = dev;
        }
        let dists: Vec<Vec<f64>> = (0..samples as u64)
            .into_par_iter()
            .map(|r| {
                let rep = simulate(
                    spec,
                    t,
                    InitialStates::Iid(mu.weights()),
                    &policies,
                    seed,
                    r,
                )?;
                rep.empirical
                    .iter()
                    .enumerate()
                    .map(|(k, m)| w1_finite(m, flow.at(t + k)))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        let steps = spec.horizon() - t + 1;
        let per_step = (0..steps)
            .map(|k| mean_ci(&dists.iter().map(|v| v[k]).collect::<Vec<_>>()))
            .collect::<Result<Vec<_>>>()?;
        let maxes: Vec<f64> = dists
            .iter()
            .map(|v| v.iter().copied().fold(0.0, f64::max))
            .collect();
        rows.push(MeasureRow {
            n,
            per_step,
            max_over_steps: mean_ci(&maxes)?,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.max_over_steps.mean).collect();
    let fit = tail_fit(&xs, &ys, 4).ok();
    let decreasing =
        decreasing_within_ci(&rows.iter().map(|r| r.max_over_steps).collect::<Vec<_>>());
    Ok(MeasureConvergence {
        rows,
        fit,
        decreasing,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValueRow {
    pub n: usize,
    /// `W1(mu^N, mu)` of the rounded configuration.
    pub initial_distance: f64,
    /// `max_i |J^N_i - J(t, mu, alpha; x_i, alpha)|`.
    pub cost_gap: f64,
    /// `max_i |upper_i - v(mu^alpha; t, x_i)|`.
    pub upper_gap: f64,
    /// `max_i |lower_i - v(mu^alpha; t, x_i)|`.
    pub lower_gap: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValueConvergence {
    pub rows: Vec<ValueRow>,
    /// Cost gaps never increase along the list.
    pub monotone: bool,
}

/// Exact N-player costs and best-response brackets against their mean field
/// counterparts, configurations rounded from `mu`.
pub fn convergence_values(
    spec: &GameSpec,
    t: usize,
    mu: &SimplexMeasure,
    alpha: &dyn StatePolicy,
    n_list: &[usize],
    family: &DeviationFamily,
    mode: ChainMode,
) -> Result<ValueConvergence> {
    let mf = mfe_gap(spec, t, mu, alpha)?;
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let cfg = NConfig::from_measure(mu, n)?;
        let rep = homo_eq_check(spec, t, &cfg, alpha, 0.0, family, mode)?;
        let mut row = ValueRow {
            n,
            initial_distance: w1_finite(&cfg.measure(), mu.weights())?,
            cost_gap: 0.0,
            upper_gap: 0.0,
            lower_gap: 0.0,
        };
        for (i, &x) in cfg.states().iter().enumerate() {
            row.cost_gap = row.cost_gap.max((rep.costs[i] - mf.costs[x]).abs());
            row.upper_gap = row
                .upper_gap
                .max((rep.brackets[i].upper - mf.values[x]).abs());
            row.lower_gap = row
                .lower_gap
                .max((rep.brackets[i].lower - mf.values[x]).abs());
        }
        rows.push(row);
    }
    let monotone = rows
        .windows(2)
        .all(|w| w[1].cost_gap <= w[0].cost_gap + 1e-12);
    Ok(ValueConvergence { rows, monotone })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorTrack {
    pub control_id: u64,
    pub values: Vec<f64>,
    /// Per `N`: the control is an `eps`-equilibrium and its N-player costs
    /// lie within `eps` of `values`.
    pub member: Vec<bool>,
    pub distance: Vec<f64>,
    pub max_gap: Vec<f64>,
    /// Smallest listed `N` from which membership holds for every larger
    /// listed `N`.
    pub from_n: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SetValueConvergence {
    pub epsilon: f64,
    pub n_list: Vec<usize>,
    pub tracks: Vec<GeneratorTrack>,
    pub pass: bool,
}

/// Follows every generator of the mean field set value at `eps / 2` into the
/// N-player set value at `eps`, using the generator's own control as the
/// witness.
pub fn set_value_convergence(
    spec: &GameSpec,
    t: usize,
    mu: &SimplexMeasure,
    eps: f64,
    n_list: &[usize],
    mode: ChainMode,
) -> Result<SetValueConvergence> {
    check_eps(eps)?;
    let sv = set_value_eps(spec, t, mu, eps / 2.0)?;
    let grid = StateControlGrid::new(spec, t, spec.horizon())?;
    let cfgs: Vec<NConfig> = n_list
        .iter()
        .map(|&n| NConfig::from_measure(mu, n))
        .collect::<Result<_>>()?;
    let mut tracks = Vec::with_capacity(sv.len());
    for g in &sv.generators {
        let alpha: PureStateControl = grid.control(spec, g.control_id);
        let mut track = GeneratorTrack {
            control_id: g.control_id,
            values: g.values.clone(),
            member: Vec::new(),
            distance: Vec::new(),
            max_gap: Vec::new(),
            from_n: None,
        };
        for cfg in &cfgs {
            let rep = homo_eq_check(spec, t, cfg, &alpha, eps, &DeviationFamily::Grid, mode)?;
            let jn: Option<Vec<f64>> = cfg
                .representatives()
                .iter()
                .map(|r| r.map(|i| rep.costs[i]))
                .collect();
            let dist = jn.map_or(f64::INFINITY, |v| sup_distance(&v, &g.values));
            track.member.push(rep.pass && dist <= eps);
            track.distance.push(dist);
            track.max_gap.push(rep.max_gap);
        }
        let tail = track.member.iter().rev().take_while(|m| **m).count();
        track.from_n = (tail > 0).then(|| n_list[n_list.len() - tail]);
        tracks.push(track);
    }
    let pass = !tracks.is_empty() && tracks.iter().all(|tr| tr.from_n.is_some());
    Ok(SetValueConvergence {
        epsilon: eps,
        n_list: n_list.to_vec(),
        tracks,
        pass,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GapCurve {
    pub epsilon: f64,
    /// `(N, average gap, max gap)`.
    pub rows: Vec<(usize, f64, f64)>,
    /// Smallest listed `N` from which the average gap stays within `eps`.
    pub below_from: Option<usize>,
}

/// Averaged equilibrium gap of `alpha` along population sizes, players
/// placed by rounding `mu`.
#[allow(clippy::too_many_arguments)]
pub fn equilibrium_gap_curve(
    spec: &GameSpec,
    t: usize,
    mu: &SimplexMeasure,
    alpha: &dyn StatePolicy,
    eps: f64,
    n_list: &[usize],
    family: &DeviationFamily,
    mode: ChainMode,
) -> Result<GapCurve> {
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let cfg = NConfig::from_measure(mu, n)?;
        let rep = homo_eq_check(spec, t, &cfg, alpha, eps, family, mode)?;
        rows.push((n, rep.average_gap, rep.max_gap));
    }
    let tail = rows.iter().rev().take_while(|r| r.1 <= eps).count();
    Ok(GapCurve {
        epsilon: eps,
        below_from: (tail > 0).then(|| n_list[n_list.len() - tail]),
        rows,
    })
}
