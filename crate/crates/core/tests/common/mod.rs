//! Brute-force references written without the library recursions. They
//! read only the model coefficients and the action grid.

#![allow(dead_code)]

use mfgset::game::StateModel;
use mfgset::GameSpec;

/// Every assignment of a grid index to `slots` slots, first slot most
/// significant.
pub fn assignments(base: usize, slots: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..slots {
        let mut next = Vec::with_capacity(out.len() * base);
        for prefix in &out {
            for k in 0..base {
                let mut v = prefix.clone();
                v.push(k);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

pub struct Oracle<'a> {
    pub model: &'a dyn StateModel,
    pub grid: Vec<Vec<f64>>,
    pub d: usize,
    pub horizon: usize,
}

impl<'a> Oracle<'a> {
    pub fn new(spec: &'a GameSpec) -> Self {
        Self {
            model: spec.state_model("oracle").expect("state game"),
            grid: spec.actions().points().map(|p| p.to_vec()).collect(),
            d: spec.d(),
            horizon: spec.horizon(),
        }
    }

    fn act(&self, ctrl: &[usize], t: usize, s: usize, x: usize) -> &[f64] {
        &self.grid[ctrl[(s - t) * self.d + x]]
    }

    /// Population flow `mu_t, ..., mu_T` under the index control.
    pub fn flow(&self, t: usize, mu: &[f64], ctrl: &[usize]) -> Vec<Vec<f64>> {
        let mut out = vec![mu.to_vec()];
        let mut q = vec![0.0; self.d];
        for s in t..self.horizon {
            let cur = out.last().unwrap().clone();
            let mut next = vec![0.0; self.d];
            for x in 0..self.d {
                self.model
                    .transition(s, x, &cur, self.act(ctrl, t, s, x), &mut q);
                for y in 0..self.d {
                    next[y] += cur[x] * q[y];
                }
            }
            out.push(next);
        }
        out
    }

    /// Cost of following `dev` from every start state against `flow`, by
    /// summing over all state sequences.
    pub fn cost(&self, t: usize, flow: &[Vec<f64>], dev: &[usize]) -> Vec<f64> {
        let steps = self.horizon - t;
        let mut q = vec![0.0; self.d];
        (0..self.d)
            .map(|x0| {
                let mut total = 0.0;
                for tail in assignments(self.d, steps) {
                    let mut prob = 1.0;
                    let mut run = 0.0;
                    let mut x = x0;
                    for (k, &y) in tail.iter().enumerate() {
                        let s = t + k;
                        let a = self.act(dev, t, s, x);
                        run += self.model.running_cost(s, x, &flow[k], a);
                        self.model.transition(s, x, &flow[k], a, &mut q);
                        prob *= q[y];
                        x = y;
                    }
                    total += prob * (run + self.model.terminal_cost(x, &flow[steps]));
                }
                total
            })
            .collect()
    }

    /// Pointwise minimum of `cost` over every grid control on `[t, T)`.
    pub fn value(&self, t: usize, flow: &[Vec<f64>]) -> Vec<f64> {
        let slots = (self.horizon - t) * self.d;
        let mut best = vec![f64::INFINITY; self.d];
        for dev in assignments(self.grid.len(), slots) {
            for (b, c) in best.iter_mut().zip(self.cost(t, flow, &dev)) {
                *b = b.min(c);
            }
        }
        best
    }

    /// Cost vectors of grid controls with gap at most `tol`, merged at
    /// `merge` in sup norm.
    pub fn raw_set_value(&self, t: usize, mu: &[f64], tol: f64, merge: f64) -> Vec<Vec<f64>> {
        let slots = (self.horizon - t) * self.d;
        let mut out: Vec<Vec<f64>> = Vec::new();
        for ctrl in assignments(self.grid.len(), slots) {
            let flow = self.flow(t, mu, &ctrl);
            let j = self.cost(t, &flow, &ctrl);
            let v = self.value(t, &flow);
            let gap = j
                .iter()
                .zip(&v)
                .map(|(a, b)| a - b)
                .fold(f64::NEG_INFINITY, f64::max);
            if gap <= tol && !out.iter().any(|g| sup(g, &j) <= merge) {
                out.push(j);
            }
        }
        out
    }

    /// Exact N-player costs by enumerating joint state sequences. Player
    /// `i` uses the index control `ctrls[i]` on `[t, T)`.
    pub fn nplayer_costs(&self, t: usize, start: &[usize], ctrls: &[Vec<usize>]) -> Vec<f64> {
        let n = start.len();
        let steps = self.horizon - t;
        let mut costs = vec![0.0; n];
        let mut q = vec![0.0; self.d];
        // each step moves all players; enumerate joint moves step by step
        for seq in assignments(self.d, n * steps) {
            let mut states = start.to_vec();
            let mut prob = 1.0;
            let mut run = vec![0.0; n];
            for k in 0..steps {
                let s = t + k;
                let emp = empirical(self.d, &states);
                let mut next = states.clone();
                for i in 0..n {
                    let a = self.act(&ctrls[i], t, s, states[i]);
                    run[i] += self.model.running_cost(s, states[i], &emp, a);
                    self.model.transition(s, states[i], &emp, a, &mut q);
                    let y = seq[k * n + i];
                    prob *= q[y];
                    next[i] = y;
                }
                states = next;
            }
            if prob == 0.0 {
                continue;
            }
            let emp = empirical(self.d, &states);
            for i in 0..n {
                costs[i] += prob * (run[i] + self.model.terminal_cost(states[i], &emp));
            }
        }
        costs
    }
}

pub fn empirical(d: usize, states: &[usize]) -> Vec<f64> {
    let mut m = vec![0.0; d];
    for &x in states {
        m[x] += 1.0 / states.len() as f64;
    }
    m
}

pub fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Largest distance from a member of either list to the other list.
pub fn hausdorff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let one = |p: &[Vec<f64>], q: &[Vec<f64>]| {
        p.iter()
            .map(|u| q.iter().map(|v| sup(u, v)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    one(a, b).max(one(b, a))
}
