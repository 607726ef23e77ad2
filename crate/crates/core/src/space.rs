//! State space, time grid and stopped-path spaces.
//!
//! A path in `X_t` is the vector `(x_0, .., x_t)` encoded in base `d` with
//! `x_0` most significant, so the children of path `p` at time `t+1` are
//! `p*d .. p*d + d` and the descendants of `p` at time `s >= t` form the
//! contiguous block `p*d^(s-t) .. (p+1)*d^(s-t)`.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateSpace {
    labels: Vec<String>,
}

impl StateSpace {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidSpec(
                "state space must have at least one state".into(),
            ));
        }
        let mut sorted = labels.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != labels.len() {
            return Err(Error::InvalidSpec("state labels must be distinct".into()));
        }
        Ok(Self { labels })
    }

    /// States labelled `s0, s1, ..`.
    pub fn numbered(d: usize) -> Self {
        Self {
            labels: (0..d.max(1)).map(|i| format!("s{i}")).collect(),
        }
    }

    pub fn d(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TimeGrid {
    horizon: usize,
}

impl TimeGrid {
    pub fn new(horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidSpec("horizon T must be at least 1".into()));
        }
        Ok(Self { horizon })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn check(&self, t: usize) -> Result<()> {
        if t > self.horizon {
            Err(Error::TimeOutOfRange {
                time: t,
                lo: 0,
                hi: self.horizon,
            })
        } else {
            Ok(())
        }
    }
}

/// The set `X_t` of paths stopped at `t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PathSpace {
    d: usize,
    t: usize,
}

impl PathSpace {
    pub fn new(d: usize, t: usize) -> Self {
        Self { d, t }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn time(&self) -> usize {
        self.t
    }

    /// `|X_t| = d^(t+1)`.
    pub fn len(&self) -> usize {
        self.d.pow(self.t as u32 + 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn next(&self) -> Self {
        Self::new(self.d, self.t + 1)
    }

    pub fn last_state(&self, path: usize) -> usize {
        path % self.d
    }

    pub fn child(&self, path: usize, x: usize) -> usize {
        path * self.d + x
    }

    /// The path restricted to `X_s`, `s <= t`.
    pub fn restrict(&self, path: usize, s: usize) -> usize {
        path / self.d.pow((self.t - s) as u32)
    }

    /// Range of descendants in `X_s` of a path in `X_t`, `s >= t`.
    pub fn descendants(&self, path: usize, s: usize) -> std::ops::Range<usize> {
        let k = self.d.pow((s - self.t) as u32);
        path * k..(path + 1) * k
    }

    pub fn states(&self, path: usize) -> Vec<usize> {
        let mut out = vec![0; self.t + 1];
        let mut p = path;
        for slot in out.iter_mut().rev() {
            *slot = p % self.d;
            p /= self.d;
        }
        out
    }

    pub fn id_of(&self, states: &[usize]) -> Result<usize> {
        if states.len() != self.t + 1 {
            return Err(Error::DimensionMismatch {
                expected: self.t + 1,
                got: states.len(),
            });
        }
        let mut id = 0;
        for &x in states {
            if x >= self.d {
                return Err(Error::InvalidArgument(format!(
                    "state {x} outside 0..{}",
                    self.d
                )));
            }
            id = id * self.d + x;
        }
        Ok(id)
    }

    /// Marginal law of the last state.
    pub fn marginal(&self, weights: &[f64]) -> Vec<f64> {
        let mut m = vec![0.0; self.d];
        for (p, w) in weights.iter().enumerate() {
            m[p % self.d] += w;
        }
        m
    }

    /// Human-readable path label such as `0-1-1`.
    pub fn label(&self, path: usize) -> String {
        self.states(path)
            .iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join("-")
    }
}

/// Total number of path nodes `(s, path)` with `s` in `[from, to)`.
pub fn path_node_count(d: usize, from: usize, to: usize) -> usize {
    (from..to).map(|s| d.pow(s as u32 + 1)).sum()
}
