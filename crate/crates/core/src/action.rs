//! Action sets and the optimization grid `A_h`.

use crate::error::{Error, Result};

const GRID_MATCH_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum ActionKind {
    /// Box `[lower, upper]` per coordinate; grid points must lie inside.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// Only the grid points are admissible.
    ExplicitGrid,
}

/// Action set with its finite grid. Points are stored flat with stride `dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionSet {
    dim: usize,
    kind: ActionKind,
    grid: Vec<f64>,
}

/// Location of an action relative to the grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GridLocation {
    Exact(usize),
    /// One-dimensional interpolation `(1-w)*grid[lo] + w*grid[hi]`.
    Between {
        lo: usize,
        hi: usize,
        w: f64,
    },
}

impl ActionSet {
    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>, grid: Vec<Vec<f64>>) -> Result<Self> {
        let dim = lower.len();
        if dim == 0 || upper.len() != dim {
            return Err(Error::InvalidSpec(
                "box bounds must share a positive dimension".into(),
            ));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidSpec(
                "box lower bound exceeds upper bound".into(),
            ));
        }
        let kind = ActionKind::Box { lower, upper };
        Self::build(dim, kind, grid)
    }

    pub fn explicit(grid: Vec<Vec<f64>>) -> Result<Self> {
        let dim = grid.first().map(|p| p.len()).unwrap_or(0);
        Self::build(dim, ActionKind::ExplicitGrid, grid)
    }

    /// One-dimensional box `[lo, hi]` with grid points `points`.
    pub fn interval(lo: f64, hi: f64, points: &[f64]) -> Result<Self> {
        Self::boxed(
            vec![lo],
            vec![hi],
            points.iter().map(|&p| vec![p]).collect(),
        )
    }

    /// One-dimensional box with `n >= 2` equispaced grid points including both ends.
    pub fn uniform_interval(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Self::interval(lo, hi, &[lo]);
        }
        let pts: Vec<f64> = (0..n)
            .map(|k| {
                if k + 1 == n {
                    hi
                } else {
                    lo + (hi - lo) * k as f64 / (n - 1) as f64
                }
            })
            .collect();
        Self::interval(lo, hi, &pts)
    }

    fn build(dim: usize, kind: ActionKind, grid: Vec<Vec<f64>>) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::InvalidSpec("action grid must be nonempty".into()));
        }
        if dim == 0 {
            return Err(Error::InvalidSpec(
                "actions need at least one coordinate".into(),
            ));
        }
        let mut flat = Vec::with_capacity(grid.len() * dim);
        for p in &grid {
            if p.len() != dim {
                return Err(Error::InvalidSpec(format!(
                    "grid point of dimension {} in a {dim}-dimensional action set",
                    p.len()
                )));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSpec("non-finite grid point".into()));
            }
            flat.extend_from_slice(p);
        }
        let set = Self {
            dim,
            kind,
            grid: flat,
        };
        for k in 0..set.len() {
            if !set.contains(set.point(k)) {
                return Err(Error::InvalidSpec(format!(
                    "grid point {:?} outside the action box",
                    set.point(k)
                )));
            }
        }
        Ok(set)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &ActionKind {
        &self.kind
    }

    /// Number of grid points `|A_h|`.
    pub fn len(&self) -> usize {
        self.grid.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.grid[k * self.dim..(k + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.grid.chunks(self.dim)
    }

    pub fn flat_grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn contains(&self, a: &[f64]) -> bool {
        if a.len() != self.dim {
            return false;
        }
        match &self.kind {
            ActionKind::Box { lower, upper } => a
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *v >= l - GRID_MATCH_TOL && *v <= u + GRID_MATCH_TOL),
            ActionKind::ExplicitGrid => self.grid_index(a).is_some(),
        }
    }

    /// Projects onto the box coordinate-wise; explicit grids snap to the nearest point.
    pub fn clip(&self, a: &mut [f64]) {
        match &self.kind {
            ActionKind::Box { lower, upper } => {
                for ((v, l), u) in a.iter_mut().zip(lower).zip(upper) {
                    *v = v.clamp(*l, *u);
                }
            }
            ActionKind::ExplicitGrid => {
                let k = self.nearest(a);
                a.copy_from_slice(self.point(k));
            }
        }
    }

    pub fn grid_index(&self, a: &[f64]) -> Option<usize> {
        (0..self.len()).find(|&k| {
            self.point(k)
                .iter()
                .zip(a)
                .all(|(p, v)| (p - v).abs() <= GRID_MATCH_TOL)
        })
    }

    pub fn nearest(&self, a: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for k in 0..self.len() {
            let d: f64 = self
                .point(k)
                .iter()
                .zip(a)
                .map(|(p, v)| (p - v) * (p - v))
                .sum();
            if d < best_d {
                best_d = d;
                best = k;
            }
        }
        best
    }

    /// Locates an action for table lookups: exact grid match, otherwise linear
    /// interpolation between neighbouring grid values in one dimension
    /// (clamped at the ends), otherwise the nearest grid point.
    pub fn locate(&self, a: &[f64]) -> GridLocation {
        if let Some(k) = self.grid_index(a) {
            return GridLocation::Exact(k);
        }
        if self.dim != 1 || self.len() == 1 {
            return GridLocation::Exact(self.nearest(a));
        }
        let v = a[0];
        let mut lo: Option<usize> = None;
        let mut hi: Option<usize> = None;
        for k in 0..self.len() {
            let g = self.grid[k];
            if g <= v && lo.is_none_or(|j| g > self.grid[j]) {
                lo = Some(k);
            }
            if g >= v && hi.is_none_or(|j| g < self.grid[j]) {
                hi = Some(k);
            }
        }
        match (lo, hi) {
            (Some(l), Some(h)) if l != h => {
                let w = (v - self.grid[l]) / (self.grid[h] - self.grid[l]);
                GridLocation::Between { lo: l, hi: h, w }
            }
            (Some(l), _) => GridLocation::Exact(l),
            (_, Some(h)) => GridLocation::Exact(h),
            _ => GridLocation::Exact(self.nearest(a)),
        }
    }

    /// Same set with a new uniform grid of `n` points per coordinate (box only).
    pub fn with_resolution(&self, n: usize) -> Result<Self> {
        match &self.kind {
            ActionKind::Box { lower, upper } => {
                let axes: Vec<Vec<f64>> = lower
                    .iter()
                    .zip(upper)
                    .map(|(&l, &u)| {
                        if n < 2 || l == u {
                            vec![l]
                        } else {
                            (0..n)
                                .map(|k| {
                                    if k + 1 == n {
                                        u
                                    } else {
                                        l + (u - l) * k as f64 / (n - 1) as f64
                                    }
                                })
                                .collect()
                        }
                    })
                    .collect();
                let mut grid: Vec<Vec<f64>> = vec![Vec::new()];
                for axis in &axes {
                    grid = grid
                        .into_iter()
                        .flat_map(|p| {
                            axis.iter().map(move |&v| {
                                let mut q = p.clone();
                                q.push(v);
                                q
                            })
                        })
                        .collect();
                }
                Self::boxed(lower.clone(), upper.clone(), grid)
            }
            ActionKind::ExplicitGrid => Err(Error::InvalidArgument(
                "grid resolution applies to box action sets only".into(),
            )),
        }
    }
}
