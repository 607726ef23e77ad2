//! Control families: pure state controls, measure-dependent Lipschitz
//! controls, pure path controls and relaxed (mixed) controls.

use crate::dynamics::FlowRecord;
use crate::error::{Error, Result};
use crate::game::GameSpec;
use crate::space::{path_node_count, PathSpace};

/// Feedback `(s, x, mu) -> a` on the state space.
pub trait StatePolicy: Send + Sync {
    /// Writes the action at time `s`, state `x` against the marginal `mu`.
    fn act(&self, s: usize, x: usize, mu: &[f64], out: &mut [f64]);

    fn depends_on_measure(&self) -> bool {
        false
    }
}

/// Adapted path feedback, possibly mixed: the law of the action at a node.
pub trait PathPolicy: Send + Sync {
    /// First time at which the policy is defined.
    fn start(&self) -> usize;

    /// Visits `(action, weight)` for every atom with positive weight at
    /// node `(s, path)`, `path` indexing `X_s`.
    fn for_each_atom(&self, s: usize, path: usize, f: &mut dyn FnMut(&[f64], f64));
}

/// Action per `(s, x)`, `s < T`.
#[derive(Clone, Debug, PartialEq)]
pub struct PureStateControl {
    horizon: usize,
    d: usize,
    dim: usize,
    table: Vec<f64>,
}

impl PureStateControl {
    pub fn from_fn(spec: &GameSpec, mut f: impl FnMut(usize, usize) -> Vec<f64>) -> Result<Self> {
        let (horizon, d, dim) = (spec.horizon(), spec.d(), spec.actions().dim());
        let mut table = Vec::with_capacity(horizon * d * dim);
        for s in 0..horizon {
            for x in 0..d {
                let a = f(s, x);
                if !spec.actions().contains(&a) {
                    return Err(Error::InvalidArgument(format!(
                        "action {a:?} outside the action set"
                    )));
                }
                table.extend_from_slice(&a);
            }
        }
        Ok(Self {
            horizon,
            d,
            dim,
            table,
        })
    }

    pub fn constant(spec: &GameSpec, a: &[f64]) -> Result<Self> {
        Self::from_fn(spec, |_, _| a.to_vec())
    }

    /// Grid indices listed time-major: `idx[s * d + x]`.
    pub fn from_grid_indices(spec: &GameSpec, idx: &[usize]) -> Result<Self> {
        let (horizon, d) = (spec.horizon(), spec.d());
        if idx.len() != horizon * d {
            return Err(Error::DimensionMismatch {
                expected: horizon * d,
                got: idx.len(),
            });
        }
        let grid = spec.actions();
        if let Some(&k) = idx.iter().find(|&&k| k >= grid.len()) {
            return Err(Error::InvalidArgument(format!(
                "grid index {k} outside 0..{}",
                grid.len()
            )));
        }
        Self::from_fn(spec, |s, x| grid.point(idx[s * d + x]).to_vec())
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn action(&self, s: usize, x: usize) -> &[f64] {
        let i = (s * self.d + x) * self.dim;
        &self.table[i..i + self.dim]
    }

    pub fn set_action(&mut self, s: usize, x: usize, a: &[f64]) {
        let i = (s * self.d + x) * self.dim;
        self.table[i..i + self.dim].copy_from_slice(a);
    }

    /// `self` before `t0`, `other` from `t0` on.
    pub fn concat(&self, other: &Self, t0: usize) -> Result<Self> {
        check_compatible(self.horizon, other.horizon, self.d, other.d)?;
        if t0 > self.horizon {
            return Err(Error::TimeOutOfRange {
                time: t0,
                lo: 0,
                hi: self.horizon,
            });
        }
        let cut = t0 * self.d * self.dim;
        let mut table = self.table[..cut].to_vec();
        table.extend_from_slice(&other.table[cut..]);
        Ok(Self {
            table,
            ..self.clone()
        })
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.table
            .iter()
            .zip(&other.table)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Same action for every path sharing the current state.
    pub fn to_path_control(&self, start: usize) -> PurePathControl {
        PurePathControl::from_fn_unchecked(self.d, self.horizon, start, self.dim, |s, p| {
            self.action(s, p % self.d).to_vec()
        })
    }
}

fn check_compatible(h1: usize, h2: usize, d1: usize, d2: usize) -> Result<()> {
    if h1 != h2 || d1 != d2 {
        Err(Error::InvalidArgument(
            "controls belong to different games".into(),
        ))
    } else {
        Ok(())
    }
}

impl StatePolicy for PureStateControl {
    fn act(&self, s: usize, x: usize, _mu: &[f64], out: &mut [f64]) {
        out.copy_from_slice(self.action(s, x));
    }
}

impl PathPolicy for PureStateControl {
    fn start(&self) -> usize {
        0
    }

    fn for_each_atom(&self, s: usize, path: usize, f: &mut dyn FnMut(&[f64], f64)) {
        f(self.action(s, path % self.d), 1.0);
    }
}

/// `alpha(s, x, mu) = clip(beta0(s, x) + beta1(s, x) <w, mu>)` per coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineClipped {
    horizon: usize,
    d: usize,
    dim: usize,
    beta0: Vec<f64>,
    beta1: Vec<f64>,
    weights: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    lipschitz: f64,
}

impl AffineClipped {
    /// `beta0`, `beta1` are time-major over `(s, x, coordinate)`; the clip
    /// box is the action box (or the grid hull for explicit grids). Fails
    /// when the declared constant is below the certified one.
    pub fn new(
        spec: &GameSpec,
        beta0: Vec<f64>,
        beta1: Vec<f64>,
        weights: Vec<f64>,
        declared_lipschitz: f64,
    ) -> Result<Self> {
        let (horizon, d, dim) = (spec.horizon(), spec.d(), spec.actions().dim());
        let n = horizon * d * dim;
        if beta0.len() != n || beta1.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: beta0.len().min(beta1.len()),
            });
        }
        if weights.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: weights.len(),
            });
        }
        let (lower, upper) = hull(spec);
        let c = Self {
            horizon,
            d,
            dim,
            beta0,
            beta1,
            weights,
            lower,
            upper,
            lipschitz: declared_lipschitz,
        };
        let cert = c.certified_lipschitz();
        if declared_lipschitz + 1e-12 < cert {
            return Err(Error::InvalidArgument(format!(
                "declared Lipschitz constant {declared_lipschitz} below certified {cert}"
            )));
        }
        Ok(c)
    }

    /// `max |beta1| * (max w - min w) / 2`: since measures have equal mass,
    /// `|<w, mu - nu>| <= (max w - min w)/2 * W1(mu, nu)`, and clipping is
    /// 1-Lipschitz. Actions are compared in the max-coordinate norm.
    pub fn certified_lipschitz(&self) -> f64 {
        let wmax = self
            .weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let wmin = self.weights.iter().copied().fold(f64::INFINITY, f64::min);
        let bmax = self.beta1.iter().fold(0.0f64, |m, b| m.max(b.abs()));
        bmax * (wmax - wmin) / 2.0
    }

    pub fn declared_lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

fn hull(spec: &GameSpec) -> (Vec<f64>, Vec<f64>) {
    match spec.actions().kind() {
        crate::action::ActionKind::Box { lower, upper } => (lower.clone(), upper.clone()),
        crate::action::ActionKind::ExplicitGrid => {
            let dim = spec.actions().dim();
            let mut lo = vec![f64::INFINITY; dim];
            let mut hi = vec![f64::NEG_INFINITY; dim];
            for p in spec.actions().points() {
                for i in 0..dim {
                    lo[i] = lo[i].min(p[i]);
                    hi[i] = hi[i].max(p[i]);
                }
            }
            (lo, hi)
        }
    }
}

impl StatePolicy for AffineClipped {
    fn act(&self, s: usize, x: usize, mu: &[f64], out: &mut [f64]) {
        let m: f64 = self.weights.iter().zip(mu).map(|(w, v)| w * v).sum();
        let base = (s * self.d + x) * self.dim;
        for (i, o) in out.iter_mut().enumerate() {
            let v = self.beta0[base + i] + self.beta1[base + i] * m;
            *o = v.clamp(self.lower[i], self.upper[i]);
        }
    }

    fn depends_on_measure(&self) -> bool {
        self.beta1.iter().any(|b| *b != 0.0)
    }
}

/// Measure-dependent state control with a declared Lipschitz constant in W1.
#[derive(Clone, Debug, PartialEq)]
pub enum MuControl {
    /// Ignores the measure.
    Independent(PureStateControl),
    /// A pure control obtained by evaluating a measure-dependent one along
    /// its own flow, kept with that flow.
    Frozen {
        control: PureStateControl,
        flow: FlowRecord,
    },
    Affine(AffineClipped),
}

impl MuControl {
    pub fn lipschitz(&self) -> f64 {
        match self {
            MuControl::Independent(_) | MuControl::Frozen { .. } => 0.0,
            MuControl::Affine(a) => a.declared_lipschitz(),
        }
    }
}

impl StatePolicy for MuControl {
    fn act(&self, s: usize, x: usize, mu: &[f64], out: &mut [f64]) {
        match self {
            MuControl::Independent(c) | MuControl::Frozen { control: c, .. } => {
                c.act(s, x, mu, out)
            }
            MuControl::Affine(a) => a.act(s, x, mu, out),
        }
    }

    fn depends_on_measure(&self) -> bool {
        match self {
            MuControl::Affine(a) => a.depends_on_measure(),
            _ => false,
        }
    }
}

fn node_offsets(d: usize, start: usize, horizon: usize) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(horizon - start + 1);
    let mut acc = 0;
    for s in start..=horizon {
        offsets.push(acc);
        if s < horizon {
            acc += d.pow(s as u32 + 1);
        }
    }
    offsets
}

/// Action per node `(s, path in X_s)` for `start <= s < T`.
#[derive(Clone, Debug, PartialEq)]
pub struct PurePathControl {
    d: usize,
    horizon: usize,
    start: usize,
    dim: usize,
    offsets: Vec<usize>,
    actions: Vec<f64>,
}

impl PurePathControl {
    pub fn from_fn(
        spec: &GameSpec,
        start: usize,
        mut f: impl FnMut(usize, usize) -> Vec<f64>,
    ) -> Result<Self> {
        spec.check_time(start)?;
        spec.check_path_cap()?;
        let mut err = None;
        let c = Self::from_fn_unchecked(
            spec.d(),
            spec.horizon(),
            start,
            spec.actions().dim(),
            |s, p| {
                let a = f(s, p);
                if !spec.actions().contains(&a) && err.is_none() {
                    err = Some(Error::InvalidArgument(format!(
                        "action {a:?} outside the action set"
                    )));
                }
                a
            },
        );
        match err {
            Some(e) => Err(e),
            None => Ok(c),
        }
    }

    pub(crate) fn from_fn_unchecked(
        d: usize,
        horizon: usize,
        start: usize,
        dim: usize,
        mut f: impl FnMut(usize, usize) -> Vec<f64>,
    ) -> Self {
        let offsets = node_offsets(d, start, horizon);
        let mut actions = Vec::with_capacity(path_node_count(d, start, horizon) * dim);
        for s in start..horizon {
            for p in 0..d.pow(s as u32 + 1) {
                actions.extend_from_slice(&f(s, p)[..dim]);
            }
        }
        Self {
            d,
            horizon,
            start,
            dim,
            offsets,
            actions,
        }
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn action(&self, s: usize, path: usize) -> &[f64] {
        let i = (self.offsets[s - self.start] + path) * self.dim;
        &self.actions[i..i + self.dim]
    }

    pub fn set_action(&mut self, s: usize, path: usize, a: &[f64]) {
        let i = (self.offsets[s - self.start] + path) * self.dim;
        self.actions[i..i + self.dim].copy_from_slice(a);
    }

    pub fn node_count(&self) -> usize {
        self.actions.len() / self.dim
    }

    /// `self` before `t0`, `other` from `t0` on; both must share the start.
    pub fn concat(&self, other: &Self, t0: usize) -> Result<Self> {
        check_compatible(self.horizon, other.horizon, self.d, other.d)?;
        if other.start != self.start {
            return Err(Error::InvalidArgument(
                "path controls start at different times".into(),
            ));
        }
        if t0 < self.start || t0 > self.horizon {
            return Err(Error::TimeOutOfRange {
                time: t0,
                lo: self.start,
                hi: self.horizon,
            });
        }
        let cut = self.offsets[t0 - self.start] * self.dim;
        let mut actions = self.actions[..cut].to_vec();
        actions.extend_from_slice(&other.actions[cut..]);
        Ok(Self {
            actions,
            ..self.clone()
        })
    }

    /// Equality on the nodes reachable from `root` in `X_start`.
    pub fn agrees_from(&self, other: &Self, root: usize) -> bool {
        let space = PathSpace::new(self.d, self.start);
        (self.start..self.horizon).all(|s| {
            space
                .descendants(root, s)
                .all(|p| self.action(s, p) == other.action(s, p))
        })
    }

    pub fn flat_actions(&self) -> &[f64] {
        &self.actions
    }
}

impl PathPolicy for PurePathControl {
    fn start(&self) -> usize {
        self.start
    }

    fn for_each_atom(&self, s: usize, path: usize, f: &mut dyn FnMut(&[f64], f64)) {
        f(self.action(s, path), 1.0);
    }
}

/// Law over a finite action support per node `(s, path in X_s)`, `s >= start`.
#[derive(Clone, Debug, PartialEq)]
pub struct RelaxedControl {
    d: usize,
    horizon: usize,
    start: usize,
    dim: usize,
    support: Vec<f64>,
    offsets: Vec<usize>,
    rows: Vec<f64>,
}

impl RelaxedControl {
    /// Rows over the spec's grid, produced per node by `f(s, path)`.
    pub fn from_rows(
        spec: &GameSpec,
        start: usize,
        f: impl FnMut(usize, usize) -> Vec<f64>,
    ) -> Result<Self> {
        let support = spec.actions().flat_grid().to_vec();
        Self::with_support(spec, start, support, f)
    }

    pub fn with_support(
        spec: &GameSpec,
        start: usize,
        support: Vec<f64>,
        mut f: impl FnMut(usize, usize) -> Vec<f64>,
    ) -> Result<Self> {
        spec.check_time(start)?;
        spec.check_path_cap()?;
        let (d, horizon, dim) = (spec.d(), spec.horizon(), spec.actions().dim());
        if support.is_empty() || support.len() % dim != 0 {
            return Err(Error::InvalidArgument(
                "relaxed support has wrong shape".into(),
            ));
        }
        let n = support.len() / dim;
        let offsets = node_offsets(d, start, horizon);
        let mut rows = Vec::with_capacity(path_node_count(d, start, horizon) * n);
        for s in start..horizon {
            for p in 0..d.pow(s as u32 + 1) {
                let row = f(s, p);
                check_row(&row, n)?;
                rows.extend_from_slice(&row);
            }
        }
        Ok(Self {
            d,
            horizon,
            start,
            dim,
            support,
            offsets,
            rows,
        })
    }

    /// Dirac rows at the actions of a pure path control, on the spec grid.
    pub fn dirac(spec: &GameSpec, pure: &PurePathControl) -> Result<Self> {
        let grid = spec.actions();
        let mut err = None;
        let c = Self::from_rows(spec, pure.start(), |s, p| {
            let mut row = vec![0.0; grid.len()];
            match grid.grid_index(pure.action(s, p)) {
                Some(k) => row[k] = 1.0,
                None => {
                    row[0] = 1.0;
                    err.get_or_insert(Error::InvalidArgument(
                        "pure control leaves the grid".into(),
                    ));
                }
            }
            row
        })?;
        match err {
            Some(e) => Err(e),
            None => Ok(c),
        }
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn support_len(&self) -> usize {
        self.support.len() / self.dim
    }

    pub fn support_point(&self, j: usize) -> &[f64] {
        &self.support[j * self.dim..(j + 1) * self.dim]
    }

    pub fn flat_support(&self) -> &[f64] {
        &self.support
    }

    pub fn row(&self, s: usize, path: usize) -> &[f64] {
        let n = self.support_len();
        let i = (self.offsets[s - self.start] + path) * n;
        &self.rows[i..i + n]
    }

    pub fn node_count(&self) -> usize {
        self.rows.len() / self.support_len()
    }

    pub fn concat(&self, other: &Self, t0: usize) -> Result<Self> {
        check_compatible(self.horizon, other.horizon, self.d, other.d)?;
        if other.start != self.start || other.support != self.support {
            return Err(Error::InvalidArgument(
                "relaxed controls differ in start or support".into(),
            ));
        }
        if t0 < self.start || t0 > self.horizon {
            return Err(Error::TimeOutOfRange {
                time: t0,
                lo: self.start,
                hi: self.horizon,
            });
        }
        let cut = self.offsets[t0 - self.start] * self.support_len();
        let mut rows = self.rows[..cut].to_vec();
        rows.extend_from_slice(&other.rows[cut..]);
        Ok(Self {
            rows,
            ..self.clone()
        })
    }

    /// Largest difference of row weights, comparing atoms by action value.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.start != other.start || self.horizon != other.horizon || self.d != other.d {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        let mut pts: Vec<&[f64]> = (0..self.support_len())
            .map(|j| self.support_point(j))
            .collect();
        for j in 0..other.support_len() {
            let p = other.support_point(j);
            if !pts.contains(&p) {
                pts.push(p);
            }
        }
        for s in self.start..self.horizon {
            for path in 0..self.d.pow(s as u32 + 1) {
                let (r1, r2) = (self.row(s, path), other.row(s, path));
                for p in &pts {
                    let w1: f64 = (0..self.support_len())
                        .filter(|&j| self.support_point(j) == *p)
                        .map(|j| r1[j])
                        .sum();
                    let w2: f64 = (0..other.support_len())
                        .filter(|&j| other.support_point(j) == *p)
                        .map(|j| r2[j])
                        .sum();
                    worst = worst.max((w1 - w2).abs());
                }
            }
        }
        worst
    }

    /// True when every row is a Dirac mass.
    pub fn is_pure(&self) -> bool {
        self.rows
            .chunks(self.support_len())
            .all(|r| r.iter().filter(|w| **w > 0.0).count() == 1)
    }
}

fn check_row(row: &[f64], n: usize) -> Result<()> {
    if row.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: row.len(),
        });
    }
    if row.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::InvalidMeasure("negative relaxed weight".into()));
    }
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > crate::measure::SIMPLEX_TOL {
        return Err(Error::InvalidMeasure(format!("relaxed row mass {total}")));
    }
    Ok(())
}

impl PathPolicy for RelaxedControl {
    fn start(&self) -> usize {
        self.start
    }

    fn for_each_atom(&self, s: usize, path: usize, f: &mut dyn FnMut(&[f64], f64)) {
        let row = self.row(s, path);
        for (j, &w) in row.iter().enumerate() {
            if w > 0.0 {
                f(self.support_point(j), w);
            }
        }
    }
}

/// Relaxed control reading only the current state: one row per `(s, x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateRelaxedControl {
    d: usize,
    horizon: usize,
    start: usize,
    dim: usize,
    support: Vec<f64>,
    rows: Vec<f64>,
}

impl StateRelaxedControl {
    pub fn from_rows(
        spec: &GameSpec,
        start: usize,
        support: Vec<f64>,
        mut f: impl FnMut(usize, usize) -> Vec<f64>,
    ) -> Result<Self> {
        spec.check_time(start)?;
        let (d, horizon, dim) = (spec.d(), spec.horizon(), spec.actions().dim());
        if support.is_empty() || support.len() % dim != 0 {
            return Err(Error::InvalidArgument(
                "relaxed support has wrong shape".into(),
            ));
        }
        let n = support.len() / dim;
        let mut rows = Vec::with_capacity((horizon - start) * d * n);
        for s in start..horizon {
            for x in 0..d {
                let row = f(s, x);
                check_row(&row, n)?;
                rows.extend_from_slice(&row);
            }
        }
        Ok(Self {
            d,
            horizon,
            start,
            dim,
            support,
            rows,
        })
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn support_len(&self) -> usize {
        self.support.len() / self.dim
    }

    pub fn support_point(&self, j: usize) -> &[f64] {
        &self.support[j * self.dim..(j + 1) * self.dim]
    }

    pub fn flat_support(&self) -> &[f64] {
        &self.support
    }

    pub fn row(&self, s: usize, x: usize) -> &[f64] {
        let n = self.support_len();
        let i = ((s - self.start) * self.d + x) * n;
        &self.rows[i..i + n]
    }

    /// The same rows viewed as a path control.
    pub fn to_path(&self, spec: &GameSpec) -> Result<RelaxedControl> {
        RelaxedControl::with_support(spec, self.start, self.support.clone(), |s, p| {
            self.row(s, p % self.d).to_vec()
        })
    }
}

impl PathPolicy for StateRelaxedControl {
    fn start(&self) -> usize {
        self.start
    }

    fn for_each_atom(&self, s: usize, path: usize, f: &mut dyn FnMut(&[f64], f64)) {
        let row = self.row(s, path % self.d);
        for (j, &w) in row.iter().enumerate() {
            if w > 0.0 {
                f(self.support_point(j), w);
            }
        }
    }
}

/// Concatenation `alpha before t0, beta from t0 on` for state controls.
pub fn concat_controls(
    alpha: &PureStateControl,
    beta: &PureStateControl,
    t0: usize,
) -> Result<PureStateControl> {
    alpha.concat(beta, t0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{example71_spec, path_switching_spec};

    #[test]
    fn concat_rules() {
        let spec = example71_spec(0.25).unwrap();
        let a = PureStateControl::from_grid_indices(&spec, &[0, 1, 2, 0]).unwrap();
        let b = PureStateControl::from_grid_indices(&spec, &[2, 2, 1, 1]).unwrap();
        assert_eq!(concat_controls(&a, &a, 1).unwrap(), a);
        assert_eq!(concat_controls(&a, &b, 0).unwrap(), b);
        assert_eq!(concat_controls(&a, &b, 2).unwrap(), a);
        let c = concat_controls(&a, &b, 1).unwrap();
        assert_eq!(c.action(0, 1), a.action(0, 1));
        assert_eq!(c.action(1, 0), b.action(1, 0));
        assert!(concat_controls(&a, &b, 3).is_err());
    }

    #[test]
    fn concat_associative() {
        let spec = path_switching_spec(3).unwrap();
        let g = spec.actions().clone();
        let mk = |seed: usize| {
            PurePathControl::from_fn(&spec, 0, |s, p| {
                g.point((s * 7 + p * 3 + seed) % g.len()).to_vec()
            })
            .unwrap()
        };
        let (a, b, c) = (mk(0), mk(1), mk(2));
        for t1 in 0..=3 {
            for t2 in t1..=3 {
                let left = a.concat(&b, t1).unwrap().concat(&c, t2).unwrap();
                let right = a.concat(&b.concat(&c, t2).unwrap(), t1).unwrap();
                assert_eq!(left, right);
            }
        }
    }

    #[test]
    fn affine_lipschitz_certificate() {
        let spec = example71_spec(0.25).unwrap();
        let n = spec.horizon() * spec.d();
        let c =
            AffineClipped::new(&spec, vec![0.5; n], vec![0.4; n], vec![1.0, -1.0], 0.4).unwrap();
        assert!((c.certified_lipschitz() - 0.4).abs() < 1e-15);
        assert!(
            AffineClipped::new(&spec, vec![0.5; n], vec![0.4; n], vec![1.0, -1.0], 0.3).is_err()
        );
        let mut out = [0.0];
        c.act(1, 0, &[1.0, 0.0], &mut out);
        assert!((out[0] - 0.75).abs() < 1e-15);
        c.act(1, 0, &[0.0, 1.0], &mut out);
        assert!((out[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn relaxed_rows_validated() {
        let spec = example71_spec(0.25).unwrap();
        assert!(RelaxedControl::from_rows(&spec, 0, |_, _| vec![0.5, 0.5, 0.1]).is_err());
        let r = RelaxedControl::from_rows(&spec, 0, |_, _| vec![0.5, 0.0, 0.5]).unwrap();
        assert_eq!(r.node_count(), 6);
        assert!(!r.is_pure());
    }
}
