//! Probability vectors on finite index sets and the W1 metric.

use crate::error::{Error, Result};
use crate::space::PathSpace;

/// Mass and row-sum tolerance.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// A probability vector on `{0, .., len-1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexMeasure {
    weights: Vec<f64>,
}

impl SimplexMeasure {
    /// Validates nonnegativity and unit mass. Residuals below [`SIMPLEX_TOL`]
    /// are renormalized away, anything larger is rejected.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Empty("measure weights"));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidMeasure(format!(
                "negative or non-finite weight {w}"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidMeasure(format!(
                "mass {total} differs from 1"
            )));
        }
        let weights = if total == 1.0 {
            weights
        } else {
            weights.into_iter().map(|w| w / total).collect()
        };
        Ok(Self { weights })
    }

    /// Wraps weights produced by an exact recursion without revalidation.
    pub(crate) fn from_raw(weights: Vec<f64>) -> Self {
        Self { weights }
    }

    pub fn uniform(len: usize) -> Self {
        Self {
            weights: vec![1.0 / len as f64; len],
        }
    }

    pub fn dirac(len: usize, at: usize) -> Self {
        let mut weights = vec![0.0; len];
        weights[at] = 1.0;
        Self { weights }
    }

    /// Two-point measure `(p, 1-p)`.
    pub fn binary(p: f64) -> Result<Self> {
        Self::new(vec![p, 1.0 - p])
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn full_support(&self) -> bool {
        self.min_weight() > 0.0
    }

    pub fn require_full_support(&self) -> Result<()> {
        if self.full_support() {
            Ok(())
        } else {
            Err(Error::NotFullSupport {
                min_weight: self.min_weight(),
            })
        }
    }
}

/// A probability vector on the stopped paths `X_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct PathMeasure {
    space: PathSpace,
    measure: SimplexMeasure,
}

impl PathMeasure {
    pub fn new(space: PathSpace, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != space.len() {
            return Err(Error::DimensionMismatch {
                expected: space.len(),
                got: weights.len(),
            });
        }
        Ok(Self {
            space,
            measure: SimplexMeasure::new(weights)?,
        })
    }

    pub(crate) fn from_raw(space: PathSpace, weights: Vec<f64>) -> Self {
        Self {
            space,
            measure: SimplexMeasure::from_raw(weights),
        }
    }

    /// Lifts a measure on states to `X_0`, where paths are single states.
    pub fn from_states(mu: &SimplexMeasure) -> Self {
        Self {
            space: PathSpace::new(mu.len(), 0),
            measure: mu.clone(),
        }
    }

    pub fn uniform(space: PathSpace) -> Self {
        Self {
            space,
            measure: SimplexMeasure::uniform(space.len()),
        }
    }

    pub fn space(&self) -> PathSpace {
        self.space
    }

    pub fn time(&self) -> usize {
        self.space.time()
    }

    pub fn weights(&self) -> &[f64] {
        self.measure.weights()
    }

    pub fn as_simplex(&self) -> &SimplexMeasure {
        &self.measure
    }

    pub fn full_support(&self) -> bool {
        self.measure.full_support()
    }

    pub fn require_full_support(&self) -> Result<()> {
        self.measure.require_full_support()
    }

    /// Law of the state at the stopping time.
    pub fn marginal(&self) -> SimplexMeasure {
        SimplexMeasure::from_raw(self.space.marginal(self.weights()))
    }
}

/// `W1(mu, nu) = sum |mu(x) - nu(x)|` on a finite index set.
pub fn w1_finite(mu: &[f64], nu: &[f64]) -> Result<f64> {
    if mu.len() != nu.len() {
        return Err(Error::DimensionMismatch {
            expected: mu.len(),
            got: nu.len(),
        });
    }
    Ok(mu.iter().zip(nu).map(|(a, b)| (a - b).abs()).sum())
}

/// Empirical measure `(1/N) sum delta_{x_i}` on `{0, .., len-1}`.
pub fn empirical_measure(len: usize, points: &[usize]) -> Result<SimplexMeasure> {
    if points.is_empty() {
        return Err(Error::Empty("empirical measure of no points"));
    }
    let mut counts = vec![0usize; len];
    for &p in points {
        if p >= len {
            return Err(Error::InvalidArgument(format!(
                "point {p} outside 0..{len}"
            )));
        }
        counts[p] += 1;
    }
    Ok(SimplexMeasure::from_raw(counts_to_weights(
        &counts,
        points.len(),
    )))
}

pub(crate) fn counts_to_weights(counts: &[usize], n: usize) -> Vec<f64> {
    counts.iter().map(|&c| c as f64 / n as f64).collect()
}

/// Integer counts summing to `n` closest to `n * weights`: floors first, then
/// one extra unit to the largest remainders, ties to the lower index.
pub fn largest_remainder(weights: &[f64], n: usize) -> Vec<usize> {
    let scaled: Vec<f64> = weights.iter().map(|w| w * n as f64).collect();
    let mut counts: Vec<usize> = scaled.iter().map(|v| v.floor().max(0.0) as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = scaled[a] - scaled[a].floor();
        let rb = scaled[b] - scaled[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &k in order.iter().cycle().take(n.saturating_sub(assigned)) {
        counts[k] += 1;
    }
    counts
}

/// Empirical measure on `X_t` of a list of path ids.
pub fn empirical_path_measure(space: PathSpace, paths: &[usize]) -> Result<PathMeasure> {
    let m = empirical_measure(space.len(), paths)?;
    Ok(PathMeasure { space, measure: m })
}
