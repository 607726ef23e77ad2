//! Sample summaries and log-log rate fits.

use crate::error::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Mean with a 95% normal confidence half-width.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn contains(&self, v: f64, widths: f64) -> bool {
        (self.mean - v).abs() <= widths * self.half_width
    }
}

pub fn mean_ci(samples: &[f64]) -> Result<Estimate> {
    let n = samples.len();
    if n == 0 {
        return Err(Error::Empty("estimate of no samples"));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let half_width = if n > 1 {
        let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        Z95 * (var / n as f64).sqrt()
    } else {
        0.0
    };
    Ok(Estimate {
        mean,
        half_width,
        samples: n,
    })
}

/// Least-squares line through `(ln x, ln y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Result<RateFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::InvalidArgument(
            "a rate fit needs at least two points".into(),
        ));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidArgument(
            "log-log fit needs positive data".into(),
        ));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 {
        sxy * sxy / (sxx * syy)
    } else {
        1.0
    };
    Ok(RateFit {
        slope,
        intercept: my - slope * mx,
        r2,
    })
}

/// Fit over the `k` largest abscissae.
pub fn tail_fit(xs: &[f64], ys: &[f64], k: usize) -> Result<RateFit> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let keep = &idx[idx.len().saturating_sub(k)..];
    let x: Vec<f64> = keep.iter().map(|&i| xs[i]).collect();
    let y: Vec<f64> = keep.iter().map(|&i| ys[i]).collect();
    loglog_fit(&x, &y)
}

/// True when each estimate is below the previous one up to the combined
/// confidence half-widths.
pub fn decreasing_within_ci(est: &[Estimate]) -> bool {
    est.windows(2)
        .all(|w| w[1].mean <= w[0].mean + w[0].half_width + w[1].half_width)
}
