//! Euler-Maruyama particle systems coupled through their empirical measure.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::grid::{backward_solve, flow_from, Policy, Scheme};
use super::{ContControl, DiffusionSpec, Grid1d};
use crate::error::{Error, Result};
use crate::rng::{player_rngs, sample_index};
use crate::stats::{decreasing_within_ci, loglog_fit, mean_ci, Estimate, RateFit};

/// Starting positions of the particles.
#[derive(Clone, Copy, Debug)]
pub enum ParticleStart<'a> {
    Fixed(&'a [f64]),
    /// `n` i.i.d. draws from the cell masses, uniform within each cell.
    Iid {
        masses: &'a [f64],
        n: usize,
    },
}

impl ParticleStart<'_> {
    fn len(&self) -> usize {
        match self {
            ParticleStart::Fixed(x) => x.len(),
            ParticleStart::Iid { n, .. } => *n,
        }
    }
}

/// Positions of one replication, reproducible from `(seed, n, dt)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleEnsemble {
    pub n: usize,
    pub dt: f64,
    pub seed: u64,
    /// Positions on steps `start..=T`.
    pub positions: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParticleReport {
    pub ensemble: ParticleEnsemble,
    pub costs: Vec<Estimate>,
    /// Mean over particles of `(X_T - X_t)^2`, averaged over replications.
    pub msd: Estimate,
}

/// I.i.d. positions from cell masses, one pair of uniforms per generator.
pub fn sample_positions(grid: &Grid1d, masses: &[f64], rngs: &mut [ChaCha8Rng]) -> Vec<f64> {
    let h = grid.h();
    rngs.iter_mut()
        .map(|rng| {
            let k = sample_index(masses, rng.random::<f64>());
            grid.node(k) + (rng.random::<f64>() - 0.5) * h
        })
        .collect()
}

/// Midpoint quantiles `F^{-1}((i + 1/2) / n)` of the piecewise-constant
/// density with the given cell masses.
pub fn quantile_positions(grid: &Grid1d, masses: &[f64], n: usize) -> Vec<f64> {
    let h = grid.h();
    let mut out = Vec::with_capacity(n);
    let mut k = 0;
    let mut below = 0.0;
    for i in 0..n {
        let q = (i as f64 + 0.5) / n as f64;
        while k + 1 < masses.len() && below + masses[k] < q {
            below += masses[k];
            k += 1;
        }
        let frac = if masses[k] > 0.0 {
            ((q - below) / masses[k]).clamp(0.0, 1.0)
        } else {
            0.5
        };
        out.push(grid.node(k) - 0.5 * h + frac * h);
    }
    out
}

/// `W1` between the empirical measure of `sorted` and the piecewise-constant
/// density with the given cell masses, as `int |F_n - F| dx`.
pub fn w1_to_grid(grid: &Grid1d, masses: &[f64], sorted: &[f64]) -> f64 {
    let h = grid.h();
    let lo = grid.x_min - 0.5 * h;
    let nx = masses.len();
    let mut cum = Vec::with_capacity(nx + 1);
    cum.push(0.0);
    for w in masses {
        cum.push(cum.last().expect("nonempty") + w);
    }
    let total = cum[nx];
    let cdf = |x: f64| -> f64 {
        let s = (x - lo) / h;
        if s <= 0.0 {
            return 0.0;
        }
        if s >= nx as f64 {
            return total;
        }
        let k = s.floor() as usize;
        cum[k] + masses[k] * (s - k as f64)
    };
    let mut breaks: Vec<f64> = (0..=nx).map(|k| lo + k as f64 * h).collect();
    breaks.extend_from_slice(sorted);
    breaks.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut seen = 0usize;
    let mut acc = 0.0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        while seen < sorted.len() && sorted[seen] <= a {
            seen += 1;
        }
        if b <= a {
            continue;
        }
        let c = seen as f64 / n;
        let (da, db) = (cdf(a) - c, cdf(b) - c);
        acc += if da * db >= 0.0 {
            0.5 * (da.abs() + db.abs()) * (b - a)
        } else {
            0.5 * (da * da + db * db) / (da.abs() + db.abs()) * (b - a)
        };
    }
    acc
}

/// One replication from `x`. `control(i)` is the control of particle `i`;
/// `observe` sees the positions on every step.
fn run_rep<'c>(
    spec: &DiffusionSpec,
    start: usize,
    x: &mut [f64],
    control: impl Fn(usize) -> &'c ContControl,
    rngs: &mut [ChaCha8Rng],
    mut observe: impl FnMut(usize, &[f64]),
) -> Vec<f64> {
    let dt = spec.dt();
    let sq = dt.sqrt();
    let mut m = vec![0.0; spec.stat_count()];
    let mut costs = vec![0.0; x.len()];
    for n in start..spec.steps() {
        observe(n, x);
        spec.stats_into(x, &mut m);
        for (i, (xi, rng)) in x.iter_mut().zip(rngs.iter_mut()).enumerate() {
            let a = control(i).act(spec, n, *xi, &m);
            costs[i] += spec.running(n, *xi, &m, a) * dt;
            let z: f64 = rng.sample(StandardNormal);
            *xi += spec.drift(n, *xi, &m, a) * dt + sq * z;
        }
    }
    observe(spec.steps(), x);
    spec.stats_into(x, &mut m);
    for (c, xi) in costs.iter_mut().zip(x.iter()) {
        *c += spec.terminal(*xi, &m);
    }
    costs
}

fn initial(spec: &DiffusionSpec, start: ParticleStart, rngs: &mut [ChaCha8Rng]) -> Vec<f64> {
    match start {
        ParticleStart::Fixed(x) => x.to_vec(),
        ParticleStart::Iid { masses, .. } => sample_positions(spec.grid(), masses, rngs),
    }
}

/// Simulates `reps` replications of the particle system started at time
/// `t`. `controls` holds one control shared by all particles or one per
/// particle. Particle `i` of replication `r` draws from
/// `player_rng(seed, n, r, i)`.
pub fn particle_system(
    spec: &DiffusionSpec,
    t: f64,
    start: ParticleStart,
    controls: &[&ContControl],
    seed: u64,
    reps: usize,
) -> Result<ParticleReport> {
    let begin = spec.time_index(t)?;
    let n = start.len();
    if n == 0 || reps == 0 {
        return Err(Error::Empty("particles or replications"));
    }
    if controls.len() != 1 && controls.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: controls.len(),
        });
    }
    if let ParticleStart::Iid { masses, .. } = start {
        if masses.len() != spec.grid().nx {
            return Err(Error::DimensionMismatch {
                expected: spec.grid().nx,
                got: masses.len(),
            });
        }
    }
    let pick = |i: usize| {
        if controls.len() == 1 {
            controls[0]
        } else {
            controls[i]
        }
    };
    let results: Vec<(Vec<f64>, f64, Vec<Vec<f64>>)> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rngs = player_rngs(seed, n as u64, r as u64);
            let mut x = initial(spec, start, &mut rngs);
            let x0 = x.clone();
            let mut record = Vec::new();
            let costs = run_rep(spec, begin, &mut x, pick, &mut rngs, |_, pos| {
                if r == 0 {
                    record.push(pos.to_vec());
                }
            });
            let msd = x
                .iter()
                .zip(&x0)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / n as f64;
            (costs, msd, record)
        })
        .collect();
    let costs = (0..n)
        .map(|i| mean_ci(&results.iter().map(|r| r.0[i]).collect::<Vec<_>>()))
        .collect::<Result<Vec<_>>>()?;
    let msd = mean_ci(&results.iter().map(|r| r.1).collect::<Vec<_>>())?;
    let positions = results.into_iter().next().expect("reps > 0").2;
    Ok(ParticleReport {
        ensemble: ParticleEnsemble {
            n,
            dt: spec.dt(),
            seed,
            positions,
        },
        costs,
        msd,
    })
}

/// Measure and cost convergence for one `N`.
#[derive(Clone, Debug, PartialEq)]
pub struct ContMeasureRow {
    pub n: usize,
    /// `W1(mu^N_x, mu)` of the sampled starting points.
    pub initial_w1: Estimate,
    /// Largest `W1(mu^N_s, mu^alpha_s)` over the checkpoints.
    pub w1_max: Estimate,
    pub w1_terminal: Estimate,
    /// `(1/N sum |x_i|^2)^(1/2)`.
    pub x_norm: Estimate,
    /// `W1(mu^N_x, mu) + N^(-1/3) |x|_2 + 1/N`.
    pub theta: Estimate,
    /// Player average of `J_i - J(x_i)`, with `J` the grid cost.
    pub cost_gap: Estimate,
}

/// Averaged N-player gap of a control over probed players.
#[derive(Clone, Debug, PartialEq)]
pub struct ContGapRow {
    pub n: usize,
    pub probed: usize,
    pub average_gap: Estimate,
    pub max_gap: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContConvergence {
    pub rows: Vec<ContMeasureRow>,
    pub fit: Option<RateFit>,
    pub slope_window: (f64, f64),
    pub slope_ok: bool,
    pub cost_gap_decreasing: bool,
    pub epsilon: f64,
    pub gap_rows: Vec<ContGapRow>,
    /// Smallest probed `N` from which every averaged gap is at most
    /// `epsilon`.
    pub transfer_from: Option<usize>,
}

/// Averaged-gap probe settings for the equilibrium transfer.
#[derive(Clone, Debug, PartialEq)]
pub struct GapTransfer {
    pub family: Vec<ContControl>,
    pub epsilon: f64,
    pub n_list: Vec<usize>,
    pub samples: usize,
    pub probes: usize,
}

/// Window for the fitted slope of the measure distance against `N`.
pub const SLOPE_WINDOW: (f64, f64) = (-0.55, -0.25);

const CHECKPOINTS: usize = 5;

fn measure_row(
    spec: &DiffusionSpec,
    begin: usize,
    mu: &[f64],
    alpha: &ContControl,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<ContMeasureRow> {
    let flow = flow_from(spec, begin, mu, alpha, Scheme::Implicit)?;
    let u = backward_solve(
        spec,
        &flow,
        begin,
        spec.steps(),
        None,
        Policy::Follow(alpha),
    )?;
    let grid = *spec.grid();
    let span = spec.steps() - begin;
    let checks: Vec<usize> = (0..CHECKPOINTS)
        .map(|c| begin + (c * span) / (CHECKPOINTS - 1))
        .collect();
    let per_rep: Vec<[f64; 6]> = (0..samples)
        .into_par_iter()
        .map(|r| {
            let mut rngs = player_rngs(seed, n as u64, r as u64);
            let mut x = sample_positions(&grid, mu, &mut rngs);
            let norm = (x.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
            let grid_costs: Vec<f64> = x
                .iter()
                .map(|&xi| grid.interpolate(u.initial(), xi))
                .collect();
            let mut w1s = Vec::with_capacity(CHECKPOINTS);
            let mut sorted = vec![0.0; n];
            let costs = run_rep(
                spec,
                begin,
                &mut x,
                |_| alpha,
                &mut rngs,
                |s, pos| {
                    if checks.contains(&s) {
                        sorted.copy_from_slice(pos);
                        sorted.sort_by(f64::total_cmp);
                        w1s.push(w1_to_grid(&grid, flow.at(s), &sorted));
                    }
                },
            );
            let gap = costs
                .iter()
                .zip(&grid_costs)
                .map(|(a, b)| a - b)
                .sum::<f64>()
                / n as f64;
            let w0 = w1s[0];
            let theta = w0 + (n as f64).powf(-1.0 / 3.0) * norm + 1.0 / n as f64;
            let wmax = w1s.iter().copied().fold(0.0, f64::max);
            [
                w0,
                wmax,
                *w1s.last().expect("checkpoints"),
                norm,
                theta,
                gap,
            ]
        })
        .collect();
    let col = |j: usize| mean_ci(&per_rep.iter().map(|r| r[j]).collect::<Vec<_>>());
    Ok(ContMeasureRow {
        n,
        initial_w1: col(0)?,
        w1_max: col(1)?,
        w1_terminal: col(2)?,
        x_norm: col(3)?,
        theta: col(4)?,
        cost_gap: col(5)?,
    })
}

/// Averaged gap `(1/N) sum_i [J_i - v_i]` of the homogeneous control
/// `alpha` from the quantile positions of `mu`, estimated on `probes`
/// evenly spaced players. Each `v_i` is bounded above by the best of
/// `alpha` and `family` as a unilateral deviation, chosen by paired means
/// under common random numbers; negative gaps are clamped at zero.
#[allow(clippy::too_many_arguments)]
pub fn cont_nplayer_gap(
    spec: &DiffusionSpec,
    t: f64,
    mu: &[f64],
    alpha: &ContControl,
    family: &[ContControl],
    n: usize,
    probes: usize,
    samples: usize,
    seed: u64,
    eps: f64,
) -> Result<ContGapRow> {
    let begin = spec.time_index(t)?;
    if n == 0 || samples == 0 || probes == 0 {
        return Err(Error::Empty("players, probes or samples"));
    }
    let x0 = quantile_positions(spec.grid(), mu, n);
    let k = probes.min(n);
    let probed: Vec<usize> = (0..k).map(|j| (2 * j + 1) * n / (2 * k)).collect();
    // Per replication: baseline costs of the probed players, then the
    // deviation costs for each (probe, family member).
    let per_rep: Vec<(Vec<f64>, Vec<Vec<f64>>)> = (0..samples)
        .into_par_iter()
        .map(|r| {
            let run = |dev: Option<(usize, &ContControl)>| {
                let mut rngs = player_rngs(seed, n as u64, r as u64);
                let mut x = x0.clone();
                let pick = |i: usize| match dev {
                    Some((p, beta)) if p == i => beta,
                    _ => alpha,
                };
                run_rep(spec, begin, &mut x, pick, &mut rngs, |_, _| {})
            };
            let base = run(None);
            let base_probed = probed.iter().map(|&p| base[p]).collect();
            let devs = probed
                .iter()
                .map(|&p| family.iter().map(|beta| run(Some((p, beta)))[p]).collect())
                .collect();
            (base_probed, devs)
        })
        .collect();
    let mut chosen = Vec::with_capacity(k);
    let mut gaps = Vec::with_capacity(k);
    for j in 0..k {
        let mut best: Option<usize> = None;
        let mut best_diff = 0.0;
        for b in 0..family.len() {
            let diff = per_rep
                .iter()
                .map(|(base, dev)| base[j] - dev[j][b])
                .sum::<f64>()
                / samples as f64;
            if diff > best_diff {
                best_diff = diff;
                best = Some(b);
            }
        }
        chosen.push(best);
        gaps.push(best_diff);
    }
    let averaged: Vec<f64> = per_rep
        .iter()
        .map(|(base, dev)| {
            (0..k)
                .map(|j| chosen[j].map_or(0.0, |b| base[j] - dev[j][b]))
                .sum::<f64>()
                / k as f64
        })
        .collect();
    let average_gap = mean_ci(&averaged)?;
    Ok(ContGapRow {
        n,
        probed: k,
        average_gap,
        max_gap: gaps.iter().copied().fold(0.0, f64::max),
        pass: average_gap.mean <= eps,
    })
}

/// Particle systems of each size in `n_list` started from i.i.d. draws of
/// `mu`, compared with the grid flow and costs of `alpha`, plus the
/// averaged-gap transfer when `transfer` is given.
#[allow(clippy::too_many_arguments)]
pub fn cont_convergence_experiment(
    spec: &DiffusionSpec,
    t: f64,
    mu: &[f64],
    alpha: &ContControl,
    n_list: &[usize],
    samples: usize,
    seed: u64,
    transfer: Option<&GapTransfer>,
) -> Result<ContConvergence> {
    let begin = spec.time_index(t)?;
    if n_list.is_empty() || samples == 0 {
        return Err(Error::Empty("player counts or samples"));
    }
    let rows = n_list
        .iter()
        .map(|&n| measure_row(spec, begin, mu, alpha, n, samples, seed))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.w1_max.mean).collect();
    let fit = loglog_fit(&xs, &ys).ok();
    let slope_ok = fit.is_some_and(|f| f.slope >= SLOPE_WINDOW.0 && f.slope <= SLOPE_WINDOW.1);
    let abs_gaps: Vec<Estimate> = rows
        .iter()
        .map(|r| Estimate {
            mean: r.cost_gap.mean.abs(),
            ..r.cost_gap
        })
        .collect();
    let cost_gap_decreasing = decreasing_within_ci(&abs_gaps);
    let (epsilon, gap_rows) = match transfer {
        Some(tr) => (
            tr.epsilon,
            tr.n_list
                .iter()
                .map(|&n| {
                    cont_nplayer_gap(
                        spec, t, mu, alpha, &tr.family, n, tr.probes, tr.samples, seed, tr.epsilon,
                    )
                })
                .collect::<Result<Vec<_>>>()?,
        ),
        None => (0.0, Vec::new()),
    };
    let transfer_from = (0..gap_rows.len())
        .find(|&i| gap_rows[i..].iter().all(|r| r.pass))
        .map(|i| gap_rows[i].n);
    Ok(ContConvergence {
        rows,
        fit,
        slope_window: SLOPE_WINDOW,
        slope_ok,
        cost_gap_decreasing,
        epsilon,
        gap_rows,
        transfer_from,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{builtin, drift_parts, mkv_flow, u_solve, InitialLaw};
    use super::*;

    fn brownian() -> DiffusionSpec {
        let mut p = drift_parts();
        p.drift = "0 * a".into();
        p.running = "0".into();
        p.terminal = "0".into();
        DiffusionSpec::new(&p).unwrap()
    }

    #[test]
    fn brownian_displacement_matches_elapsed_time() {
        let spec = brownian();
        let x = vec![0.0; 16];
        let rep = particle_system(
            &spec,
            0.4,
            ParticleStart::Fixed(&x),
            &[&ContControl::Constant(0.0)],
            3,
            400,
        )
        .unwrap();
        assert!(rep.msd.contains(0.6, 3.0), "{:?}", rep.msd);
        assert_eq!(rep.ensemble.positions.len(), 31);
    }

    #[test]
    fn ensembles_are_reproducible() {
        let spec = builtin("crowd").unwrap();
        let mu = InitialLaw::Gaussian { mean: 0.0, sd: 1.0 }
            .masses(spec.grid())
            .unwrap();
        let a = ContControl::formula("-0.5 * tanh(x - m0)").unwrap();
        let run = |seed| {
            particle_system(
                &spec,
                0.0,
                ParticleStart::Iid { masses: &mu, n: 5 },
                &[&a],
                seed,
                3,
            )
            .unwrap()
        };
        assert_eq!(run(11), run(11));
        assert_ne!(run(11).ensemble, run(12).ensemble);
    }

    #[test]
    fn single_particle_matches_grid_cost() {
        let spec = builtin("drift").unwrap();
        let a = ContControl::formula("-0.8 * tanh(x)").unwrap();
        let x0 = 0.7;
        let mu = InitialLaw::Points(vec![x0]).masses(spec.grid()).unwrap();
        let flow = mkv_flow(&spec, 0.0, &mu, &a, Scheme::Implicit).unwrap();
        let u = u_solve(&spec, &flow, 0.0, &a).unwrap();
        let rep =
            particle_system(&spec, 0.0, ParticleStart::Fixed(&[x0]), &[&a], 5, 20_000).unwrap();
        let grid = u.value(0, x0);
        assert!(
            rep.costs[0].contains(grid, 3.0),
            "{:?} vs {grid}",
            rep.costs[0]
        );
    }

    #[test]
    fn co_started_players_are_exchangeable() {
        let spec = builtin("crowd").unwrap();
        let a = ContControl::formula("-0.5 * tanh(x - m0)").unwrap();
        let x = [0.3, 0.3, -0.4, 1.0];
        let rep = particle_system(&spec, 0.0, ParticleStart::Fixed(&x), &[&a], 9, 2000).unwrap();
        let (c0, c1) = (rep.costs[0], rep.costs[1]);
        assert!(
            (c0.mean - c1.mean).abs() <= c0.half_width + c1.half_width,
            "{c0:?} {c1:?}"
        );
    }

    #[test]
    fn grid_flow_matches_many_particles() {
        let spec = builtin("drift").unwrap();
        let mu = InitialLaw::Gaussian { mean: 0.5, sd: 0.6 }
            .masses(spec.grid())
            .unwrap();
        let a = ContControl::formula("-0.8 * tanh(x)").unwrap();
        let flow = mkv_flow(&spec, 0.0, &mu, &a, Scheme::Implicit).unwrap();
        let rep = particle_system(
            &spec,
            0.0,
            ParticleStart::Iid {
                masses: &mu,
                n: 100_000,
            },
            &[&a],
            1,
            1,
        )
        .unwrap();
        let mut end = rep.ensemble.positions.last().unwrap().clone();
        end.sort_by(f64::total_cmp);
        let w1 = w1_to_grid(spec.grid(), flow.at(spec.steps()), &end);
        assert!(w1 < 0.01, "{w1}");
    }

    #[test]
    fn w1_of_quantiles_is_small_and_exact_on_shifts() {
        let g = Grid1d::new(0.0, 1.0, 11).unwrap();
        let mut m = vec![0.0; 11];
        m[5] = 1.0;
        // Uniform on [0.45, 0.55] against a point at 0.5.
        assert!((w1_to_grid(&g, &m, &[0.5]) - 0.025).abs() < 1e-12);
        assert!((w1_to_grid(&g, &m, &[1.5]) - 1.0).abs() < 1e-12);
        let spec = builtin("drift").unwrap();
        let mu = InitialLaw::Gaussian { mean: 0.0, sd: 1.0 }
            .masses(spec.grid())
            .unwrap();
        let q = quantile_positions(spec.grid(), &mu, 200);
        assert!(w1_to_grid(spec.grid(), &mu, &q) < 2.0 / 200.0);
    }

    #[test]
    fn pushing_everyone_one_way_is_not_an_equilibrium() {
        let spec = builtin("crowd").unwrap().with_grid(281, 0.05).unwrap();
        let mu = InitialLaw::Gaussian { mean: 0.0, sd: 1.0 }
            .masses(spec.grid())
            .unwrap();
        let family = [ContControl::Constant(0.0)];
        let row = cont_nplayer_gap(
            &spec,
            0.0,
            &mu,
            &ContControl::Constant(1.0),
            &family,
            8,
            4,
            200,
            3,
            0.01,
        )
        .unwrap();
        assert!(row.average_gap.mean > 0.1 && !row.pass, "{row:?}");
    }
}
