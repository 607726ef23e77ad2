use std::path::PathBuf;

use mfgset::control::RelaxedControl;
use mfgset::hetero::{
    bar_lambda_lift, discretization_drift, discretize_relaxed, hetero_convergence,
    lambda_eps_rounding, lambda_n_from_profile, profile_from_lambda, round_start_paths,
    HeteroFamily, McOptions,
};
use mfgset::nplayer::{
    convergence_measures, equilibrium_gap_curve, homo_eq_check, nplayer_set_value, ChainMode,
    DeviationFamily, NConfig, DEFAULT_N_LIST, DEFAULT_SAMPLES,
};
use mfgset::relaxed::{global_mfe_gap, lambda_from_gamma, relaxed_set_value, RelaxedLattice};
use serde_json::json;

use crate::context::{summary, Ctx, Game};
use crate::error::{input, CliError, CliResult};
use crate::output::num;
use crate::{HeteroCommand, NplayerCommand};

const DEFAULT_EPS: f64 = 0.05;

/// Monte Carlo samples of `hetero converge` when `--samples` is absent.
const HETERO_SAMPLES: usize = 2000;

const HETERO_N_LIST: [usize; 5] = [8, 16, 32, 64, 128];

pub fn nplayer(ctx: &Ctx, command: NplayerCommand) -> CliResult<PathBuf> {
    let game = ctx.game()?;
    game.require_state("nplayer")?;
    let eps = ctx.eps_or(&[DEFAULT_EPS])?[0];
    match command {
        NplayerCommand::EqCheck { control, n } => {
            let (alpha, source) =
                game.state_control_or_equilibrium(control.actions.as_deref(), eps / 2.0)?;
            let mut m = ctx.manifest("nplayer eq-check");
            m.param("eps", eps);
            m.param("n", n);
            m.param("control", source.clone());
            let mut out = ctx.output(m)?;
            let cfg = NConfig::from_measure(&game.mu, n)?;
            let rep = homo_eq_check(
                &game.spec,
                0,
                &cfg,
                &alpha,
                eps,
                &DeviationFamily::Grid,
                ChainMode::Auto,
            )?;
            let rows: Vec<Vec<String>> = (0..cfg.n())
                .map(|i| {
                    let b = &rep.brackets[i];
                    vec![
                        i.to_string(),
                        cfg.states()[i].to_string(),
                        num(rep.costs[i]),
                        num(b.upper),
                        num(b.lower),
                        num(rep.gaps[i]),
                    ]
                })
                .collect();
            out.table(
                "players",
                &["player", "state", "cost", "best_upper", "best_lower", "gap"],
                &rows,
            )?;
            let path = out.finish(summary(vec![
                ("control", json!(source)),
                ("n", json!(n)),
                ("max_gap", json!(rep.max_gap)),
                ("average_gap", json!(rep.average_gap)),
                ("pass", json!(rep.pass)),
            ]))?;
            if !rep.pass {
                return Err(CliError::Check(format!(
                    "largest gap {} above {eps}",
                    rep.max_gap
                )));
            }
            Ok(path)
        }
        NplayerCommand::SetValue { n } => {
            let mut m = ctx.manifest("nplayer set-value");
            m.param("eps", eps);
            m.param("n", n);
            let mut out = ctx.output(m)?;
            let cfg = NConfig::from_measure(&game.mu, n)?;
            let gens = nplayer_set_value(
                &game.spec,
                0,
                &cfg,
                eps,
                &DeviationFamily::Grid,
                ChainMode::Auto,
            )?;
            let rows: Vec<Vec<String>> = gens
                .iter()
                .map(|g| {
                    let mut r = vec![g.control_id.to_string(), num(g.max_gap)];
                    r.extend(g.values.iter().map(|v| v.map(num).unwrap_or_default()));
                    r
                })
                .collect();
            let mut header = vec!["control_id".to_string(), "max_gap".into()];
            header.extend((0..game.spec.d()).map(|x| format!("value_{x}")));
            out.table(
                "generators",
                &header.iter().map(String::as_str).collect::<Vec<_>>(),
                &rows,
            )?;
            out.finish(summary(vec![
                ("n", json!(n)),
                ("counts", json!(cfg.counts())),
                ("generators", json!(gens.len())),
            ]))
        }
        NplayerCommand::Converge(control) => {
            let (alpha, source) =
                game.state_control_or_equilibrium(control.actions.as_deref(), eps / 2.0)?;
            let n_list = ctx.n_list_or(&DEFAULT_N_LIST)?;
            let samples = ctx.common.samples.unwrap_or(DEFAULT_SAMPLES);
            let seed = ctx.common.seed;
            let mut m = ctx.manifest("nplayer converge");
            m.param("eps", eps);
            m.param("n_list", n_list.clone());
            m.param("samples", samples);
            m.param("seed", seed);
            m.param("control", source.clone());
            let mut out = ctx.output(m)?;
            let conv = convergence_measures(
                &game.spec, 0, &game.mu, &alpha, None, &n_list, samples, seed,
            )?;
            let rows: Vec<Vec<String>> = conv
                .rows
                .iter()
                .map(|r| {
                    let mut row = vec![
                        r.n.to_string(),
                        num(r.max_over_steps.mean),
                        num(r.max_over_steps.half_width),
                    ];
                    row.extend(r.per_step.iter().map(|e| num(e.mean)));
                    row
                })
                .collect();
            let mut header = vec!["n".to_string(), "max_w1".into(), "half_width".into()];
            header.extend((0..=game.spec.horizon()).map(|s| format!("w1_s{s}")));
            out.table(
                "measures",
                &header.iter().map(String::as_str).collect::<Vec<_>>(),
                &rows,
            )?;
            let curve = equilibrium_gap_curve(
                &game.spec,
                0,
                &game.mu,
                &alpha,
                eps,
                &n_list,
                &DeviationFamily::Grid,
                ChainMode::Auto,
            )?;
            let rows: Vec<Vec<String>> = curve
                .rows
                .iter()
                .map(|(n, a, mx)| vec![n.to_string(), num(*a), num(*mx)])
                .collect();
            out.table("gaps", &["n", "average_gap", "max_gap"], &rows)?;
            out.finish(summary(vec![
                ("control", json!(source)),
                ("seed", json!(seed)),
                ("samples", json!(samples)),
                ("slope", json!(conv.fit.map(|f| f.slope))),
                ("r2", json!(conv.fit.map(|f| f.r2))),
                ("decreasing", json!(conv.decreasing)),
                ("gap_below_eps_from", json!(curve.below_from)),
            ]))
        }
    }
}

/// A relaxed eps-equilibrium from the lattice, preferring a mixed one.
fn relaxed_equilibrium(game: &Game, eps: f64, m: usize) -> CliResult<(RelaxedControl, u64)> {
    let spec = &game.spec;
    let sv = relaxed_set_value(spec, 0, &game.path_measure(), eps, m)?;
    let lattice = RelaxedLattice::new(spec, 0, spec.horizon(), m)?;
    let controls: Vec<(RelaxedControl, u64)> = sv
        .generators
        .iter()
        .map(|g| (lattice.control(spec, g.control_id), g.control_id))
        .collect();
    let pick = controls.iter().position(|(c, _)| !c.is_pure()).unwrap_or(0);
    controls
        .into_iter()
        .nth(pick)
        .ok_or_else(|| input(format!("no relaxed {eps}-equilibrium on lattice {m}")))
}

pub fn hetero(ctx: &Ctx, command: HeteroCommand) -> CliResult<PathBuf> {
    let game = ctx.game()?;
    let spec = &game.spec;
    let mu = game.path_measure();
    let eps = ctx.eps_or(&[DEFAULT_EPS])?[0];
    match command {
        HeteroCommand::Lift { lattice, n } => {
            let (gamma, id) = relaxed_equilibrium(&game, eps, lattice.lattice)?;
            let mut m = ctx.manifest("hetero lift");
            m.param("eps", eps);
            m.param("lattice", lattice.lattice);
            m.param("n", n);
            let mut out = ctx.output(m)?;
            let (_, gamma_eps) = discretize_relaxed(spec, &gamma, eps)?;
            let lam = lambda_from_gamma(spec, 0, &mu, &gamma_eps)?;
            let paths = round_start_paths(&mu, n);
            let rounded = lambda_eps_rounding(spec, &paths, &lam)?;
            let profile = profile_from_lambda(spec, &paths, &rounded)?;
            let exact =
                lambda_n_from_profile(spec, &profile)?.canonical() == rounded.lambda.canonical();
            let lift = bar_lambda_lift(spec, &profile, &mu)?;
            let lifted = global_mfe_gap(spec, &lift.lambda)?;
            let rows: Vec<Vec<String>> = rounded
                .counts
                .iter()
                .enumerate()
                .flat_map(|(x, cs)| {
                    cs.iter().enumerate().map(move |(k, c)| {
                        vec![
                            x.to_string(),
                            k.to_string(),
                            c.to_string(),
                            num(*c as f64 / n as f64),
                        ]
                    })
                })
                .collect();
            out.table("rounding", &["path", "atom", "players", "weight"], &rows)?;
            out.finish(summary(vec![
                ("control_id", json!(id)),
                ("mixed", json!(!gamma.is_pure())),
                ("n", json!(n)),
                ("lambda_exact", json!(exact)),
                ("rounding_deviation", json!(rounded.max_deviation)),
                ("rounding_bound", json!(rounded.bound)),
                ("lifted_gap", json!(lifted.gap.iter().sum::<f64>())),
            ]))
        }
        HeteroCommand::Discretize(lattice) => {
            let (gamma, id) = relaxed_equilibrium(&game, eps, lattice.lattice)?;
            let n_list = ctx.n_list_or(&HETERO_N_LIST)?;
            let mut m = ctx.manifest("hetero discretize");
            m.param("eps", eps);
            m.param("lattice", lattice.lattice);
            m.param("n_list", n_list.clone());
            let mut out = ctx.output(m)?;
            let (rep, gamma_eps) = discretize_relaxed(spec, &gamma, eps)?;
            let drift = discretization_drift(spec, &mu, &gamma, &gamma_eps)?;
            let lam = lambda_from_gamma(spec, 0, &mu, &gamma_eps)?;
            let mut rows = Vec::new();
            for &n in &n_list {
                let rounded = lambda_eps_rounding(spec, &round_start_paths(&mu, n), &lam)?;
                rows.push(vec![
                    n.to_string(),
                    num(rounded.max_deviation),
                    num(rounded.bound),
                ]);
            }
            out.table("rounding", &["n", "max_deviation", "bound"], &rows)?;
            out.finish(summary(vec![
                ("control_id", json!(id)),
                ("max_shift", json!(rep.max_shift)),
                ("far_mass", json!(rep.far_mass)),
                ("mass_error", json!(rep.mass_error)),
                ("flow_drift", json!(drift)),
                ("atoms", json!(lam.atom_count())),
            ]))
        }
        HeteroCommand::Converge(lattice) => {
            let (gamma, id) = relaxed_equilibrium(&game, eps, lattice.lattice)?;
            let n_list = ctx.n_list_or(&HETERO_N_LIST)?;
            let samples = ctx.common.samples.unwrap_or(HETERO_SAMPLES);
            let mc = McOptions {
                samples,
                pilot: (samples / 10).max(1),
                seed: ctx.common.seed,
            };
            let mut m = ctx.manifest("hetero converge");
            m.param("eps", eps);
            m.param("lattice", lattice.lattice);
            m.param("n_list", n_list.clone());
            m.param("samples", samples);
            m.param("seed", ctx.common.seed);
            let mut out = ctx.output(m)?;
            let rep = hetero_convergence(spec, &mu, &gamma, eps, &n_list, &HeteroFamily::Grid, mc)?;
            let rows: Vec<Vec<String>> = rep
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.n.to_string(),
                        r.lambda_exact.to_string(),
                        num(r.rounding_deviation),
                        num(r.rounding_bound),
                        num(r.eq.average_gap.mean),
                        num(r.eq.average_gap.half_width),
                        num(r.eq.fraction_above),
                        r.eq.chebyshev_ok.to_string(),
                        num(r.measure_distance.mean),
                        num(r.measure_distance.half_width),
                        num(r.lifted_gap),
                    ]
                })
                .collect();
            out.table(
                "rows",
                &[
                    "n",
                    "lambda_exact",
                    "rounding_deviation",
                    "rounding_bound",
                    "average_gap",
                    "gap_half_width",
                    "fraction_above",
                    "chebyshev_ok",
                    "measure_distance",
                    "distance_half_width",
                    "lifted_gap",
                ],
                &rows,
            )?;
            out.finish(summary(vec![
                ("control_id", json!(id)),
                ("mixed", json!(!gamma.is_pure())),
                ("seed", json!(ctx.common.seed)),
                ("gap_decreasing", json!(rep.gap_decreasing)),
                ("chebyshev_all", json!(rep.chebyshev_all)),
                ("lambda_exact_all", json!(rep.lambda_exact_all)),
            ]))
        }
    }
}
