use std::path::PathBuf;

use mfgset::relaxed::{
    gamma_from_lambda, global_mfe_gap, lambda_from_gamma, lambda_measure_flow, lambda_round_trip,
    relax_state_path_equivalence, relaxed_cost_J, relaxed_dpp_check, relaxed_global_equivalence,
    relaxed_measure_flow, relaxed_set_value, RelaxedLattice,
};
use serde_json::json;

use crate::context::{summary, Ctx};
use crate::error::{CliError, CliResult};
use crate::game_cmd::{dpp_rows, DPP_HEADER};
use crate::output::num;
use crate::{LatticeArgs, RelaxedCommand};

/// Identity residual accepted by `relaxed transforms`.
const IDENTITY_TOL: f64 = 1e-12;

/// Generators checked by `relaxed transforms`.
const MAX_TRANSFORMED: usize = 64;

pub fn run(ctx: &Ctx, command: RelaxedCommand) -> CliResult<PathBuf> {
    match command {
        RelaxedCommand::Transforms(l) => transforms(ctx, &l),
        RelaxedCommand::Equivalence(l) => equivalence(ctx, &l),
        RelaxedCommand::Dpp(l) => dpp(ctx, &l),
    }
}

fn transforms(ctx: &Ctx, l: &LatticeArgs) -> CliResult<PathBuf> {
    let game = ctx.game()?;
    let spec = &game.spec;
    let mu = game.path_measure();
    let eps = ctx.eps_or(&[0.05])?[0];
    let mut m = ctx.manifest("relaxed transforms");
    m.param("eps", eps);
    m.param("lattice", l.lattice);
    let mut out = ctx.output(m)?;
    let sv = relaxed_set_value(spec, 0, &mu, eps, l.lattice)?;
    let lattice = RelaxedLattice::new(spec, 0, spec.horizon(), l.lattice)?;
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for g in sv.generators.iter().take(MAX_TRANSFORMED) {
        let gamma = lattice.control(spec, g.control_id);
        let lam = lambda_from_gamma(spec, 0, &mu, &gamma)?;
        let flow = relaxed_measure_flow(spec, 0, &mu, &gamma)?;
        let flow_diff = lambda_measure_flow(spec, &lam)?.max_w1(&flow);
        let gamma_diff = gamma_from_lambda(spec, &lam)?.max_abs_diff(&gamma);
        let global = global_mfe_gap(spec, &lam)?;
        let mut cost_diff: f64 = 0.0;
        for (x, w) in mu.weights().iter().enumerate() {
            let j = relaxed_cost_J(spec, &flow, 0, x, &gamma)?;
            cost_diff = cost_diff.max((global.weighted_costs[x] - w * j).abs());
        }
        let trip = lambda_round_trip(spec, &lam)?;
        worst = worst.max(flow_diff).max(gamma_diff).max(cost_diff);
        rows.push(vec![
            g.control_id.to_string(),
            gamma.is_pure().to_string(),
            lam.atom_count().to_string(),
            num(flow_diff),
            num(gamma_diff),
            num(cost_diff),
            num(global.max_gap()),
            trip.identical.to_string(),
        ]);
    }
    out.table(
        "transforms",
        &[
            "control_id",
            "pure",
            "atoms",
            "flow_diff",
            "gamma_diff",
            "cost_diff",
            "global_gap",
            "round_trip_identical",
        ],
        &rows,
    )?;
    let pass = worst <= IDENTITY_TOL;
    let path = out.finish(summary(vec![
        ("generators", json!(sv.generators.len())),
        ("checked", json!(rows.len())),
        ("largest_residual", json!(worst)),
        ("pass", json!(pass)),
    ]))?;
    if !pass {
        return Err(CliError::Check(format!(
            "transform identity residual {worst:e}"
        )));
    }
    Ok(path)
}

fn equivalence(ctx: &Ctx, l: &LatticeArgs) -> CliResult<PathBuf> {
    let game = ctx.game()?;
    let eps_list = ctx.eps_or(&[0.0, 0.05])?;
    let mut m = ctx.manifest("relaxed equivalence");
    m.param("eps", eps_list.clone());
    m.param("lattice", l.lattice);
    let mut out = ctx.output(m)?;
    let mut rows = Vec::new();
    let mut pass = true;
    for &eps in &eps_list {
        let rep = relaxed_global_equivalence(&game.spec, 0, &game.path_measure(), eps, l.lattice)?;
        pass &= rep.pass;
        rows.push(vec![
            num(eps),
            num(rep.c_mu),
            rep.relaxed_len.to_string(),
            rep.global_len.to_string(),
            num(rep.relaxed_in_global),
            num(rep.global_in_relaxed),
            rep.pass.to_string(),
        ]);
    }
    out.table(
        "relaxed-global",
        &[
            "eps",
            "c_mu",
            "relaxed",
            "global",
            "relaxed_in_global",
            "global_in_relaxed",
            "pass",
        ],
        &rows,
    )?;
    let mut extra = Vec::new();
    if !game.spec.is_path_dependent() {
        let rep = relax_state_path_equivalence(&game.spec, &game.mu, l.lattice)?;
        pass &= rep.pass;
        out.table(
            "state-path",
            &[
                "state",
                "path",
                "state_in_path",
                "projected",
                "projected_gap",
                "projected_cost_diff",
                "path_in_state",
                "pass",
            ],
            &[vec![
                rep.state_len.to_string(),
                rep.path_len.to_string(),
                num(rep.state_in_path),
                rep.projected.to_string(),
                num(rep.projected_gap),
                num(rep.projected_cost_diff),
                num(rep.path_in_state),
                rep.pass.to_string(),
            ]],
        )?;
        extra.push(("state_path_pass", json!(rep.pass)));
    }
    let mut s = summary(vec![("pass", json!(pass))]);
    s.extend(summary(extra));
    let path = out.finish(s)?;
    if !pass {
        return Err(CliError::Check(format!(
            "set values differ, see {}",
            path.display()
        )));
    }
    Ok(path)
}

fn dpp(ctx: &Ctx, l: &LatticeArgs) -> CliResult<PathBuf> {
    let game = ctx.game()?;
    let eps = ctx.eps_or(&[0.0, 0.01, 0.05])?;
    let splits = ctx.splits(game.spec.horizon())?;
    let mut m = ctx.manifest("relaxed dpp");
    m.param("eps", eps.clone());
    m.param("t0", splits.clone());
    m.param("lattice", l.lattice);
    let mut out = ctx.output(m)?;
    let mu = game.path_measure();
    let reports = splits
        .iter()
        .map(|&t0| relaxed_dpp_check(&game.spec, 0, t0, &mu, &eps, l.lattice))
        .collect::<Result<Vec<_>, _>>()?;
    out.table("inclusions", &DPP_HEADER, &dpp_rows(&reports))?;
    let pass = reports.iter().all(|r| r.pass());
    let path = out.finish(summary(vec![("pass", json!(pass))]))?;
    if !pass {
        return Err(CliError::Check(format!(
            "relaxed DPP inclusion defect, see {}",
            path.display()
        )));
    }
    Ok(path)
}
