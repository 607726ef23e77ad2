use std::path::PathBuf;

use mfgset::dynamics::{measure_flow, value_v, FlowRecord};
use mfgset::relaxed::{relaxed_measure_flow, relaxed_mfe_gap};
use mfgset::setvalue::{
    dpp_check, example71_counterexample, mfe_gap, path_set_value_eps, raw_set_value, set_value_eps,
    DppReport, SetValueApprox,
};
use mfgset::{validate_game_spec, TOL_EXACT};
use serde_json::json;

use crate::context::{summary, Ctx};
use crate::error::{input, CliError, CliResult};
use crate::output::{num, nums};
use crate::ControlArgs;

fn flow_rows(flow: &FlowRecord) -> Vec<Vec<String>> {
    (flow.start()..=flow.end())
        .flat_map(|s| {
            flow.at(s)
                .iter()
                .enumerate()
                .map(move |(x, m)| vec![s.to_string(), x.to_string(), num(*m)])
        })
        .collect()
}

pub fn validate(ctx: &Ctx) -> CliResult<PathBuf> {
    let mut out = ctx.output(ctx.manifest("validate"))?;
    if ctx.is_diffusion() {
        let d = ctx.diffusion()?;
        let p = d.spec.probe();
        let mass: f64 = d.mu.iter().sum();
        let rows = vec![
            vec!["bound".into(), num(p.bound)],
            vec!["c0".into(), num(d.spec.c0())],
            vec!["lipschitz_x".into(), num(p.lipschitz_x)],
            vec!["lipschitz_a".into(), num(p.lipschitz_a)],
            vec!["lipschitz_mu".into(), num(p.lipschitz_mu)],
            vec!["l0".into(), num(d.spec.l0())],
            vec!["initial_mass".into(), num(mass)],
        ];
        out.table("checks", &["quantity", "value"], &rows)?;
        return out.finish(summary(vec![
            ("kind", json!("diffusion")),
            ("accepted", json!(true)),
            ("grid_nodes", json!(d.spec.grid().nx)),
            ("steps", json!(d.spec.steps())),
        ]));
    }
    let game = ctx.game()?;
    let rep = validate_game_spec(&game.spec);
    let rows = vec![
        vec!["max_row_sum_residual".into(), num(rep.max_row_sum_residual)],
        vec!["min_q".into(), num(rep.min_q)],
        vec!["c_q".into(), num(rep.c_q)],
        vec!["max_abs_running".into(), num(rep.max_abs_running)],
        vec!["max_abs_terminal".into(), num(rep.max_abs_terminal)],
        vec!["c0".into(), num(rep.c0)],
        vec!["empirical_q_modulus".into(), num(rep.empirical_q_modulus)],
        vec![
            "empirical_cost_modulus".into(),
            num(rep.empirical_cost_modulus),
        ],
    ];
    out.table("checks", &["quantity", "value"], &rows)?;
    let accepted = rep.failures.is_empty();
    let path = out.finish(summary(vec![
        ("kind", json!("game")),
        ("accepted", json!(accepted)),
        ("probes", json!(rep.probes)),
        ("failures", json!(rep.failures)),
    ]))?;
    if !accepted {
        return Err(input(format!(
            "scenario rejected: {}",
            rep.failures.join("; ")
        )));
    }
    Ok(path)
}

pub fn flow(ctx: &Ctx, c: &ControlArgs) -> CliResult<PathBuf> {
    let game = ctx.game()?;
    let idx = c.actions.clone().unwrap_or(vec![0]);
    let mut m = ctx.manifest("flow");
    m.param("actions", idx.clone());
    let mut out = ctx.output(m)?;
    let flow = if game.spec.is_path_dependent() {
        relaxed_measure_flow(
            &game.spec,
            0,
            &game.path_measure(),
            &game.path_control(&idx)?,
        )?
    } else {
        measure_flow(&game.spec, 0, &game.mu, &game.state_control(&idx)?)?
    };
    let unit = if game.spec.is_path_dependent() {
        "path"
    } else {
        "state"
    };
    out.table("measures", &["s", unit, "mass"], &flow_rows(&flow))?;
    out.finish(summary(vec![
        ("horizon", json!(game.spec.horizon())),
        ("terminal", json!(flow.at(flow.end()))),
    ]))
}

pub fn value(ctx: &Ctx, c: &ControlArgs) -> CliResult<PathBuf> {
    let game = ctx.game()?;
    let idx = c.actions.clone().unwrap_or(vec![0]);
    let mut m = ctx.manifest("value");
    m.param("actions", idx.clone());
    let mut out = ctx.output(m)?;
    let (gap, costs, values) = if game.spec.is_path_dependent() {
        let rep = relaxed_mfe_gap(
            &game.spec,
            0,
            &game.path_measure(),
            &game.path_control(&idx)?,
        )?;
        (rep.gap, rep.costs, rep.values)
    } else {
        let rep = mfe_gap(&game.spec, 0, &game.mu, &game.state_control(&idx)?)?;
        let table = value_v(&game.spec, &rep.flow, 0)?;
        let grid = game.spec.actions();
        let rows: Vec<Vec<String>> = (table.start()..=table.end())
            .flat_map(|r| {
                let table = &table;
                (0..game.spec.d()).map(move |x| {
                    let k = if r < table.end() {
                        table.argmin(r, x)
                    } else {
                        usize::MAX
                    };
                    let action = if k < grid.len() {
                        nums(grid.point(k))
                    } else {
                        String::new()
                    };
                    vec![r.to_string(), x.to_string(), num(table.at(r)[x]), action]
                })
            })
            .collect();
        out.table("values", &["s", "state", "value", "argmin_action"], &rows)?;
        (rep.gap, rep.costs, rep.values)
    };
    let rows: Vec<Vec<String>> = (0..gap.len())
        .map(|x| vec![x.to_string(), num(costs[x]), num(values[x]), num(gap[x])])
        .collect();
    out.table("gaps", &["start", "cost", "value", "gap"], &rows)?;
    out.finish(summary(vec![
        (
            "max_gap",
            json!(gap.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        ),
        ("costs", json!(costs)),
        ("values", json!(values)),
    ]))
}

fn generator_rows(eps: f64, sv: &SetValueApprox) -> Vec<Vec<String>> {
    sv.generators
        .iter()
        .enumerate()
        .map(|(k, g)| {
            let mut r = vec![
                num(eps),
                k.to_string(),
                g.control_id.to_string(),
                num(g.gap),
            ];
            r.extend(g.values.iter().map(|v| num(*v)));
            r
        })
        .collect()
}

fn generator_header(len: usize) -> Vec<String> {
    let mut h: Vec<String> = ["eps", "generator", "control_id", "gap"]
        .map(String::from)
        .to_vec();
    h.extend((0..len).map(|x| format!("value_{x}")));
    h
}

pub fn setvalue(ctx: &Ctx) -> CliResult<PathBuf> {
    let game = ctx.game()?;
    let eps_list = ctx.eps_or(&[0.0])?;
    let mut m = ctx.manifest("setvalue");
    m.param("eps", eps_list.clone());
    let mut out = ctx.output(m)?;
    let mut rows = Vec::new();
    let mut counts = Vec::new();
    let mut width = game.mu.len();
    for &eps in &eps_list {
        let sv = if game.spec.is_path_dependent() {
            path_set_value_eps(&game.spec, 0, &game.path_measure(), eps)?
        } else if eps == 0.0 {
            raw_set_value(&game.spec, 0, &game.mu, TOL_EXACT)?
        } else {
            set_value_eps(&game.spec, 0, &game.mu, eps)?
        };
        width = sv.measure.len();
        counts.push(json!({ "eps": eps, "generators": sv.generators.len(), "family": sv.family }));
        rows.extend(generator_rows(eps, &sv));
    }
    let header = generator_header(width);
    out.table(
        "generators",
        &header.iter().map(String::as_str).collect::<Vec<_>>(),
        &rows,
    )?;
    out.finish(summary(vec![("set_values", json!(counts))]))
}

pub fn dpp_rows(reports: &[DppReport]) -> Vec<Vec<String>> {
    reports
        .iter()
        .flat_map(|rep| {
            rep.rows.iter().map(move |r| {
                vec![
                    rep.t0.to_string(),
                    num(r.epsilon),
                    r.direction.name().into(),
                    num(r.inflated),
                    r.checked.to_string(),
                    num(r.worst_distance),
                    num(r.defect),
                    r.pass.to_string(),
                ]
            })
        })
        .collect()
}

pub const DPP_HEADER: [&str; 8] = [
    "t0",
    "eps",
    "direction",
    "inflated",
    "checked",
    "worst_distance",
    "defect",
    "pass",
];

pub fn dpp(ctx: &Ctx) -> CliResult<PathBuf> {
    let game = ctx.game()?;
    game.require_state("dpp-check (use `relaxed dpp` for path games)")?;
    let eps = ctx.eps_or(&[0.0, 0.01, 0.05])?;
    let splits = ctx.splits(game.spec.horizon())?;
    let mut m = ctx.manifest("dpp-check");
    m.param("eps", eps.clone());
    m.param("t0", splits.clone());
    let mut out = ctx.output(m)?;
    let reports = splits
        .iter()
        .map(|&t0| dpp_check(&game.spec, 0, t0, &game.mu, &eps))
        .collect::<Result<Vec<_>, _>>()?;
    out.table("inclusions", &DPP_HEADER, &dpp_rows(&reports))?;
    let pass = reports.iter().all(|r| r.pass());
    let path = out.finish(summary(vec![
        ("pass", json!(pass)),
        (
            "constants",
            json!(reports.iter().map(|r| r.constant).collect::<Vec<_>>()),
        ),
    ]))?;
    if !pass {
        return Err(CliError::Check(format!(
            "DPP inclusion defect, see {}",
            path.display()
        )));
    }
    Ok(path)
}

pub fn example71(ctx: &Ctx, a0: f64, mu_lo: f64) -> CliResult<PathBuf> {
    let mut m = ctx.manifest("example71");
    m.param("a0", a0);
    m.param("mu_lo", mu_lo);
    let mut out = ctx.output(m)?;
    let rep = example71_counterexample(a0, mu_lo)?;
    let mut rows: Vec<Vec<String>> = rep
        .state_values
        .iter()
        .zip(rep.expected_state)
        .map(|(v, e)| vec!["state".into(), num(*v), num(e)])
        .collect();
    rows.push(vec![
        "path".into(),
        num(rep.path_value),
        num(rep.path_value),
    ]);
    out.table("values", &["family", "value", "closed_form"], &rows)?;
    let pass = rep.pass();
    let path = out.finish(summary(vec![
        ("a0", json!(a0)),
        ("mu_lo", json!(mu_lo)),
        ("state_values", json!(rep.state_values)),
        ("closed_form_state_values", json!(rep.expected_state)),
        ("path_value", json!(rep.path_value)),
        ("path_value_in_path_set", json!(rep.path_member)),
        (
            "path_value_absent_from_state_set",
            json!(rep.absent_from_state),
        ),
        ("coincidence", json!(rep.coincidence)),
        ("state_controls", json!(rep.state_controls)),
        ("path_controls", json!(rep.path_controls)),
        ("pass", json!(pass)),
    ]))?;
    if !pass {
        return Err(CliError::Check(format!(
            "counterexample check failed, see {}",
            path.display()
        )));
    }
    Ok(path)
}
