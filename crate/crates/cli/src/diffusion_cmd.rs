use std::path::PathBuf;

use mfgset::diffusion::{
    cont_convergence_experiment, cont_set_value_sample, default_seeds, hjb_verification,
    lipschitz_probe, mfe_fixed_point, mkv_flow, ContControl, Scheme, SearchOptions,
};
use mfgset::nplayer::DEFAULT_N_LIST;
use serde_json::json;

use crate::context::{summary, Ctx};
use crate::error::{CliError, CliResult};
use crate::output::num;
use crate::DiffusionCommand;

const SEARCH: SearchOptions = SearchOptions {
    iterations: 200,
    damping: 0.5,
};

/// Particle samples per N of `diffusion converge` when `--samples` is absent.
const PARTICLE_SAMPLES: usize = 300;

const PROBE_SLOPES: [f64; 3] = [0.0, 1.0, 10.0];

pub fn run(ctx: &Ctx, command: DiffusionCommand) -> CliResult<PathBuf> {
    let d = ctx.diffusion()?;
    let spec = &d.spec;
    match command {
        DiffusionCommand::Flow => {
            let mut out = ctx.output(ctx.manifest("diffusion flow"))?;
            let flow = mkv_flow(spec, 0.0, &d.mu, &d.control, Scheme::Implicit)?;
            let rows: Vec<Vec<String>> = (flow.start()..=flow.end())
                .map(|n| {
                    let m = flow.at(n);
                    vec![
                        n.to_string(),
                        num(spec.time(n)),
                        num(m.iter().sum()),
                        num(flow.moment(n, 1)),
                        num(flow.moment(n, 2)),
                    ]
                })
                .collect();
            out.table(
                "moments",
                &["step", "time", "mass", "mean", "second_moment"],
                &rows,
            )?;
            let grid = flow.grid();
            let last = flow.at(flow.end());
            let rows: Vec<Vec<String>> = (0..grid.nx)
                .map(|k| vec![num(grid.node(k)), num(last[k])])
                .collect();
            out.table("terminal", &["x", "mass"], &rows)?;
            out.finish(summary(vec![
                ("mass_error", json!(flow.mass_error())),
                ("min_mass", json!(flow.min_mass())),
                ("boundary_mass", json!(flow.boundary_mass())),
            ]))
        }
        DiffusionCommand::Hjb => {
            let mut m = ctx.manifest("diffusion hjb");
            m.param("lipschitz_probe", PROBE_SLOPES.to_vec());
            let mut out = ctx.output(m)?;
            let hjb = hjb_verification(spec, 0.0, &d.mu, &d.control)?;
            out.table(
                "verification",
                &["truncation", "coarse_gap", "fine_gap", "pass"],
                &[vec![
                    num(hjb.truncation),
                    num(hjb.coarse_gap),
                    num(hjb.fine_gap),
                    hjb.pass.to_string(),
                ]],
            )?;
            let probe = lipschitz_probe(spec, 0.0, &d.mu, &PROBE_SLOPES)?;
            let rows: Vec<Vec<String>> = probe
                .iter()
                .map(|r| {
                    vec![
                        num(r.l),
                        num(r.control_slope),
                        num(r.value_slope),
                        num(r.cost_slope),
                        num(r.value_sup),
                        num(r.slope_bound),
                        num(r.sup_bound),
                        r.pass.to_string(),
                    ]
                })
                .collect();
            out.table(
                "lipschitz",
                &[
                    "l",
                    "control_slope",
                    "value_slope",
                    "cost_slope",
                    "value_sup",
                    "slope_bound",
                    "sup_bound",
                    "pass",
                ],
                &rows,
            )?;
            let pass = hjb.pass && probe.iter().all(|r| r.pass);
            let path = out.finish(summary(vec![
                ("hjb_pass", json!(hjb.pass)),
                ("pass", json!(pass)),
            ]))?;
            if !pass {
                return Err(CliError::Check(format!(
                    "HJB or Lipschitz check failed, see {}",
                    path.display()
                )));
            }
            Ok(path)
        }
        DiffusionCommand::MfeSearch => {
            let eps = ctx.eps_or(&[0.01])?[0];
            let mut m = ctx.manifest("diffusion mfe-search");
            m.param("eps", eps);
            m.param("iterations", SEARCH.iterations);
            m.param("damping", SEARCH.damping);
            let mut out = ctx.output(m)?;
            let mut seeds = default_seeds(spec);
            seeds.push(d.control.clone());
            let sv = cont_set_value_sample(spec, 0.0, &d.mu, eps, &seeds, SEARCH)?;
            let rows: Vec<Vec<String>> = sv
                .generators
                .iter()
                .map(|g| {
                    let avg: f64 = g.values.iter().zip(&sv.masses).map(|(v, w)| v * w).sum();
                    vec![g.seed.to_string(), num(g.gap), num(avg)]
                })
                .collect();
            out.table("generators", &["seed", "gap", "average_value"], &rows)?;
            let grid = spec.grid();
            let rows: Vec<Vec<String>> = sv
                .generators
                .iter()
                .enumerate()
                .flat_map(|(k, g)| {
                    g.values
                        .iter()
                        .enumerate()
                        .map(move |(i, v)| vec![k.to_string(), num(grid.node(i)), num(*v)])
                })
                .collect();
            out.table("values", &["generator", "x", "value"], &rows)?;
            out.finish(summary(vec![
                ("generators", json!(sv.generators.len())),
                ("runs", json!(sv.runs)),
                ("converged", json!(sv.converged)),
                ("below_solver_tol", json!(sv.below_solver_tol)),
            ]))
        }
        DiffusionCommand::Converge => {
            let n_list = ctx.n_list_or(&DEFAULT_N_LIST)?;
            let samples = ctx.common.samples.unwrap_or(PARTICLE_SAMPLES);
            let seed = ctx.common.seed;
            let mut m = ctx.manifest("diffusion converge");
            m.param("n_list", n_list.clone());
            m.param("samples", samples);
            m.param("seed", seed);
            m.param("iterations", SEARCH.iterations);
            m.param("damping", SEARCH.damping);
            let mut out = ctx.output(m)?;
            let run = mfe_fixed_point(
                spec,
                0.0,
                &d.mu,
                &d.control,
                SEARCH.iterations,
                SEARCH.damping,
            )?;
            let star = ContControl::Table(run.control);
            let conv =
                cont_convergence_experiment(spec, 0.0, &d.mu, &star, &n_list, samples, seed, None)?;
            let rows: Vec<Vec<String>> = conv
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.n.to_string(),
                        num(r.initial_w1.mean),
                        num(r.w1_max.mean),
                        num(r.w1_max.half_width),
                        num(r.w1_terminal.mean),
                        num(r.theta.mean),
                        num(r.cost_gap.mean),
                        num(r.cost_gap.half_width),
                    ]
                })
                .collect();
            out.table(
                "measures",
                &[
                    "n",
                    "initial_w1",
                    "w1_max",
                    "w1_max_half_width",
                    "w1_terminal",
                    "theta",
                    "cost_gap",
                    "cost_gap_half_width",
                ],
                &rows,
            )?;
            out.finish(summary(vec![
                ("seed", json!(seed)),
                ("fixed_point_converged", json!(run.converged)),
                ("fixed_point_gap", json!(run.gap.gap)),
                ("slope", json!(conv.fit.map(|f| f.slope))),
                ("slope_window", json!([conv.slope_window.0, conv.slope_window.1])),
                ("slope_ok", json!(conv.slope_ok)),
                ("cost_gap_decreasing", json!(conv.cost_gap_decreasing)),
                (
                    "note",
                    json!("one-dimensional grids show the N^-1/2 sampling term of theta_N, not its N^-1/3 regime"),
                ),
            ]))
        }
    }
}
