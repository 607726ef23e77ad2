//! Property tests over randomly generated games, measures and controls.

use std::sync::Arc;

use mfgset::control::{concat_controls, PureStateControl, RelaxedControl, StatePolicy};
use mfgset::diffusion::{
    builtin, cont_mfe_gap, mkv_flow, ContControl, InitialLaw, Scheme, SOLVER_TOL,
};
use mfgset::dynamics::{measure_flow, value_v};
use mfgset::game::StateModel;
use mfgset::hetero::{lambda_eps_rounding, round_start_paths};
use mfgset::measure::empirical_measure;
use mfgset::models::{random_path_spec, random_table_spec};
use mfgset::nplayer::{best_response_value, nplayer_costs, ChainMode, DeviationFamily, NConfig};
use mfgset::relaxed::{global_mfe_gap, lambda_from_gamma, relaxed_mfe_gap, relaxed_set_value};
use mfgset::setvalue::{path_set_value_eps, raw_set_value, set_value_eps, sup_distance};
use mfgset::{w1_finite, GameSpec, Model, PathMeasure, SimplexMeasure, TOL_EXACT};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn simplex(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, len).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

fn random_control(spec: &GameSpec, seed: u64) -> PureStateControl {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.actions().len();
    let idx: Vec<usize> = (0..spec.horizon() * spec.d())
        .map(|_| rng.random_range(0..n))
        .collect();
    PureStateControl::from_grid_indices(spec, &idx).unwrap()
}

fn random_rows(spec: &GameSpec, seed: u64) -> RelaxedControl {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.actions().len();
    RelaxedControl::from_rows(spec, 0, |_, _| {
        let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.05).collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / s).collect()
    })
    .unwrap()
}

/// Base game with a nonnegative bump added to the terminal cost.
#[derive(Debug)]
struct Bumped {
    base: GameSpec,
    bump: Vec<f64>,
}

impl StateModel for Bumped {
    fn transition(&self, t: usize, x: usize, mu: &[f64], a: &[f64], out: &mut [f64]) {
        self.base
            .state_model("bump")
            .unwrap()
            .transition(t, x, mu, a, out)
    }
    fn running_cost(&self, t: usize, x: usize, mu: &[f64], a: &[f64]) -> f64 {
        self.base
            .state_model("bump")
            .unwrap()
            .running_cost(t, x, mu, a)
    }
    fn terminal_cost(&self, x: usize, mu: &[f64]) -> f64 {
        self.base.state_model("bump").unwrap().terminal_cost(x, mu) + self.bump[x]
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn w1_is_a_metric(a in simplex(4), b in simplex(4), c in simplex(4)) {
        let ab = w1_finite(&a, &b).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(ab, w1_finite(&b, &a).unwrap());
        prop_assert_eq!(w1_finite(&a, &a).unwrap(), 0.0);
        let ac = w1_finite(&a, &c).unwrap();
        let cb = w1_finite(&c, &b).unwrap();
        prop_assert!(ab <= ac + cb + 1e-15);
        if a != b {
            prop_assert!(ab > 0.0);
        }
    }

    #[test]
    fn empirical_weights_are_multiples(points in prop::collection::vec(0usize..5, 1..40)) {
        let m = empirical_measure(5, &points).unwrap();
        let n = points.len() as f64;
        for &w in m.weights() {
            prop_assert!(w == 0.0 || w >= 1.0 / n - 1e-15);
        }
    }

    #[test]
    fn concatenation_is_associative(seed in any::<u64>(), t1 in 0usize..=3, dt in 0usize..=3) {
        let spec = random_table_spec(seed, 3, 3, 3, false).unwrap();
        let t2 = (t1 + dt).min(3);
        let (a, b, c) = (random_control(&spec, seed), random_control(&spec, seed ^ 1), random_control(&spec, seed ^ 2));
        let left = concat_controls(&concat_controls(&a, &b, t1).unwrap(), &c, t2).unwrap();
        let right = concat_controls(&a, &concat_controls(&b, &c, t2).unwrap(), t1).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn flows_conserve_mass_and_stay_above_c_q(seed in any::<u64>(), d in 2usize..=4, horizon in 1usize..=3, mu in simplex(4)) {
        let spec = random_table_spec(seed, d, horizon, 3, true).unwrap();
        let mu = SimplexMeasure::new(mu[..d].iter().map(|w| w / mu[..d].iter().sum::<f64>()).collect()).unwrap();
        let alpha = random_control(&spec, seed);
        let flow = measure_flow(&spec, 0, &mu, &alpha).unwrap();
        for s in 0..=horizon {
            prop_assert!((flow.at(s).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            if s > 0 {
                prop_assert!(flow.at(s).iter().all(|&w| w >= spec.c_q() - 1e-15));
            }
        }
    }

    #[test]
    fn value_is_monotone_in_terminal_cost(seed in any::<u64>(), horizon in 1usize..=3, bump in prop::collection::vec(0.0f64..0.5, 2)) {
        let base = random_table_spec(seed, 2, horizon, 3, true).unwrap();
        let bumped = GameSpec::new(
            "bumped",
            base.states().clone(),
            base.time_grid(),
            base.actions().clone(),
            Model::State(Arc::new(Bumped { base: base.clone(), bump })),
            base.c_q(),
            base.c0() + 0.5,
        )
        .unwrap();
        let mu = SimplexMeasure::binary(0.4).unwrap();
        let alpha = random_control(&base, seed);
        let flow = measure_flow(&base, 0, &mu, &alpha).unwrap();
        let v = value_v(&base, &flow, 0).unwrap();
        let w = value_v(&bumped, &flow, 0).unwrap();
        for (a, b) in v.initial().iter().zip(w.initial()) {
            prop_assert!(b >= a);
        }
    }

    #[test]
    fn set_values_grow_with_tolerance(seed in any::<u64>(), p in 0.1f64..0.9, e1 in 0.0f64..0.1, de in 0.0f64..0.1) {
        let spec = random_table_spec(seed, 2, 2, 3, true).unwrap();
        let mu = SimplexMeasure::binary(p).unwrap();
        let raw = raw_set_value(&spec, 0, &mu, TOL_EXACT).unwrap();
        let small = set_value_eps(&spec, 0, &mu, e1).unwrap();
        let big = set_value_eps(&spec, 0, &mu, e1 + de).unwrap();
        for g in &raw.generators {
            prop_assert!(small.contains(&g.values));
        }
        for g in &small.generators {
            prop_assert!(big.contains(&g.values));
            for (j, v) in g.values.iter().zip(&g.v_values) {
                prop_assert!(j - v >= -TOL_EXACT && j - v <= e1 + TOL_EXACT);
            }
            prop_assert!(sup_distance(&g.values, &g.v_values) <= e1 + TOL_EXACT);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn nplayer_costs_follow_permutations(seed in any::<u64>(), start in prop::collection::vec(0usize..3, 2..5)) {
        let spec = random_table_spec(seed, 3, 2, 2, true).unwrap();
        let n = start.len();
        let cfg = NConfig::new(3, start.clone()).unwrap();
        let controls: Vec<PureStateControl> = (0..n).map(|i| random_control(&spec, seed ^ i as u64)).collect();
        let pols: Vec<&dyn StatePolicy> = controls.iter().map(|c| c as &dyn StatePolicy).collect();
        let base = nplayer_costs(&spec, 0, &cfg, &pols).unwrap();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.rotate_left(1);
        // player j moves to slot perm[j] together with its control
        let moved = cfg.permuted(&perm).unwrap();
        let mut moved_pols = pols.clone();
        for j in 0..n {
            moved_pols[perm[j]] = pols[j];
        }
        let after = nplayer_costs(&spec, 0, &moved, &moved_pols).unwrap();
        for j in 0..n {
            prop_assert!((base[j] - after[perm[j]]).abs() < 1e-12);
        }
    }

    #[test]
    fn brackets_are_ordered(seed in any::<u64>(), start in prop::collection::vec(0usize..2, 1..5)) {
        let spec = random_table_spec(seed, 2, 2, 2, true).unwrap();
        let cfg = NConfig::new(2, start.clone()).unwrap();
        let alpha = random_control(&spec, seed);
        for i in 0..start.len() {
            let b = best_response_value(&spec, 0, &cfg, &alpha, i, &DeviationFamily::Grid, ChainMode::Auto).unwrap();
            prop_assert!(b.lower <= b.upper + 1e-15);
            if start.len() == 1 {
                prop_assert!((b.upper - b.lower).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn global_gap_scales_the_relaxed_gap(seed in any::<u64>(), horizon in 1usize..=2, w in simplex(2)) {
        let spec = random_path_spec(seed, horizon, 2).unwrap();
        let mu = PathMeasure::new(spec.path_space(0), w).unwrap();
        let gamma = random_rows(&spec, seed);
        let lam = lambda_from_gamma(&spec, 0, &mu, &gamma).unwrap();
        let g = global_mfe_gap(&spec, &lam).unwrap();
        let r = relaxed_mfe_gap(&spec, 0, &mu, &gamma).unwrap();
        for x in 0..2 {
            prop_assert!((g.gap[x] - mu.weights()[x] * r.gap[x]).abs() < 1e-12);
        }
    }

    #[test]
    fn rounding_respects_its_bound(seed in any::<u64>(), n in 1usize..40, w in simplex(2)) {
        let spec = random_path_spec(seed, 2, 3).unwrap();
        let mu = PathMeasure::new(spec.path_space(0), w).unwrap();
        let lam = lambda_from_gamma(&spec, 0, &mu, &random_rows(&spec, seed)).unwrap();
        let paths = round_start_paths(&mu, n);
        // players may only start where the measure has mass
        prop_assume!(paths.iter().all(|&p| mu.weights()[p] > 0.0));
        let r = lambda_eps_rounding(&spec, &paths, &lam).unwrap();
        prop_assert!(r.max_deviation <= r.bound + 1e-15);
        let total: usize = r.counts.iter().flatten().sum();
        prop_assert_eq!(total, n);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn diffusion_flows_conserve_mass(mean in -2.0f64..2.0, sd in 0.3f64..1.5, a in -1.0f64..1.0, which in 0usize..3) {
        let spec = builtin(["drift", "crowd", "coordination"][which]).unwrap().with_grid(281, 0.05).unwrap();
        let mu = InitialLaw::Gaussian { mean, sd }.masses(spec.grid()).unwrap();
        let alpha = ContControl::formula(&format!("{a} * tanh(x)")).unwrap();
        let flow = mkv_flow(&spec, 0.0, &mu, &alpha, Scheme::Implicit).unwrap();
        prop_assert!(flow.mass_error() < 1e-8);
        prop_assert!(flow.min_mass() >= 0.0);
        let gap = cont_mfe_gap(&spec, 0.0, &mu, &alpha).unwrap();
        prop_assert!(gap.gap >= -SOLVER_TOL);
    }
}

#[test]
fn pure_equilibria_appear_among_relaxed_generators() {
    for seed in 0..6 {
        let spec = random_path_spec(seed, 2, 2).unwrap();
        let mu = PathMeasure::new(spec.path_space(0), vec![0.45, 0.55]).unwrap();
        let pure = path_set_value_eps(&spec, 0, &mu, 0.0).unwrap();
        let relaxed = relaxed_set_value(&spec, 0, &mu, 0.0, 2).unwrap();
        for g in &pure.generators {
            assert!(relaxed.contains(&g.values), "seed {seed}: {:?}", g.values);
        }
    }
}
