//! Library results against the brute-force references in `common`.

mod common;

use common::{assignments, hausdorff, sup, Oracle};
use mfgset::control::{PureStateControl, StatePolicy};
use mfgset::dynamics::{measure_flow, value_v};
use mfgset::models::{
    congestion_spec, constant_spec, crowd_aversion_spec, example71_spec, random_table_spec,
};
use mfgset::nplayer::{homogeneous_cost, nplayer_costs, ChainMode, NConfig};
use mfgset::setvalue::raw_set_value;
use mfgset::{GameSpec, SimplexMeasure, DEDUP_TOL, TOL_EXACT};

/// Agreement tolerance between two summation orders of the same sums.
const ROUNDING: f64 = 1e-12;

/// Two-state games with horizon at most `max_t` and at most `max_a` actions.
fn small_games(max_t: usize, max_a: usize) -> Vec<GameSpec> {
    let mut out = vec![
        example71_spec(0.25).unwrap(),
        example71_spec(0.1).unwrap(),
        crowd_aversion_spec().unwrap(),
        constant_spec(0.4, 2).unwrap(),
        congestion_spec().unwrap().with_grid_resolution(4).unwrap(),
    ];
    for seed in 0..6u64 {
        for horizon in 1..=max_t {
            for n_actions in 1..=max_a {
                out.push(
                    random_table_spec(
                        seed * 31 + horizon as u64,
                        2,
                        horizon,
                        n_actions,
                        seed % 2 == 0,
                    )
                    .unwrap(),
                );
            }
        }
    }
    out.retain(|s| s.horizon() <= max_t && s.actions().len() <= max_a);
    out
}

fn measures() -> Vec<SimplexMeasure> {
    [0.5, 0.3, 0.85]
        .iter()
        .map(|&p| SimplexMeasure::binary(p).unwrap())
        .collect()
}

#[test]
fn raw_set_value_matches_enumeration() {
    let mut checked = 0;
    for spec in small_games(2, 4) {
        let oracle = Oracle::new(&spec);
        for mu in measures() {
            for t in 0..spec.horizon() {
                let lib = raw_set_value(&spec, t, &mu, TOL_EXACT).unwrap();
                let lib_values: Vec<Vec<f64>> = lib.values().iter().map(|v| v.to_vec()).collect();
                let reference = oracle.raw_set_value(t, mu.weights(), TOL_EXACT, DEDUP_TOL);
                assert_eq!(
                    lib_values.len(),
                    reference.len(),
                    "{} t={t} mu={:?}",
                    spec.name(),
                    mu.weights()
                );
                if !reference.is_empty() {
                    let h = hausdorff(&lib_values, &reference);
                    assert!(h <= ROUNDING, "{} t={t}: {h}", spec.name());
                }
                checked += 1;
            }
        }
    }
    assert!(checked > 100);
}

#[test]
fn value_matches_minimum_over_controls() {
    for spec in small_games(3, 3) {
        let oracle = Oracle::new(&spec);
        let d = spec.d();
        let slots = spec.horizon() * d;
        let mu = SimplexMeasure::binary(0.35).unwrap();
        // a few population controls per game
        for idx in assignments(spec.actions().len(), slots)
            .into_iter()
            .step_by(7)
            .take(4)
        {
            let alpha = PureStateControl::from_grid_indices(&spec, &idx).unwrap();
            let flow = measure_flow(&spec, 0, &mu, &alpha).unwrap();
            let reference_flow = oracle.flow(0, mu.weights(), &idx);
            for (s, reference) in reference_flow.iter().enumerate() {
                assert!(sup(flow.at(s), reference) <= ROUNDING);
            }
            for s in 0..spec.horizon() {
                let v = value_v(&spec, &flow, s).unwrap();
                let reference = oracle.value(s, &reference_flow[s..]);
                assert!(
                    sup(v.initial(), &reference) <= ROUNDING,
                    "{} s={s}",
                    spec.name()
                );
            }
        }
    }
}

#[test]
fn nplayer_costs_match_enumeration() {
    for spec in small_games(2, 4) {
        let oracle = Oracle::new(&spec);
        let slots = spec.horizon() * spec.d();
        let all = assignments(spec.actions().len(), slots);
        let pick = |k: usize| all[(k * 7919) % all.len()].clone();
        for n in 1..=3usize {
            for start in assignments(2, n) {
                let ctrls: Vec<Vec<usize>> = (0..n)
                    .map(|i| pick(i + 3 * start.iter().sum::<usize>()))
                    .collect();
                let policies: Vec<PureStateControl> = ctrls
                    .iter()
                    .map(|c| PureStateControl::from_grid_indices(&spec, c).unwrap())
                    .collect();
                let refs: Vec<&dyn StatePolicy> =
                    policies.iter().map(|p| p as &dyn StatePolicy).collect();
                let cfg = NConfig::new(2, start.clone()).unwrap();
                let lib = nplayer_costs(&spec, 0, &cfg, &refs).unwrap();
                let reference = oracle.nplayer_costs(0, &start, &ctrls);
                assert!(
                    sup(&lib, &reference) <= ROUNDING,
                    "{} {start:?}: {lib:?} vs {reference:?}",
                    spec.name()
                );

                // player 0 deviates, the others share policy 1 when present
                let common = if n > 1 { &policies[1] } else { &policies[0] };
                let mut shared = vec![ctrls[0].clone()];
                shared.extend(std::iter::repeat_n(ctrls[(n > 1) as usize].clone(), n - 1));
                let reference = oracle.nplayer_costs(0, &start, &shared)[0];
                for mode in [ChainMode::Product, ChainMode::Aggregated] {
                    let c =
                        homogeneous_cost(&spec, 0, &cfg, common, &policies[0], 0, mode).unwrap();
                    assert!(
                        (c - reference).abs() <= ROUNDING,
                        "{} {mode:?}",
                        spec.name()
                    );
                }
            }
        }
    }
}

#[test]
fn frozen_reference_values() {
    let spec = example71_spec(0.25).unwrap();
    let mut values: Vec<f64> = Oracle::new(&spec)
        .raw_set_value(0, &[0.3, 0.7], TOL_EXACT, DEDUP_TOL)
        .iter()
        .map(|g| g[0])
        .collect();
    values.sort_by(f64::total_cmp);
    assert_eq!(values.len(), 3);
    for (v, want) in values.iter().zip([0.4375, 0.6875, 0.9375]) {
        assert!((v - want).abs() < 1e-15);
    }

    let spec = congestion_spec().unwrap();
    let oracle = Oracle::new(&spec);
    let set = oracle.raw_set_value(0, &[0.5, 0.5], TOL_EXACT, DEDUP_TOL);
    assert_eq!(set.len(), 1);
    assert!(sup(&set[0], &[1.0, 1.0]) < 1e-14);
    let lib = raw_set_value(&spec, 0, &SimplexMeasure::binary(0.5).unwrap(), TOL_EXACT).unwrap();
    assert!(sup(lib.values()[0], &set[0]) <= ROUNDING);

    let costs = oracle.nplayer_costs(
        0,
        &[0, 1, 1],
        &[vec![1, 3, 4, 0], vec![1, 3, 4, 0], vec![4, 0, 2, 2]],
    );
    let frozen = [1.3142969135802465, 1.453763580246913, 1.450254320987654];
    assert!(sup(&costs, &frozen) < 1e-14);
}
