use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use mfgset::control::StatePolicy;
use mfgset::diffusion::{mkv_flow, particle_system, u_solve, ParticleStart, Scheme};
use mfgset::dynamics::{measure_flow, value_v};
use mfgset::models::{example71_spec, path_switching_spec};
use mfgset::nplayer::{nplayer_costs, NConfig};
use mfgset::relaxed::relaxed_set_value;
use mfgset::setvalue::raw_set_value;
use mfgset::{PathMeasure, SimplexMeasure, TOL_EXACT};
use mfgset_bench::{congestion_case, crowd_case};

fn finite_games(c: &mut Criterion) {
    let case = congestion_case();
    c.bench_function("measure_flow/congestion", |b| {
        b.iter(|| measure_flow(&case.spec, 0, black_box(&case.mu), &case.alpha).unwrap())
    });
    let flow = measure_flow(&case.spec, 0, &case.mu, &case.alpha).unwrap();
    c.bench_function("value_v/congestion", |b| {
        b.iter(|| value_v(&case.spec, black_box(&flow), 0).unwrap())
    });
    c.bench_function("raw_set_value/congestion", |b| {
        b.iter(|| raw_set_value(&case.spec, 0, black_box(&case.mu), TOL_EXACT).unwrap())
    });

    let spec = example71_spec(0.25).unwrap();
    let mu = SimplexMeasure::binary(0.3).unwrap();
    c.bench_function("raw_set_value/two_state", |b| {
        b.iter(|| raw_set_value(&spec, 0, black_box(&mu), TOL_EXACT).unwrap())
    });

    let spec = path_switching_spec(1).unwrap();
    let mu = PathMeasure::from_states(&SimplexMeasure::binary(0.4).unwrap());
    c.bench_function("relaxed_set_value/path_switching_T1", |b| {
        b.iter(|| relaxed_set_value(&spec, 0, black_box(&mu), 0.05, 2).unwrap())
    });

    let cfg = NConfig::new(2, vec![0, 0, 1]).unwrap();
    let policies: Vec<&dyn StatePolicy> = vec![&case.alpha; 3];
    c.bench_function("nplayer_costs/product_N3", |b| {
        b.iter(|| nplayer_costs(&case.spec, 0, black_box(&cfg), &policies).unwrap())
    });
}

fn diffusion(c: &mut Criterion) {
    let case = crowd_case();
    c.bench_function("mkv_flow/implicit", |b| {
        b.iter(|| {
            mkv_flow(
                &case.spec,
                0.0,
                black_box(&case.mu),
                &case.control,
                Scheme::Implicit,
            )
            .unwrap()
        })
    });
    let flow = mkv_flow(&case.spec, 0.0, &case.mu, &case.control, Scheme::Implicit).unwrap();
    c.bench_function("u_solve", |b| {
        b.iter(|| u_solve(&case.spec, black_box(&flow), 0.0, &case.control).unwrap())
    });
    c.bench_function("particle_system/N64x10", |b| {
        b.iter(|| {
            particle_system(
                &case.spec,
                0.0,
                ParticleStart::Iid {
                    masses: &case.mu,
                    n: 64,
                },
                &[&case.control],
                black_box(3),
                10,
            )
            .unwrap()
        })
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = finite_games, diffusion
}
criterion_main!(benches);
