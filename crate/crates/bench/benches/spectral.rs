use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use viscwave_bench::{ensemble_config, grid};
use viscwave_core::analysis::{admissibility, moments_streaming, AdmissibilityOptions};
use viscwave_core::grid::{forward_transform, inverse_transform};
use viscwave_core::solver::{default_dt, Stepper};
use viscwave_core::{Field, InitialData, KernelFamily, NoiseStream, Nonlinearity, RngPolicy};

fn fft(c: &mut Criterion) {
    let mut group = c.benchmark_group("fft_round_trip");
    for (dim, points) in [(1, 8192), (2, 256)] {
        let g = grid(dim, points);
        let f = Field::from_fn(&g, |x| x.iter().map(|v| v.sin()).sum());
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{dim}d_{points}")),
            &f,
            |b, f| b.iter(|| inverse_transform(&forward_transform(black_box(f)))),
        );
    }
    group.finish();
}

fn step(c: &mut Criterion) {
    let mut group = c.benchmark_group("stochastic_step");
    for (dim, points) in [(1, 8192), (2, 256)] {
        let g = grid(dim, points);
        let dt = default_dt(&g);
        let mut stepper = Stepper::new(KernelFamily::ViscousWave, &g, dt);
        let f = Nonlinearity::sin();
        let policy = RngPolicy::new(1);
        group.bench_function(
            BenchmarkId::from_parameter(format!("{dim}d_{points}")),
            |b| {
                let mut state = InitialData::zero(&g).state();
                let mut noise = NoiseStream::new(&g, dt, policy, 0).expect("noise stream");
                b.iter(|| {
                    stepper
                        .step_stochastic(&mut state, &f, &mut noise)
                        .expect("step")
                })
            },
        );
    }
    group.finish();
}

fn ensemble(c: &mut Criterion) {
    let cfg = ensemble_config(1, 1024, 8).resolved().expect("config");
    c.bench_function("moments_1d_1024_r8", |b| {
        b.iter(|| moments_streaming(black_box(&cfg)).expect("run"))
    });
}

fn admissibility_ladder(c: &mut Criterion) {
    let opts = AdmissibilityOptions::default();
    c.bench_function("admissibility_viscous_2d", |b| {
        b.iter(|| {
            admissibility(KernelFamily::ViscousWave, 2, black_box(1.0), &opts).expect("verdict")
        })
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = fft, step, ensemble, admissibility_ladder
}
criterion_main!(benches);
