use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use micromacro::exec::Execution;
use micromacro::noise::{predict_witness_curves, ExperimentParams};
use micromacro::polarization::{bell_state, simulate_tomography, tomography_settings};
use micromacro::spdc::{monte_carlo_oracle, DetailedParams, McOptions};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn oracle(c: &mut Criterion) {
    let mut g = c.benchmark_group("mc_oracle_1e5");
    g.sample_size(10);
    let params = DetailedParams::default();
    let opts = McOptions {
        samples: 100_000,
        seed: 1,
        point: 0,
    };
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| monte_carlo_oracle(black_box(0.4), black_box(1.1), &params, &opts, exec).unwrap())
        });
    }
    g.finish();
}

fn bands(c: &mut Criterion) {
    let mut g = c.benchmark_group("witness_bands");
    g.sample_size(10);
    let grid: Vec<f64> = (0..100).map(|i| i as f64).collect();
    let params = ExperimentParams::default();
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| predict_witness_curves(black_box(&grid), &params, 200, 5, exec).unwrap())
        });
    }
    g.finish();
}

fn tomography(c: &mut Criterion) {
    let mut g = c.benchmark_group("tomography_1e6");
    let rho = bell_state();
    let settings = tomography_settings();
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| simulate_tomography(&rho, black_box(&settings), 1_000_000, 9, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, oracle, bands, tomography);
criterion_main!(benches);
