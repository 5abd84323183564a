//! Throughput benchmarks for the hot paths: coagulation flux assembly,
//! diffusion application, and a full Strang step.
//!
//! Run twice to compare the parallel and sequential cores:
//!   cargo bench -p coagdiff
//!   cargo bench -p coagdiff --no-default-features

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use coagdiff::coagulation::truncated_flux;
use coagdiff::heatflow::diffuse_raw;
use coagdiff::solver::{step_strang, Tables};
use coagdiff::state::{DefectState, SpatialGrid, StateMeasure};
use coagdiff::typespace::build_es_model;

fn setup(m: usize, n: usize) -> (coagdiff::typespace::Model, SpatialGrid, StateMeasure, DefectState) {
    let model = build_es_model(m, 1.0);
    let grid = SpatialGrid::new(1, n, 1.0);
    let mut kappa = StateMeasure::zeros(grid.clone(), m);
    let nc = grid.cell_count();
    for i in 0..m {
        for c in 0..nc {
            let x = (c as f64 + 0.5) / nc as f64;
            *kappa.at_mut(i, c) =
                (1.0 + 0.3 * (2.0 * std::f64::consts::PI * x).sin()) / (1 + i) as f64;
        }
    }
    let mut lambda = DefectState::zeros(grid.clone(), 2 * m);
    lambda.refresh_eta(&model.weights);
    (model, grid, kappa, lambda)
}

fn bench_flux(c: &mut Criterion) {
    let (model, _, kappa, lambda) = setup(64, 32);
    c.bench_function("truncated_flux_m64_n32", |b| {
        b.iter(|| truncated_flux(&kappa, &lambda, &model))
    });
}

fn bench_diffuse(c: &mut Criterion) {
    let (model, grid, kappa, _) = setup(64, 32);
    let tables = Tables::build(&grid, &model, 1e-3).unwrap();
    c.bench_function("diffuse_m64_n32", |b| {
        b.iter_batched(
            || kappa.density.clone(),
            |mut density| diffuse_raw(&mut density, 64, &grid, &tables.full).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn bench_step(c: &mut Criterion) {
    let (model, grid, kappa, lambda) = setup(64, 32);
    let tables = Tables::build(&grid, &model, 1e-3).unwrap();
    c.bench_function("step_strang_m64_n32", |b| {
        b.iter_batched(
            || (kappa.clone(), lambda.clone()),
            |(mut k, mut l)| step_strang(&mut k, &mut l, &model, &tables, 1e-3).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, bench_flux, bench_diffuse, bench_step);
criterion_main!(benches);
