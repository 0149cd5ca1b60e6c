use std::f64::consts::PI;
use std::hint::black_box;
use std::path::Path;

use criterion::{criterion_group, criterion_main, Criterion};
use slipflow::density::density_step;
use slipflow::friction::{grad_j_delta, j_delta};
use slipflow::momentum::{assemble_mass_operator, momentum_rhs};
use slipflow::{Model, RunConfig, ScalarSpectralField, VelocityCoeffs};

/// The smoke configuration's model with a nonuniform density and a
/// velocity exciting every mode.
fn setup() -> (Model, ScalarSpectralField, VelocityCoeffs) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/smoke.toml");
    let model = RunConfig::load(&path).unwrap().model().unwrap();
    let grid = model.space.grid().clone();
    let rho = model
        .space
        .from_grid(&grid.from_fn(|x, y| 1.0 + 0.3 * (2.0 * PI * x).cos() * (PI * y).cos()));
    let u = VelocityCoeffs::from_vec(
        (0..model.basis.dim())
            .map(|i| 0.05 * (i as f64 * 1.3).sin())
            .collect(),
    );
    (model, rho, u)
}

fn kernels(c: &mut Criterion) {
    let (model, rho, u) = setup();
    c.bench_function("density_step", |b| {
        b.iter(|| density_step(&model, black_box(&rho), &u, &u, 0.0, 1.25e-4).unwrap())
    });
    c.bench_function("momentum_rhs", |b| {
        b.iter(|| momentum_rhs(&model, &u, black_box(&u), &rho, 0.0).unwrap())
    });
    c.bench_function("mass_operator", |b| {
        b.iter(|| assemble_mass_operator(&model.basis, &model.space, black_box(&rho)).unwrap())
    });
    c.bench_function("j_delta", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for i in 0..1000 {
                let v = [i as f64 * 1e-4 - 0.05, 0.01];
                acc += j_delta(black_box(&v), 0.05).unwrap() + grad_j_delta(&v, 0.05).unwrap()[0];
            }
            acc
        })
    });
}

criterion_group!(benches, kernels);
criterion_main!(benches);
