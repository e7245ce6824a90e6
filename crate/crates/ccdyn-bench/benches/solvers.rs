use ccdyn::dynamics::{ContourStepper, PatchStepper, SimState};
use ccdyn::geometry::{GriddedVorticity, PatchContour, Point, PolarContourField, VortexRegion, VortexSystem};
use ccdyn::kernels::{self_stream_unit, QuadratureSpec, SingularityMode};
use ccdyn::oracles::{SpectralSolver, SpectralState};
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn elliptic_field(n_phi: usize, n_w: usize) -> PolarContourField {
    PolarContourField::from_fn(n_phi, 1.0, n_w, |phi, w| {
        let r = 1.3 * 0.8 / ((0.8 * phi.cos()).powi(2) + (1.3 * phi.sin()).powi(2)).sqrt();
        0.5 * r * r * (1.0 / w).ln()
    })
    .unwrap()
}

fn kernels(c: &mut Criterion) {
    for (n_phi, n_w) in [(64, 16), (128, 48)] {
        let f = elliptic_field(n_phi, n_w);
        let q = QuadratureSpec::new(n_phi, SingularityMode::SplitLog);
        c.bench_function(&format!("self_stream {n_phi}x{n_w}"), |b| {
            b.iter(|| self_stream_unit(black_box(&q), black_box(&f)))
        });
    }
}

fn contour_rhs(c: &mut Criterion) {
    let reg = VortexRegion::new(Point::ORIGIN, 1.0, elliptic_field(64, 16)).unwrap();
    let stepper = ContourStepper::new(64);
    let state = SimState::new(VortexSystem::monopole(reg));
    c.bench_function("monopole rates 64x16", |b| b.iter(|| stepper.rates(black_box(&state.system))));
    c.bench_function("monopole step 64x16", |b| b.iter(|| stepper.step(black_box(&state), 1e-3)));
}

fn patch(c: &mut Criterion) {
    let p = PatchContour::ellipse(Point::ORIGIN, 1.0, 1.5, 1.0, 0.0, 128).unwrap();
    let stepper = PatchStepper::new(128);
    c.bench_function("patch step 128", |b| b.iter(|| stepper.step(black_box(&p), 1e-3, 0.0)));
}

fn spectral(c: &mut Criterion) {
    let grid = GriddedVorticity::from_fn(16.0, 128, |p| (-(p.x * p.x + 2.0 * p.y * p.y)).exp());
    let solver = SpectralSolver::for_grid(&grid).unwrap();
    let state = SpectralState { grid, t: 0.0 };
    c.bench_function("spectral step 128", |b| b.iter(|| solver.step(black_box(&state), 0.01)));
}

criterion_group!(benches, kernels, contour_rhs, patch, spectral);
criterion_main!(benches);
