use ccdyn::geometry::{GriddedVorticity, Point};
use ccdyn::invariants::{locate_critical_points, CriticalKind, CriticalOptions};
use ccdyn::oracles::{kirchhoff_rate, kirchhoff_state, point_vortex_system, SpectralSolver, SpectralState};
use std::f64::consts::PI;

#[test]
fn co_rotating_pair_turns_at_the_point_vortex_rate() {
    let (g, d) = (1.0, 2.0);
    let t = 1.0;
    let p = point_vortex_system(&[g, g], &[Point::new(1.0, 0.0), Point::new(-1.0, 0.0)], t, 2000).unwrap();
    let expected = g / (PI * d * d) * t;
    assert!((p[0].angle() - expected).abs() < 1e-10, "{}", p[0].angle());
    assert!((p[0].norm() - 1.0).abs() < 1e-12);
}

#[test]
fn counter_rotating_pair_translates() {
    let (g, d, t) = (1.0, 2.0, 1.0);
    let p = point_vortex_system(&[g, -g], &[Point::new(0.0, 1.0), Point::new(0.0, -1.0)], t, 2000).unwrap();
    let speed = g / (2.0 * PI * d);
    assert!((p[0].x.abs() - speed * t).abs() < 1e-12);
    assert!((p[0].x - p[1].x).abs() < 1e-12);
    assert!((p[0].y - 1.0).abs() < 1e-12);
}

#[test]
fn kirchhoff_state_repeats_after_half_a_turn() {
    let (a, b, m) = (1.5, 1.0, 1.0);
    let half = PI / kirchhoff_rate(a, b, m);
    let p0 = kirchhoff_state(a, b, m, 0.0, 64).unwrap();
    let p1 = kirchhoff_state(a, b, m, half, 64).unwrap();
    for (x, y) in p0.rho.iter().zip(&p1.rho) {
        assert!((x - y).abs() < 1e-12);
    }
    let quarter = kirchhoff_state(a, b, m, 0.5 * half, 64).unwrap();
    assert!((quarter.rho[0] - b).abs() < 1e-12);
}

/// An axisymmetric Gaussian is steady in the plane; on the periodic box the
/// only forcing comes from the image lattice, whose leading term falls off
/// as `L⁻⁴`.
#[test]
fn axisymmetric_gaussian_drifts_only_through_periodic_images() {
    let change = |length: f64, n: usize| {
        let grid = GriddedVorticity::from_fn(length, n, |p| (-(p.x * p.x + p.y * p.y)).exp());
        let solver = SpectralSolver::for_grid(&grid).unwrap();
        let mut st = SpectralState { grid: grid.clone(), t: 0.0 };
        for _ in 0..20 {
            st = solver.step(&st, 0.05).unwrap();
        }
        st.grid.omega.iter().zip(&grid.omega).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    let (near, far) = (change(12.0, 48), change(16.0, 64));
    assert!(far < 5e-5, "change {far}");
    let ratio = near / far;
    assert!((ratio - (16.0f64 / 12.0).powi(4)).abs() < 0.1, "ratio {ratio}");
    assert!((change(16.0, 128) - far).abs() < 0.05 * far);
}

#[test]
fn gridded_gaussian_has_one_maximum() {
    let c = Point::new(0.3, -0.2);
    let grid = GriddedVorticity::from_fn(12.0, 96, |p| (-(p.dist(c).powi(2))).exp());
    let pts = locate_critical_points(&grid, CriticalOptions::default());
    assert_eq!(pts.len(), 1);
    assert_eq!(pts[0].kind, CriticalKind::Maximum);
    assert!(pts[0].position.dist(c) < 1e-3);
}

#[test]
fn same_sign_pair_has_a_saddle() {
    let grid = GriddedVorticity::from_fn(16.0, 128, |p| {
        (-((p.x - 1.5).powi(2) + p.y * p.y)).exp() + (-((p.x + 1.5).powi(2) + p.y * p.y)).exp()
    });
    let pts = locate_critical_points(&grid, CriticalOptions::default());
    let count = |k| pts.iter().filter(|p| p.kind == k).count();
    assert_eq!(count(CriticalKind::Maximum), 2);
    assert_eq!(count(CriticalKind::Saddle), 1);
}

#[test]
fn opposite_sign_pair_has_no_saddle() {
    let grid = GriddedVorticity::from_fn(16.0, 128, |p| {
        (-((p.x - 1.5).powi(2) + p.y * p.y)).exp() - (-((p.x + 1.5).powi(2) + p.y * p.y)).exp()
    });
    let pts = locate_critical_points(&grid, CriticalOptions::default());
    let count = |k| pts.iter().filter(|p| p.kind == k).count();
    assert_eq!(count(CriticalKind::Maximum), 1);
    assert_eq!(count(CriticalKind::Minimum), 1);
    assert_eq!(count(CriticalKind::Saddle), 0);
}
