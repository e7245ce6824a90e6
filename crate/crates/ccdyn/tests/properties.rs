use ccdyn::dynamics::{solve_theta_kj, theta_residual, PhaseTracker};
use ccdyn::geometry::{GriddedVorticity, Point, PolarContourField, VortexRegion, VortexSystem};
use ccdyn::invariants::{casimir, count_level_components, first_moment, CasimirFn};
use ccdyn::oracles::hausdorff;
use proptest::prelude::*;
use std::f64::consts::PI;

fn gaussian(center: Point, peak: f64, radius: f64, n_phi: usize, n_w: usize) -> VortexRegion {
    let f = PolarContourField::from_fn(n_phi, peak, n_w, |_, w| 0.5 * radius * radius * (peak / w).ln())
    .unwrap();
    VortexRegion::new(center, peak, f).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn first_moment_shifts_with_circulation(
        dx in -5.0..5.0f64, dy in -5.0..5.0f64, peak in 0.2..3.0f64, radius in 0.3..2.0f64,
    ) {
        let a = VortexSystem::monopole(gaussian(Point::ORIGIN, peak, radius, 24, 12));
        let b = VortexSystem::monopole(gaussian(Point::new(dx, dy), peak, radius, 24, 12));
        let gamma = a.regions[0].circulation();
        let shift = first_moment(&b) - first_moment(&a);
        prop_assert!((shift.re - gamma * dx).abs() < 1e-10 * (1.0 + gamma.abs()));
        prop_assert!((shift.im - gamma * dy).abs() < 1e-10 * (1.0 + gamma.abs()));
    }

    #[test]
    fn casimirs_do_not_depend_on_position(dx in -5.0..5.0f64, dy in -5.0..5.0f64) {
        let a = VortexSystem::monopole(gaussian(Point::ORIGIN, 1.0, 1.0, 24, 12));
        let b = VortexSystem::monopole(gaussian(Point::new(dx, dy), 1.0, 1.0, 24, 12));
        for k in [CasimirFn::Area, CasimirFn::Power(2), CasimirFn::Exp(0.5)] {
            let (ca, cb) = (casimir(&a, k), casimir(&b, k));
            prop_assert!((ca - cb).abs() <= 1e-13 * ca.abs().max(1.0));
        }
    }

    #[test]
    fn single_gaussian_has_one_component(
        cx in -2.0..2.0f64, cy in -2.0..2.0f64, frac in 0.05..0.9f64,
    ) {
        let g = GriddedVorticity::from_fn(12.0, 96, |p| (-((p.x - cx).powi(2) + (p.y - cy).powi(2))).exp());
        prop_assert_eq!(count_level_components(&g, frac).unwrap(), 1);
        prop_assert_eq!(count_level_components(&g, 1.01).unwrap(), 0);
    }

    #[test]
    fn separated_pair_splits_above_the_saddle(sep in 3.0..5.0f64) {
        let g = GriddedVorticity::from_fn(16.0, 128, |p| {
            (-((p.x - 0.5 * sep).powi(2) + p.y * p.y)).exp() + (-((p.x + 0.5 * sep).powi(2) + p.y * p.y)).exp()
        });
        let saddle = 2.0 * (-(0.25 * sep * sep)).exp();
        prop_assert_eq!(count_level_components(&g, 0.5 * saddle).unwrap(), 1);
        prop_assert_eq!(count_level_components(&g, 0.5 * (saddle + 1.0)).unwrap(), 2);
    }

    #[test]
    fn hausdorff_is_symmetric(shift in 0.0..1.0f64, r in 0.5..2.0f64) {
        let circle = |c: f64, r: f64| -> Vec<(Point, Point)> {
            (0..64)
                .map(|k| {
                    let p = |k: usize| Point::new(c, 0.0) + Point::polar(r, 2.0 * PI * k as f64 / 64.0);
                    (p(k), p(k + 1))
                })
                .collect()
        };
        let (a, b) = (circle(0.0, r), circle(shift, r));
        prop_assert!((hausdorff(&a, &b) - hausdorff(&b, &a)).abs() < 1e-12);
        prop_assert!(hausdorff(&a, &a) < 1e-15);
    }

    #[test]
    fn phase_tracker_unwraps(steps in proptest::collection::vec(-1.5..1.5f64, 1..50)) {
        let mut tracker = PhaseTracker::default();
        let mut truth = 0.0;
        let mut last = tracker.update(0.0);
        for d in steps {
            truth += d;
            let raw = (truth + 0.5 * PI).rem_euclid(PI) - 0.5 * PI;
            let next = tracker.update(raw);
            prop_assert!((next - last - d).abs() < 1e-9);
            last = next;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn alignment_solution_zeroes_the_residual(
        sep in 2.5..5.0f64, angle in 0.0..(2.0 * PI), target in 0.0..(2.0 * PI), frac in 0.2..0.8f64,
    ) {
        let c = Point::polar(0.5 * sep, angle);
        let sys = VortexSystem::new(vec![
            gaussian(c, 1.0, 0.5, 24, 12),
            gaussian(Point::ORIGIN - c, -1.0, 0.5, 24, 12),
        ])
        .unwrap();
        for (k, j) in [(0, 1), (1, 0)] {
            let (ak, aj) = (&sys.regions[k], &sys.regions[j]);
            let w = frac * aj.peak;
            // Aim the ray at a point of region j's level-w circle.
            let rho = 0.5 * (aj.peak / w).ln().sqrt();
            let phi = (aj.center + Point::polar(rho, target) - ak.center).angle();
            let theta = solve_theta_kj(&sys, k, j, phi, w).unwrap();
            prop_assert!(theta_residual(&sys, k, j, phi, w, theta).unwrap().abs() < 1e-9);
        }
    }
}
