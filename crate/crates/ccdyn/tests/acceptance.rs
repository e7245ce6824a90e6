//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! `cargo test --release --test acceptance -- 3 7` runs selected criteria.

use ccdyn::dynamics::*;
use ccdyn::error::Result;
use ccdyn::geometry::*;
use ccdyn::invariants::*;
use ccdyn::kernels::*;
use ccdyn::oracles::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

type Criterion = fn() -> Result<Outcome>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

/// Semi-axis radius of an ellipse about its center.
fn ellipse_radius(a: f64, b: f64, phi: f64) -> f64 {
    a * b / ((b * phi.cos()).powi(2) + (a * phi.sin()).powi(2)).sqrt()
}

/// `ζ` of the scaled family `ρ = R(φ) (ln(M/w))^ε` with elliptic `R`.
fn scaled_ellipse(n_phi: usize, n_w: usize, eps: f64, a: f64, b: f64) -> PolarContourField {
    PolarContourField::from_fn(n_phi, 1.0, n_w, |phi, w| {
        0.5 * ellipse_radius(a, b, phi).powi(2) * (1.0 / w).ln().powf(2.0 * eps)
    })
    .expect("valid field")
}

fn run_contour(system: VortexSystem, n_phi: usize, dt: f64, steps: usize) -> Result<SimState> {
    let st = ContourStepper::new(n_phi);
    let mut s = SimState::new(system);
    for _ in 0..steps {
        s = st.step(&s, dt)?;
    }
    Ok(s)
}

fn kirchhoff() -> Result<Outcome> {
    let (a, b, m, t_end) = (1.5, 1.0, 1.0, 1.0);
    let p0 = PatchContour::ellipse(Point::ORIGIN, m, a, b, 0.0, 128)?;
    let exact = kirchhoff_rate(a, b, m);
    let phase_err = |dt: f64| -> Result<f64> {
        let steps = (t_end / dt).round() as usize;
        let run = run_patch(&p0, dt, steps)?;
        Ok(run.phase.last().copied().unwrap_or(0.0) - run.phase[0] - exact * t_end)
    };
    let run = run_patch(&p0, 1e-3, 1000)?;
    let rate = (run.phase[1000] - run.phase[0]) / t_end;
    let rel = (rate - 0.24).abs() / 0.24;
    let oracle = kirchhoff_state(a, b, m, t_end, 128)?;
    let shape = run
        .patch
        .rho
        .iter()
        .zip(&oracle.rho)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let ladder: Vec<f64> = [4e-3, 2e-3, 1e-3].iter().map(|&dt| phase_err(dt)).collect::<Result<_>>()?;
    // At these steps the RK4 phase error is already at roundoff, so the
    // ratio is also shown on a coarser ladder where truncation dominates.
    let coarse: Vec<f64> = [4e-2, 2e-2, 1e-2].iter().map(|&dt| phase_err(dt)).collect::<Result<_>>()?;
    let floor = 1e-11;
    let order_ok = |e: &[f64]| {
        e.windows(2).all(|p| p[0].abs() < floor || (p[0] / p[1]).abs() > 12.0)
    };
    let pass = rel < 0.01 && order_ok(&ladder) && order_ok(&coarse);
    outcome(
        pass,
        format!(
            "rate {rate:.12} (rel err {rel:.1e}), shape vs oracle {shape:.1e}; phase err dt=4,2,1e-3: {:.1e} {:.1e} {:.1e}; dt=4,2,1e-2: {:.1e} {:.1e} {:.1e} (ratios {:.1} {:.1})",
            ladder[0], ladder[1], ladder[2], coarse[0], coarse[1], coarse[2],
            coarse[0] / coarse[1], coarse[1] / coarse[2]
        ),
    )
}

fn steady_states() -> Result<Outcome> {
    let f = PolarContourField::from_fn(64, 1.0, 24, |_, w| 0.5 * (1.0 / w).ln())?;
    let z0 = f.zeta.clone();
    let reg = VortexRegion::new(Point::ORIGIN, 1.0, f)?;
    let s = run_contour(VortexSystem::monopole(reg), 64, 1e-2, 100)?;
    let zmax = z0.iter().cloned().fold(0.0, f64::max);
    let gauss = s.system.regions[0]
        .field
        .zeta
        .iter()
        .zip(&z0)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / zmax;
    let p0 = PatchContour::new(Point::ORIGIN, 1.0, vec![1.0; 128])?;
    let run = run_patch(&p0, 1e-3, 1000)?;
    let patch = run.patch.rho.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max);
    outcome(
        gauss < 1e-7 && patch < 1e-10,
        format!("Gaussian monopole rel drift {gauss:.1e}; circular patch drift {patch:.1e}"),
    )
}

fn conservation() -> Result<Outcome> {
    // Off-origin center so that the first moment has a reference size.
    let measure = |n_phi: usize, n_w: usize, dt: f64| -> Result<(f64, f64, f64)> {
        let field = scaled_ellipse(n_phi, n_w, 0.1, 1.5, 1.0);
        let reg = VortexRegion::new(Point::new(0.5, 0.25), 1.0, field)?;
        let q = QuadratureSpec::new(n_phi, SingularityMode::SplitLog);
        let opts = ReportOptions {
            area_levels: default_probe_levels(n_w),
            casimirs: Vec::new(),
            ..Default::default()
        };
        let sys = VortexSystem::monopole(reg);
        let r0 = report_system(&q, &sys, 0.0, &opts)?;
        let s = run_contour(sys, n_phi, dt, (0.5 / dt).round() as usize)?;
        let r1 = report_system(&q, &s.system, s.t, &opts)?;
        let dh = (r1.hamiltonian - r0.hamiltonian).abs() / r0.hamiltonian.abs();
        let dc = (r1.first_moment - r0.first_moment).norm() / r0.first_moment.norm();
        let da = r0
            .area_probes
            .iter()
            .zip(&r1.area_probes)
            .map(|(a, b)| (a.1 - b.1).abs() / a.1)
            .fold(0.0, f64::max);
        Ok((dh, dc, da))
    };
    let (dh, dc, da) = measure(128, 48, 1e-3)?;
    let ladder: Vec<(f64, f64, f64)> = [4e-3, 2e-3, 1e-3]
        .iter()
        .map(|&dt| measure(64, 16, dt))
        .collect::<Result<_>>()?;
    let floor = 1e-12;
    let shrinks = |f: &dyn Fn(&(f64, f64, f64)) -> f64| {
        ladder.windows(2).all(|p| f(&p[1]) < floor || f(&p[0]) / f(&p[1]) > 12.0)
    };
    let ok_ladder = shrinks(&|x| x.0) && shrinks(&|x| x.1) && shrinks(&|x| x.2);
    let pass = dh < 1e-6 && dc < 1e-6 && da < 1e-6 && ok_ladder;
    outcome(
        pass,
        format!(
            "128x48 dt=1e-3: dH {dh:.1e}, dc {dc:.1e}, dA {da:.1e}; ladder (64x16, dt=4,2,1e-3) dH {:.1e} {:.1e} {:.1e}, dc {:.1e} {:.1e} {:.1e}, dA {:.1e} {:.1e} {:.1e} (floor {floor:.0e})",
            ladder[0].0, ladder[1].0, ladder[2].0, ladder[0].1, ladder[1].1, ladder[2].1, ladder[0].2, ladder[1].2, ladder[2].2
        ),
    )
}

fn symmetry() -> Result<Outcome> {
    let field = scaled_ellipse(64, 16, 0.1, 1.5, 1.0);
    let reg = VortexRegion::new(Point::ORIGIN, 1.0, field)?;
    let s = run_contour(VortexSystem::monopole(reg), 64, 5e-3, 200)?;
    let r = &s.system.regions[0];
    let f = &r.field;
    let half = f.n_phi / 2;
    let mut asym = 0.0f64;
    for m in 0..half {
        for i in 0..f.n_w() {
            asym = asym.max((f.rho(m, i) - f.rho(m + half, i)).abs());
        }
    }
    let disp = r.center.norm();
    outcome(
        asym < 1e-8 && disp < 1e-8,
        format!("max |rho(phi+pi)-rho(phi)| {asym:.1e}; center displacement {disp:.1e}"),
    )
}

fn satellite() -> Result<Outcome> {
    let scn = SatelliteScenario {
        big_r: 1.0,
        k: 1.0,
        levels: vec![(-0.01, 0.25), (-0.02, 0.2), (-0.03, 0.15), (-0.04, 0.1), (-0.05, 0.05)],
        m: -0.06,
    };
    let t_end = 10.0 / scn.omega0();
    let run = run_satellite(&scn, t_end, 0.1, 4096)?;
    let mut worst = 0.0f64;
    for (t, cs) in run.times.iter().zip(&run.contours) {
        for c in cs {
            worst = worst.max(c.implicit_residual(&scn, *t));
        }
    }
    let first = &run.contours[0];
    let last = run.contours.last().expect("non-empty");
    // Late-time arc length per unit radius goes like 1/r², so the innermost
    // radial bin dominates and the inner/outer ratio grows from ~1.
    let mut grows = true;
    let mut shares = Vec::new();
    for (c0, c1) in first.iter().zip(last) {
        let (h0, h1) = (c0.radial_histogram(10), c1.radial_histogram(10));
        let peak = h1.iter().cloned().fold(0.0, f64::max);
        let (q0, q1) = (h0[0] / h0[9], h1[0] / h1[9]);
        grows &= q1 > q0 && h1[0] == peak;
        shares.push(format!("{q0:.2}->{q1:.2} (n={:.1})", c1.winding()));
    }
    outcome(
        worst < 1e-8 && grows,
        format!("max residual {worst:.1e}; inner/outer arc density: {}", shares.join(", ")),
    )
}

fn dipoles() -> Result<Outcome> {
    // Same-sign pair related by a half-turn: z1 + z2 is invariant.
    let shape = |phi: f64, w: f64| 0.5 * ellipse_radius(0.3, 0.2, phi - 0.4).powi(2) * (1.0 - w);
    let f = PolarContourField::from_fn(64, 1.0, 16, shape)?;
    let a = VortexRegion::new(Point::new(0.8, 0.1), 1.0, f.clone())?;
    let b = VortexRegion::new(Point::new(-0.8, -0.1), 1.0, f)?;
    let sys = VortexSystem::new(vec![a, b])?;
    let sum0 = sys.regions[0].center + sys.regions[1].center;
    let st = ContourStepper::new(64);
    let mut s = SimState::new(sys);
    let mut dsum = 0.0f64;
    for _ in 0..100 {
        s = step_dipole(&st, &s, 1e-2)?;
        let sum = s.system.regions[0].center + s.system.regions[1].center;
        dsum = dsum.max(sum.dist(sum0));
    }
    // Small cores: paraboloid profile, core radius / separation = 0.05.
    let (core, d, gamma) = (0.05, 1.0, 1.0);
    let m = 2.0 * gamma / (PI * core * core);
    let f = PolarContourField::from_fn(32, m, 8, |_, w| 0.5 * core * core * (1.0 - w / m))?;
    let p1 = Point::new(0.5 * d, 0.0);
    let p2 = Point::new(-0.5 * d, 0.0);
    let sys = VortexSystem::new(vec![
        VortexRegion::new(p1, m, f.clone())?,
        VortexRegion::new(p2, m, f)?,
    ])?;
    let g = sys.regions[0].circulation();
    let t_end = 1.0;
    let s = run_contour(sys, 32, 1e-3, 1000)?;
    let sep = s.system.regions[0].center - s.system.regions[1].center;
    let rate = sep.angle() / t_end;
    let pv = point_vortex_system(&[g, g], &[p1, p2], t_end, 1000)?;
    let pv_rate = (pv[0] - pv[1]).angle() / t_end;
    let rel = (rate - pv_rate).abs() / pv_rate.abs();
    outcome(
        dsum < 1e-8 && rel < 0.02,
        format!(
            "max |d(z1+z2)| {dsum:.1e}; pair rate {rate:.6} vs point vortices {pv_rate:.6} (rel {rel:.1e}, analytic {:.6})",
            g / (PI * d * d)
        ),
    )
}

fn perturbation() -> Result<Outcome> {
    let n = 64;
    let r_phi: Vec<f64> = (0..n).map(|m| ellipse_radius(1.5, 1.0, phi_node(m, n))).collect();
    let solve = |eps: f64| -> Result<(PerturbationState, PerturbationState)> {
        let st = PerturbationState::new(eps, 1.0, r_phi.clone(), PerturbationModel::Consistent)?;
        let out = perturbation_solve(&st, 1.0, 5e-3)?;
        Ok((st, out.last().expect("non-empty").clone()))
    };
    let (init, last) = solve(0.05)?;
    // t = 0 reconstruction against direct sampling of the scaled family.
    let reg = init.contour_field(96, Some(&init))?;
    let rec = VorticityReconstructor::new(&reg);
    let levels = &reg.field.levels;
    let (lo, hi) = (levels[0], levels[levels.len() - 1]);
    let mut rec_err = 0.0f64;
    for k in 0..97 {
        let phi = 2.0 * PI * k as f64 / 97.0;
        for j in 0..200 {
            let r = ellipse_radius(1.5, 1.0, phi) * (0.8 + 0.4 * j as f64 / 199.0);
            let exact = (-(r / ellipse_radius(1.5, 1.0, phi)).powf(20.0)).exp();
            if exact > lo && exact < hi {
                let v = rec.eval(Point::polar(r, phi)).value;
                rec_err = rec_err.max((v - exact).abs());
            }
        }
    }
    // Central symmetry of the final contours.
    let fin = last.contour_field(16, Some(&init))?;
    let half = n / 2;
    let mut asym = 0.0f64;
    for m in 0..half {
        for i in 0..16 {
            asym = asym.max((fin.field.at(m, i) - fin.field.at(m + half, i)).abs());
        }
    }
    // Distance to the ε = 0 patch at w = 0.3 scales like ε.
    let mut slopes = Vec::new();
    for &eps in &[0.01, 0.02, 0.05] {
        let (st, end) = solve(eps)?;
        let d = (0..n)
            .map(|m| (end.rho_sq_anchored(m, 0.3, &st) - end.rho0_sq[m]).abs())
            .fold(0.0, f64::max);
        slopes.push(d / eps);
    }
    let spread = slopes.iter().cloned().fold(0.0, f64::max) / slopes.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
    outcome(
        rec_err < 1e-4 && asym < 1e-8 && spread < 0.05,
        format!(
            "completed T=1; t=0 reconstruction err {rec_err:.1e}; symmetry {asym:.1e}; |rho^2-rho0^2|/eps at eps=0.01,0.02,0.05: {:.4} {:.4} {:.4} (spread {:.1}%)",
            slopes[0], slopes[1], slopes[2], 100.0 * spread
        ),
    )
}

fn cross_validation() -> Result<Outcome> {
    let delta = 0.2;
    let big_r = 1.0;
    let grid = GriddedVorticity::from_fn(20.0 * big_r, 512, |p| {
        let r2 = p.x * p.x + p.y * p.y;
        (-r2 / (big_r * big_r * (1.0 + delta * (2.0 * p.angle()).cos()))).exp()
    });
    let solver = SpectralSolver::for_grid(&grid)?;
    let mut st = SpectralState { grid, t: 0.0 };
    let field = PolarContourField::from_fn(64, 1.0, 16, |phi, w| {
        0.5 * big_r * big_r * (1.0 + delta * (2.0 * phi).cos()) * (1.0 / w).ln()
    })?;
    let sys = VortexSystem::monopole(VortexRegion::new(Point::ORIGIN, 1.0, field)?);
    let stepper = ContourStepper::new(64);
    let mut cs = SimState::new(sys);
    let levels = [0.1, 0.3, 0.5, 0.7, 0.9];
    let dx = st.grid.spacing();
    let mut worst = 0.0f64;
    for _ in 0..10 {
        st = solver.step(&st, 0.01)?;
        cs = stepper.step(&cs, 0.01)?;
        let d = compare_contours(ContourSource::Field(&cs.system.regions[0]), ContourSource::Grid(&st.grid), &levels)?;
        worst = worst.max(d.iter().map(|l| l.hausdorff).fold(0.0, f64::max));
    }
    outcome(
        worst < 2.0 * dx,
        format!("max Hausdorff over t in (0, 0.1] at 5 levels: {:.3} cells", worst / dx),
    )
}

fn kind_counts(grid: &GriddedVorticity) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for p in locate_critical_points(grid, CriticalOptions::default()) {
        *m.entry(format!("{:?}", p.kind)).or_insert(0) += 1;
    }
    m
}

fn topology() -> Result<Outcome> {
    let (n, l) = (256, 20.0);
    let grid = GriddedVorticity::from_fn(l, n, |p| {
        (-(p.dist(Point::new(0.0, 1.5))).powi(2)).exp() - (-(p.dist(Point::new(0.0, -1.5))).powi(2)).exp()
    });
    let solver = SpectralSolver::for_grid(&grid)?;
    let probes = [-0.6, -0.25, 0.1, 0.25, 0.6];
    let components = |g: &GriddedVorticity| -> Result<Vec<usize>> {
        probes.iter().map(|&w| count_level_components(g, w)).collect()
    };
    let kinds0 = kind_counts(&grid);
    let n0 = components(&grid)?;
    let (mut pmax, v_max0) = solver.refine_critical_point(&grid, Point::new(0.0, 1.5))?;
    let (mut pmin, v_min0) = solver.refine_critical_point(&grid, Point::new(0.0, -1.5))?;
    let mut st = SpectralState { grid, t: 0.0 };
    let (mut same, mut drift) = (true, 0.0f64);
    for k in 1..=80 {
        st = solver.step(&st, 0.05)?;
        if k % 5 == 0 {
            same &= kind_counts(&st.grid) == kinds0 && components(&st.grid)? == n0;
            let (a, va) = solver.refine_critical_point(&st.grid, pmax)?;
            let (b, vb) = solver.refine_critical_point(&st.grid, pmin)?;
            pmax = a;
            pmin = b;
            drift = drift.max(((va - v_max0) / v_max0).abs()).max(((vb - v_min0) / v_min0).abs());
        }
    }
    outcome(
        same && drift < 1e-4,
        format!(
            "T={:.1}: critical points {kinds0:?} and n(w)={n0:?} unchanged: {same}; peak drift {drift:.1e}; dipole moved to x={:.3}",
            st.t, pmax.x
        ),
    )
}

fn random_field(rng: &mut StdRng, n_phi: usize, n_w: usize) -> Result<PolarContourField> {
    let amp: Vec<(f64, f64)> = (1..=4)
        .map(|k| (rng.random_range(-0.15..0.15) / k as f64, rng.random_range(0.0..2.0 * PI)))
        .collect();
    let c = rng.random_range(0.0..0.2);
    let d = rng.random_range(0.0..2.0 * PI);
    let cubic = rng.random_range(0.0..0.3);
    PolarContourField::from_fn(n_phi, 1.0, n_w, move |phi, w| {
        let g: f64 = amp.iter().enumerate().map(|(k, (a, b))| a * ((k + 1) as f64 * phi + b).cos()).sum();
        let u = 1.0 - w;
        0.5 * g.exp() * u * (1.0 + c * u * (phi + d).cos() + cubic * u * u)
    })
}

fn two_routes() -> Result<Outcome> {
    let (n_phi, n_w) = (128, 48);
    let q = QuadratureSpec::new(n_phi, SingularityMode::SplitLog);
    let mut rng = StdRng::seed_from_u64(20240611);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let field = random_field(&mut rng, n_phi, n_w)?;
        let reg = VortexRegion::new(Point::ORIGIN, 1.0, field)?;
        let a = stream_route_rate(&q, &reg);
        let b = operator_n_rate(&reg.field, reg.peak)?;
        let scale = a.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        let err = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale;
        worst = worst.max(err);
    }
    outcome(worst < 1e-5, format!("max relative difference over 10 fields: {worst:.1e}"))
}

fn main() {
    let criteria: [(&str, Criterion); 10] = [
        ("Kirchhoff rotation", kirchhoff),
        ("steady states", steady_states),
        ("conservation suite", conservation),
        ("monopole symmetry", symmetry),
        ("satellite exactness", satellite),
        ("dipole properties", dipoles),
        ("perturbation pipeline", perturbation),
        ("cross-validation vs spectral", cross_validation),
        ("topology invariants", topology),
        ("two-route consistency", two_routes),
    ];
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let id = k + 1;
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let t0 = Instant::now();
        let (pass, detail) = match f() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} {id:>2} {name}: {detail} [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            t0.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
