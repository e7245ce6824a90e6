//! Time integration: contour-field monopoles and dipoles, uniform patches,
//! the passive satellite and the first-order perturbation pipeline.
//!
//! All steppers are fixed-step classical RK4.

use crate::error::{Error, Result};
use crate::geometry::{phi_node, zeta_at_level, PatchContour, Point, PolarContourField, VortexRegion, VortexSystem};
use crate::kernels::{
    center_gradient_unit, patch_boundary_velocity, patch_stream_nodes, self_stream_unit, KernelK, QuadratureSpec,
    RegionField, SingularityMode,
};
use crate::quadrature::level_grid;
use crate::spectral::{apply_circulant, diff_coeffs, TrigInterp};
use num_complex::Complex64;
use std::f64::consts::PI;

/// A snapshot of a contour-field simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub system: VortexSystem,
    pub steps: usize,
}

impl SimState {
    pub fn new(system: VortexSystem) -> Self {
        Self { t: 0.0, system, steps: 0 }
    }
}

/// Time derivatives of every region: `∂_t ζ` in node layout and the center
/// velocity.
#[derive(Debug, Clone)]
pub struct Rates {
    pub zeta: Vec<Vec<f64>>,
    pub center: Vec<Point>,
}

/// RK4 stepper for contour-field systems.
#[derive(Debug, Clone)]
pub struct ContourStepper {
    q: QuadratureSpec,
}

impl ContourStepper {
    pub fn new(n_phi: usize) -> Self {
        Self {
            q: QuadratureSpec::new(n_phi, SingularityMode::SplitLog),
        }
    }

    pub fn with_quadrature(q: QuadratureSpec) -> Self {
        Self { q }
    }

    pub fn quadrature(&self) -> &QuadratureSpec {
        &self.q
    }

    /// Right-hand side: `∂_t ζ = −∂_φ ψ̃` in each region's co-moving frame,
    /// `ψ̃ = Ψ − ρ (Ψ_x cos φ + Ψ_y sin φ)` with `∇Ψ` taken at the peak, which
    /// itself moves with `(−Ψ_y, Ψ_x)`.
    pub fn rates(&self, system: &VortexSystem) -> Result<Rates> {
        let fields: Vec<RegionField> = system.regions.iter().map(RegionField::new).collect();
        let mut zeta = Vec::with_capacity(system.len());
        let mut center = Vec::with_capacity(system.len());
        for (k, reg) in system.regions.iter().enumerate() {
            let f = &reg.field;
            let n_w = f.n_w();
            let s = reg.sign();
            let mut psi: Vec<f64> = self_stream_unit(&self.q, f).into_iter().map(|v| s * v).collect();
            let mut g = s * center_gradient_unit(f);
            for (l, other) in fields.iter().enumerate() {
                if l == k {
                    continue;
                }
                let d = other.region().center.dist(reg.center);
                if d < 1e-12 * system.scale() {
                    return Err(Error::SingularDistance { distance: d });
                }
                crate::kernels::add_cross_stream(reg, other, &mut psi);
                g += other.gradient_at(reg.center);
            }
            if g.re != 0.0 || g.im != 0.0 {
                for m in 0..f.n_phi {
                    let (sn, cs) = f.phi(m).sin_cos();
                    for i in 0..n_w {
                        psi[m * n_w + i] -= f.rho(m, i) * (g.re * cs + g.im * sn);
                    }
                }
            }
            zeta.push(level_derivative(&self.q, f.n_phi, n_w, &psi, -1.0));
            center.push(Point::new(-g.im, g.re));
        }
        Ok(Rates { zeta, center })
    }

    /// One RK4 step of length `dt`.
    pub fn step(&self, state: &SimState, dt: f64) -> Result<SimState> {
        let base = &state.system;
        let k1 = self.rates(base)?;
        let s2 = shifted(base, &k1, 0.5 * dt, state.t)?;
        let k2 = self.rates(&s2)?;
        let s3 = shifted(base, &k2, 0.5 * dt, state.t)?;
        let k3 = self.rates(&s3)?;
        let s4 = shifted(base, &k3, dt, state.t)?;
        let k4 = self.rates(&s4)?;
        let mut next = base.clone();
        let c = dt / 6.0;
        for (r, reg) in next.regions.iter_mut().enumerate() {
            for (j, z) in reg.field.zeta.iter_mut().enumerate() {
                *z += c * (k1.zeta[r][j] + 2.0 * k2.zeta[r][j] + 2.0 * k3.zeta[r][j] + k4.zeta[r][j]);
            }
            let v = (k1.center[r] + k2.center[r] * 2.0 + k3.center[r] * 2.0 + k4.center[r]) * c;
            reg.center = reg.center + v;
        }
        let t = state.t + dt;
        check_single_valued(&next, t)?;
        Ok(SimState {
            t,
            system: next,
            steps: state.steps + 1,
        })
    }
}

fn level_derivative(q: &QuadratureSpec, n_phi: usize, n_w: usize, v: &[f64], c: f64) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    let mut col = vec![0.0; n_phi];
    let mut d = vec![0.0; n_phi];
    for i in 0..n_w {
        for m in 0..n_phi {
            col[m] = v[m * n_w + i];
        }
        q.diff(&col, &mut d);
        for m in 0..n_phi {
            out[m * n_w + i] = c * d[m];
        }
    }
    out
}

fn shifted(base: &VortexSystem, k: &Rates, c: f64, t: f64) -> Result<VortexSystem> {
    let mut s = base.clone();
    for (r, reg) in s.regions.iter_mut().enumerate() {
        for (j, z) in reg.field.zeta.iter_mut().enumerate() {
            *z += c * k.zeta[r][j];
        }
        reg.center = reg.center + k.center[r] * c;
    }
    for reg in &s.regions {
        let f = &reg.field;
        if let Some(j) = f.zeta.iter().position(|&z| !(z > 0.0)) {
            return Err(Error::MultivaluedContour {
                t,
                phi_index: j / f.n_w(),
                level_index: j % f.n_w(),
                reason: "zeta became non-positive inside a stage".into(),
            });
        }
    }
    Ok(s)
}

/// Halts when a contour shrinks to the pole or two level curves cross.
pub fn check_single_valued(system: &VortexSystem, t: f64) -> Result<()> {
    let scale = system.scale();
    let zmin = 1e-8 * scale * scale;
    for reg in &system.regions {
        let f = &reg.field;
        let n_w = f.n_w();
        for m in 0..f.n_phi {
            for i in 0..n_w {
                let z = f.at(m, i);
                if !(z > zmin) {
                    return Err(Error::MultivaluedContour {
                        t,
                        phi_index: m,
                        level_index: i,
                        reason: format!("zeta = {z:e} fell below {zmin:e}"),
                    });
                }
                if i + 1 < n_w && f.at(m, i + 1) > z {
                    return Err(Error::MultivaluedContour {
                        t,
                        phi_index: m,
                        level_index: i,
                        reason: "level curves crossed (zeta no longer decreasing toward the peak)".into(),
                    });
                }
            }
        }
    }
    Ok(())
}

/// Advances a single-region system by one step.
pub fn step_monopole(stepper: &ContourStepper, state: &SimState, dt: f64) -> Result<SimState> {
    if state.system.len() != 1 {
        return Err(Error::InvalidInput(format!(
            "monopole step needs one region, got {}",
            state.system.len()
        )));
    }
    stepper.step(state, dt)
}

/// Advances a two-region system by one step. Cross terms use the other
/// region's stream function at the geometric node positions.
pub fn step_dipole(stepper: &ContourStepper, state: &SimState, dt: f64) -> Result<SimState> {
    if state.system.len() != 2 {
        return Err(Error::InvalidInput(format!(
            "dipole step needs two regions, got {}",
            state.system.len()
        )));
    }
    stepper.step(state, dt)
}

/// Receives snapshots from the drivers below.
pub trait Recorder {
    fn record(&mut self, state: &SimState) -> Result<()>;
}

impl Recorder for Vec<SimState> {
    fn record(&mut self, state: &SimState) -> Result<()> {
        self.push(state.clone());
        Ok(())
    }
}

/// Runs `steps` steps, recording the initial state, every `every`-th state
/// and the final one. On a halt the recorder keeps everything up to the last
/// accepted step.
pub fn run_recorded(
    stepper: &ContourStepper,
    initial: SimState,
    dt: f64,
    steps: usize,
    every: usize,
    recorder: &mut dyn Recorder,
) -> Result<SimState> {
    let every = every.max(1);
    let mut s = initial;
    recorder.record(&s)?;
    for k in 1..=steps {
        s = stepper.step(&s, dt)?;
        if k % every == 0 || k == steps {
            recorder.record(&s)?;
        }
    }
    Ok(s)
}

// ---------------------------------------------------------------------------
// Alignment angle between two regions.

/// Solves `(Δη + ρ_j(θ) sin θ) / (Δξ + ρ_j(θ) cos θ) = tan φ` for `θ`, with
/// `Δ = z_j − z_k` and `ρ_j` the level-`w` contour of region `j`: the point
/// of region `j`'s contour seen from the center of `k` in direction `φ`.
/// Starts from the geometric direction of region `k`'s own contour point.
pub fn solve_theta_kj(system: &VortexSystem, k: usize, j: usize, phi: f64, w: f64) -> Result<f64> {
    let (ak, aj) = region_pair(system, k, j)?;
    let zeta_k = zeta_at_level(&ak.field, w).unwrap_or_else(|_| ak.field.level_column(0));
    let rho_k = TrigInterp::new(&zeta_k);
    let zk = ak.center + Point::polar((2.0 * rho_k.eval(phi)).sqrt(), phi);
    let theta0 = (zk - aj.center).angle();
    let solver = AlignmentSolver::new(system, k, j, w)?;
    solver.solve(phi, theta0)
}

/// Solves the alignment equation along a sequence of angles, warm-starting
/// each node from the previous root.
pub fn solve_theta_branch(system: &VortexSystem, k: usize, j: usize, w: f64, phis: &[f64]) -> Result<Vec<f64>> {
    let solver = AlignmentSolver::new(system, k, j, w)?;
    let mut out: Vec<f64> = Vec::with_capacity(phis.len());
    for (n, &phi) in phis.iter().enumerate() {
        let guess = if n == 0 {
            solve_theta_kj(system, k, j, phi, w)?
        } else {
            out[n - 1] + (phi - phis[n - 1])
        };
        let th = solver.solve(phi, guess)?;
        if n > 0 {
            let jump = wrap(th - out[n - 1]);
            if jump.abs() > 0.5 * PI {
                return Err(Error::BranchJump { phi, jump });
            }
            out.push(out[n - 1] + jump);
        } else {
            out.push(th);
        }
    }
    Ok(out)
}

fn wrap(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

fn region_pair(system: &VortexSystem, k: usize, j: usize) -> Result<(&VortexRegion, &VortexRegion)> {
    if k == j || k >= system.len() || j >= system.len() {
        return Err(Error::InvalidInput(format!("invalid region pair ({k}, {j})")));
    }
    Ok((&system.regions[k], &system.regions[j]))
}

struct AlignmentSolver {
    delta: Point,
    rho: TrigInterp,
}

impl AlignmentSolver {
    fn new(system: &VortexSystem, k: usize, j: usize, w: f64) -> Result<Self> {
        let (ak, aj) = region_pair(system, k, j)?;
        let zeta = zeta_at_level(&aj.field, w)?;
        let rho: Vec<f64> = zeta.iter().map(|z| (2.0 * z).sqrt()).collect();
        Ok(Self {
            delta: aj.center - ak.center,
            rho: TrigInterp::new(&rho),
        })
    }

    /// Cross-product residual `F(θ) = (Δ + ρ e^{iθ}) × e^{iφ}` and `F'(θ)`.
    fn residual(&self, phi: f64, th: f64) -> (f64, f64) {
        let (r, dr) = self.rho.eval_with_derivative(th);
        let (sp, cp) = phi.sin_cos();
        let (st, ct) = th.sin_cos();
        let x = self.delta.x + r * ct;
        let y = self.delta.y + r * st;
        let dx = dr * ct - r * st;
        let dy = dr * st + r * ct;
        (y * cp - x * sp, dy * cp - dx * sp)
    }

    fn solve(&self, phi: f64, guess: f64) -> Result<f64> {
        const MAX_IT: usize = 100;
        // Bracket a root near the guess by stepping outward.
        let (f0, _) = self.residual(phi, guess);
        if f0 == 0.0 {
            return Ok(guess);
        }
        let mut bracket = None;
        let step = 2.0 * PI / 256.0;
        'outer: for k in 1..=128 {
            for &sgn in &[1.0, -1.0] {
                let a = guess + sgn * (k - 1) as f64 * step;
                let b = guess + sgn * k as f64 * step;
                let (fa, _) = self.residual(phi, a);
                let (fb, _) = self.residual(phi, b);
                if fa == 0.0 {
                    return Ok(a);
                }
                if fa * fb < 0.0 {
                    bracket = Some(if sgn > 0.0 { (a, b, fa) } else { (b, a, fb) });
                    break 'outer;
                }
            }
        }
        let (mut lo, mut hi, flo) = bracket.ok_or(Error::NoConvergence { phi, iterations: 0 })?;
        let pos_lo = flo > 0.0;
        let mut th = 0.5 * (lo + hi);
        for it in 0..MAX_IT {
            let (f, df) = self.residual(phi, th);
            if f.abs() < 1e-13 * (1.0 + self.delta.norm()) {
                return Ok(th);
            }
            if (f > 0.0) == pos_lo {
                lo = th;
            } else {
                hi = th;
            }
            let newton = th - f / df;
            th = if df != 0.0 && newton > lo.min(hi) && newton < lo.max(hi) {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (hi - lo).abs() < 1e-15 && it > 3 {
                return Ok(th);
            }
        }
        Err(Error::NoConvergence { phi, iterations: MAX_IT })
    }
}

/// Residual of the alignment equation in cross-product form.
pub fn theta_residual(system: &VortexSystem, k: usize, j: usize, phi: f64, w: f64, theta: f64) -> Result<f64> {
    Ok(AlignmentSolver::new(system, k, j, w)?.residual(phi, theta).0)
}

// ---------------------------------------------------------------------------
// Uniform patch.

/// `∂_t ζ = −∂_φ [ψ(φ, ρ(φ))]` for a patch with fixed pole; the derivative acts
/// on the composed on-contour values, so the chain-rule term is included.
pub fn patch_rate(patch: &PatchContour, diff: &[f64]) -> Vec<f64> {
    let psi = patch_stream_nodes(patch);
    let mut out = vec![0.0; psi.len()];
    apply_circulant(diff, &psi, &mut out);
    out.iter_mut().for_each(|v| *v = -*v);
    out
}

/// RK4 stepper for a uniform patch.
#[derive(Debug, Clone)]
pub struct PatchStepper {
    diff: Vec<f64>,
}

impl PatchStepper {
    pub fn new(n_phi: usize) -> Self {
        Self {
            diff: diff_coeffs(n_phi),
        }
    }

    pub fn rate(&self, patch: &PatchContour) -> Vec<f64> {
        patch_rate(patch, &self.diff)
    }

    pub fn step(&self, patch: &PatchContour, dt: f64, t: f64) -> Result<PatchContour> {
        let z0: Vec<f64> = patch.rho.iter().map(|r| 0.5 * r * r).collect();
        let stage = |z: &[f64]| -> Result<PatchContour> {
            let mut rho = Vec::with_capacity(z.len());
            for (m, &v) in z.iter().enumerate() {
                if !(v > 0.0) {
                    return Err(Error::MultivaluedContour {
                        t,
                        phi_index: m,
                        level_index: 0,
                        reason: "patch radius collapsed".into(),
                    });
                }
                rho.push((2.0 * v).sqrt());
            }
            Ok(PatchContour {
                pole: patch.pole,
                vorticity: patch.vorticity,
                rho,
            })
        };
        let axpy = |c: f64, k: &[f64]| -> Vec<f64> { z0.iter().zip(k).map(|(a, b)| a + c * b).collect() };
        let k1 = self.rate(patch);
        let k2 = self.rate(&stage(&axpy(0.5 * dt, &k1))?);
        let k3 = self.rate(&stage(&axpy(0.5 * dt, &k2))?);
        let k4 = self.rate(&stage(&axpy(dt, &k3))?);
        let c = dt / 6.0;
        let z: Vec<f64> = (0..z0.len())
            .map(|j| z0[j] + c * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]))
            .collect();
        stage(&z)
    }
}

/// One RK4 step of a uniform patch.
pub fn step_patch(patch: &PatchContour, dt: f64) -> Result<PatchContour> {
    PatchStepper::new(patch.rho.len()).step(patch, dt, 0.0)
}

/// Orientation of a near-elliptic contour: `½ arg ∫ ρ⁴ e^{2iφ} dφ`.
pub fn quadrupole_phase(rho: &[f64]) -> f64 {
    let n = rho.len();
    let mut s = Complex64::new(0.0, 0.0);
    for (m, r) in rho.iter().enumerate() {
        s += Complex64::from_polar(r.powi(4), 2.0 * phi_node(m, n));
    }
    0.5 * s.arg()
}

/// Continuous phase history: unwraps successive `quadrupole_phase` values
/// (period π).
#[derive(Debug, Clone, Default)]
pub struct PhaseTracker {
    last: Option<f64>,
    turns: f64,
}

impl PhaseTracker {
    pub fn update(&mut self, raw: f64) -> f64 {
        if let Some(prev) = self.last {
            let d = raw - prev;
            if d > 0.5 * PI {
                self.turns -= PI;
            } else if d < -0.5 * PI {
                self.turns += PI;
            }
        }
        self.last = Some(raw);
        raw + self.turns
    }
}

/// Result of a patch run: final contour and the unwrapped phase at every step.
#[derive(Debug, Clone)]
pub struct PatchRun {
    pub patch: PatchContour,
    pub times: Vec<f64>,
    pub phase: Vec<f64>,
    pub area: Vec<f64>,
}

/// Integrates a patch for `steps` steps, tracking its orientation and area.
pub fn run_patch(patch: &PatchContour, dt: f64, steps: usize) -> Result<PatchRun> {
    let st = PatchStepper::new(patch.rho.len());
    let mut p = patch.clone();
    let mut tr = PhaseTracker::default();
    let mut times = vec![0.0];
    let mut phase = vec![tr.update(quadrupole_phase(&p.rho))];
    let mut area = vec![p.area()];
    for k in 0..steps {
        let t = k as f64 * dt;
        p = st.step(&p, dt, t)?;
        times.push((k + 1) as f64 * dt);
        phase.push(tr.update(quadrupole_phase(&p.rho)));
        area.push(p.area());
    }
    Ok(PatchRun {
        patch: p,
        times,
        phase,
        area,
    })
}

// ---------------------------------------------------------------------------
// Passive satellite around a point vortex.

/// A weak satellite advected by the background stream function `k ln r`.
#[derive(Debug, Clone, PartialEq)]
pub struct SatelliteScenario {
    /// Distance of the satellite center from the point vortex (on the x-axis).
    pub big_r: f64,
    /// Point-vortex intensity `k` in `ψ₁ = k ln r`.
    pub k: f64,
    /// `(w, r₀(w))`: initial circle radius per level.
    pub levels: Vec<(f64, f64)>,
    /// Satellite minimum (negative).
    pub m: f64,
}

impl SatelliteScenario {
    /// Checks geometry; the returned flag is set when `|m|` exceeds a tenth of
    /// the background scale `k` (the passive-scalar reading then weakens).
    pub fn validate(&self) -> Result<bool> {
        if !(self.big_r > 0.0) || self.levels.is_empty() {
            return Err(Error::InvalidInput("satellite needs R > 0 and at least one level".into()));
        }
        for &(w, r0) in &self.levels {
            if !(r0 > 0.0 && r0 < self.big_r) {
                return Err(Error::InvalidInput(format!("r0({w}) = {r0} must lie in (0, R)")));
            }
        }
        Ok(self.m.abs() > 0.1 * self.k.abs())
    }

    /// Characteristic rotation rate `ω₀ = k / R²`.
    pub fn omega0(&self) -> f64 {
        self.k / (self.big_r * self.big_r)
    }

    /// `C(w) = r₀²(w) − R²`.
    pub fn c_of(&self, r0: f64) -> f64 {
        r0 * r0 - self.big_r * self.big_r
    }
}

/// One level curve at one time as material points in polar coordinates
/// about the point vortex.
#[derive(Debug, Clone)]
pub struct SatelliteContour {
    pub w: f64,
    pub r0: f64,
    pub r: Vec<f64>,
    pub theta: Vec<f64>,
}

impl SatelliteContour {
    pub fn points(&self) -> Vec<Point> {
        self.r.iter().zip(&self.theta).map(|(&r, &t)| Point::polar(r, t)).collect()
    }

    /// Max over points of `|r² − 2 r R cos(θ − k t / r²) − C(w)|`.
    pub fn implicit_residual(&self, scn: &SatelliteScenario, t: f64) -> f64 {
        let c = scn.c_of(self.r0);
        self.r
            .iter()
            .zip(&self.theta)
            .map(|(&r, &th)| (r * r - 2.0 * r * scn.big_r * (th - scn.k * t / (r * r)).cos() - c).abs())
            .fold(0.0, f64::max)
    }

    /// Arc-length-weighted share of the curve within `band` of `r_min`.
    pub fn inner_share(&self, band: f64) -> f64 {
        let pts = self.points();
        let rmin = self.r.iter().cloned().fold(f64::INFINITY, f64::min);
        let n = pts.len();
        let (mut inner, mut total) = (0.0, 0.0);
        for j in 0..n {
            let a = pts[j];
            let b = pts[(j + 1) % n];
            let ds = a.dist(b);
            let rm = 0.5 * (self.r[j] + self.r[(j + 1) % n]);
            total += ds;
            if rm - rmin <= band {
                inner += ds;
            }
        }
        inner / total
    }

    /// Arc-length fractions of the curve in `bins` equal radial bins spanning
    /// `[min r, max r]`, innermost first.
    pub fn radial_histogram(&self, bins: usize) -> Vec<f64> {
        let rmin = self.r.iter().cloned().fold(f64::INFINITY, f64::min);
        let rmax = self.r.iter().cloned().fold(0.0, f64::max);
        let width = (rmax - rmin) / bins as f64;
        let pts = self.points();
        let n = pts.len();
        let mut h = vec![0.0; bins];
        let mut total = 0.0;
        for j in 0..n {
            let ds = pts[j].dist(pts[(j + 1) % n]);
            let rm = 0.5 * (self.r[j] + self.r[(j + 1) % n]);
            let b = (((rm - rmin) / width) as usize).min(bins - 1);
            h[b] += ds;
            total += ds;
        }
        h.iter_mut().for_each(|v| *v /= total);
        h
    }

    /// Winding count: turns of the material angle between the innermost and
    /// outermost points of the curve.
    pub fn winding(&self) -> f64 {
        let (mut imin, mut imax) = (0, 0);
        for j in 0..self.r.len() {
            if self.r[j] < self.r[imin] {
                imin = j;
            }
            if self.r[j] > self.r[imax] {
                imax = j;
            }
        }
        (self.theta[imin] - self.theta[imax]).abs() / (2.0 * PI)
    }
}

/// Satellite trajectory: every level at every output time.
#[derive(Debug, Clone)]
pub struct SatelliteRun {
    pub times: Vec<f64>,
    pub contours: Vec<Vec<SatelliteContour>>,
}

/// Exact method-of-characteristics solution: `r` is constant along
/// characteristics and `θ(t) = θ(0) + k t / r²`. Output every `dt`.
pub fn run_satellite(scn: &SatelliteScenario, t_end: f64, dt: f64, samples: usize) -> Result<SatelliteRun> {
    scn.validate()?;
    if !(dt > 0.0 && t_end >= 0.0) {
        return Err(Error::InvalidInput("need dt > 0 and T ≥ 0".into()));
    }
    let init: Vec<(f64, f64, Vec<f64>, Vec<f64>)> = scn
        .levels
        .iter()
        .map(|&(w, r0)| {
            let mut r = Vec::with_capacity(samples);
            let mut th = Vec::with_capacity(samples);
            for j in 0..samples {
                let s = phi_node(j, samples);
                let p = Point::new(scn.big_r + r0 * s.cos(), r0 * s.sin());
                r.push(p.norm());
                th.push(p.angle());
            }
            (w, r0, r, th)
        })
        .collect();
    let n_out = (t_end / dt).round() as usize;
    let mut times = Vec::with_capacity(n_out + 1);
    let mut contours = Vec::with_capacity(n_out + 1);
    for k in 0..=n_out {
        let t = k as f64 * dt;
        times.push(t);
        contours.push(
            init.iter()
                .map(|(w, r0, r, th)| SatelliteContour {
                    w: *w,
                    r0: *r0,
                    r: r.clone(),
                    theta: r.iter().zip(th).map(|(&rr, &t0)| t0 + scn.k * t / (rr * rr)).collect(),
                })
                .collect(),
        );
    }
    Ok(SatelliteRun { times, contours })
}

// ---------------------------------------------------------------------------
// First-order perturbation of a patch.

/// Which first-order equation to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PerturbationModel {
    /// Linearization including advection by the base flow:
    /// `∂_t z = −∂_φ(g z) − (M/2) ∫K z`, `g = ψ_r/ρ₀` on the base contour, and
    /// the level-dependent part advected by `g`.
    #[default]
    Consistent,
    /// `∂_t z = −M ∫ K z` with the level-dependent part frozen.
    Literal,
}

/// Inputs and state of the first-order perturbation of the scaled family
/// `ρ_ε(φ, w) = R(φ) [S⁻¹(w/M)]^ε` with `S(x) = e^{−x}`.
#[derive(Debug, Clone)]
pub struct PerturbationState {
    pub eps: f64,
    pub m: f64,
    /// Base radius `R(φ)` at the angular nodes.
    pub r_phi: Vec<f64>,
    pub model: PerturbationModel,
    /// `f̄ = (1/M) ∫ f(w) dw`.
    pub fbar: f64,
    pub t: f64,
    pub rho0_sq: Vec<f64>,
    pub z: Vec<f64>,
    /// Amplitude of the level-dependent part: `ρ₁² = z + (f(w) − f̄) q`.
    pub q: Vec<f64>,
}

/// Euler–Mascheroni constant.
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `f(w) = ln S⁻¹(w/M) = ln ln(M/w)` for the exponential profile.
pub fn profile_f(w: f64, m: f64) -> f64 {
    (m / w).ln().ln()
}

impl PerturbationState {
    pub fn new(eps: f64, m: f64, r_phi: Vec<f64>, model: PerturbationModel) -> Result<Self> {
        if !(eps > 0.0 && eps <= 0.5) {
            return Err(Error::InvalidInput(format!("epsilon must lie in (0, 0.5], got {eps}")));
        }
        if !(m > 0.0) {
            return Err(Error::InvalidInput("peak M must be positive".into()));
        }
        let n = r_phi.len();
        if n < 4 || n % 2 != 0 || r_phi.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::InvalidInput("R(phi) needs an even number of positive samples".into()));
        }
        let scale = r_phi.iter().cloned().fold(0.0, f64::max);
        let mismatch = (0..n / 2)
            .map(|j| (r_phi[j] - r_phi[j + n / 2]).abs())
            .fold(0.0, f64::max);
        if mismatch > 1e-12 * scale {
            return Err(Error::AsymmetricBase { mismatch });
        }
        // (1/M) ∫₀^M ln ln(M/w) dw = ∫₀^1 ln(−ln y) dy = −γ.
        let fbar = -EULER_GAMMA;
        let r2: Vec<f64> = r_phi.iter().map(|r| r * r).collect();
        Ok(Self {
            eps,
            m,
            model,
            fbar,
            t: 0.0,
            rho0_sq: r2.clone(),
            z: r2.iter().map(|v| 2.0 * fbar * v).collect(),
            q: r2.iter().map(|v| 2.0 * v).collect(),
            r_phi,
        })
    }

    pub fn n_phi(&self) -> usize {
        self.r_phi.len()
    }

    fn base_patch(&self, rho0_sq: &[f64]) -> Result<PatchContour> {
        PatchContour::new(Point::ORIGIN, self.m, rho0_sq.iter().map(|v| v.max(0.0).sqrt()).collect())
    }

    /// First-order `ρ²(φ_m, w) = ρ₀² + ε (z + (f(w) − f̄) q)`.
    pub fn rho_sq(&self, m: usize, w: f64) -> f64 {
        let f = profile_f(w, self.m);
        self.rho0_sq[m] + self.eps * (self.z[m] + (f - self.fbar) * self.q[m])
    }

    /// Form exact at `t = 0`: the scaled initial contours plus the first-order
    /// increments accumulated since then.
    pub fn rho_sq_anchored(&self, m: usize, w: f64, initial: &PerturbationState) -> f64 {
        let f = profile_f(w, self.m);
        let r2 = self.r_phi[m] * self.r_phi[m];
        let init = r2 * (self.m / w).ln().powf(2.0 * self.eps);
        let dz = self.z[m] - initial.z[m];
        let dq = self.q[m] - initial.q[m];
        init + (self.rho0_sq[m] - r2) + self.eps * (dz + (f - self.fbar) * dq)
    }

    /// Contour field on the Gauss–Legendre levels of `(0, M)`.
    pub fn contour_field(&self, n_w: usize, initial: Option<&PerturbationState>) -> Result<VortexRegion> {
        let (levels, _) = level_grid(self.m, n_w);
        let n = self.n_phi();
        let mut zeta = Vec::with_capacity(n * n_w);
        for m in 0..n {
            for &w in &levels {
                let r2 = match initial {
                    Some(i) => self.rho_sq_anchored(m, w, i),
                    None => self.rho_sq(m, w),
                };
                zeta.push(0.5 * r2);
            }
        }
        let field = PolarContourField::gauss(n, self.m, n_w, zeta)?;
        VortexRegion::new(Point::ORIGIN, self.m, field)
    }

    /// Closed-form first-order vorticity
    /// `M S(exp{(r² − ρ₀² − ε(z(t) − z(0))) / (2ε R²(φ))})` at a node angle.
    pub fn omega_closed_form(&self, m: usize, r: f64, initial: &PerturbationState) -> f64 {
        let r2 = self.r_phi[m] * self.r_phi[m];
        let arg = (r * r - self.rho0_sq[m] - self.eps * (self.z[m] - initial.z[m])) / (2.0 * self.eps * r2);
        self.m * (-(arg.exp())).exp()
    }
}

struct PerturbationRates {
    rho0: Vec<f64>,
    z: Vec<f64>,
    q: Vec<f64>,
}

fn perturbation_rates(
    st: &PerturbationState,
    rho0_sq: &[f64],
    z: &[f64],
    q: &[f64],
    diff: &[f64],
) -> Result<PerturbationRates> {
    let patch = st.base_patch(rho0_sq)?;
    let n = rho0_sq.len();
    let d_rho0: Vec<f64> = patch_rate(&patch, diff).iter().map(|v| 2.0 * v).collect();
    let kz = KernelK::new(&patch.rho).apply(z);
    let mut dz = vec![0.0; n];
    let mut dq = vec![0.0; n];
    match st.model {
        PerturbationModel::Literal => {
            for j in 0..n {
                dz[j] = -st.m * kz[j];
            }
        }
        PerturbationModel::Consistent => {
            let vel = patch_boundary_velocity(&patch);
            let g: Vec<f64> = (0..n)
                .map(|j| {
                    let (sn, cs) = phi_node(j, n).sin_cos();
                    (-vel[j].x * sn + vel[j].y * cs) / patch.rho[j]
                })
                .collect();
            let gz: Vec<f64> = g.iter().zip(z).map(|(a, b)| a * b).collect();
            let gq: Vec<f64> = g.iter().zip(q).map(|(a, b)| a * b).collect();
            apply_circulant(diff, &gz, &mut dz);
            apply_circulant(diff, &gq, &mut dq);
            for j in 0..n {
                dz[j] = -dz[j] - 0.5 * st.m * kz[j];
                dq[j] = -dq[j];
            }
        }
    }
    Ok(PerturbationRates {
        rho0: d_rho0,
        z: dz,
        q: dq,
    })
}

/// One RK4 step of the base patch and the first-order aggregates; the kernel
/// is rebuilt at every stage from the current base contour.
pub fn perturbation_step(st: &PerturbationState, dt: f64) -> Result<PerturbationState> {
    let diff = diff_coeffs(st.n_phi());
    let ax = |a: &[f64], b: &[f64], c: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + c * y).collect() };
    let k1 = perturbation_rates(st, &st.rho0_sq, &st.z, &st.q, &diff)?;
    let k2 = perturbation_rates(
        st,
        &ax(&st.rho0_sq, &k1.rho0, 0.5 * dt),
        &ax(&st.z, &k1.z, 0.5 * dt),
        &ax(&st.q, &k1.q, 0.5 * dt),
        &diff,
    )?;
    let k3 = perturbation_rates(
        st,
        &ax(&st.rho0_sq, &k2.rho0, 0.5 * dt),
        &ax(&st.z, &k2.z, 0.5 * dt),
        &ax(&st.q, &k2.q, 0.5 * dt),
        &diff,
    )?;
    let k4 = perturbation_rates(
        st,
        &ax(&st.rho0_sq, &k3.rho0, dt),
        &ax(&st.z, &k3.z, dt),
        &ax(&st.q, &k3.q, dt),
        &diff,
    )?;
    let comb = |y: &[f64], a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> Vec<f64> {
        (0..y.len())
            .map(|j| y[j] + dt / 6.0 * (a[j] + 2.0 * b[j] + 2.0 * c[j] + d[j]))
            .collect()
    };
    let mut next = st.clone();
    next.rho0_sq = comb(&st.rho0_sq, &k1.rho0, &k2.rho0, &k3.rho0, &k4.rho0);
    next.z = comb(&st.z, &k1.z, &k2.z, &k3.z, &k4.z);
    next.q = comb(&st.q, &k1.q, &k2.q, &k3.q, &k4.q);
    next.t = st.t + dt;
    if let Some(j) = next.rho0_sq.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::MultivaluedContour {
            t: next.t,
            phi_index: j,
            level_index: 0,
            reason: "base patch radius collapsed".into(),
        });
    }
    Ok(next)
}

/// Integrates the perturbation pipeline to `t_end`, returning every state.
pub fn perturbation_solve(initial: &PerturbationState, t_end: f64, dt: f64) -> Result<Vec<PerturbationState>> {
    if !(dt > 0.0 && dt <= t_end) {
        return Err(Error::InvalidInput("need 0 < dt ≤ T".into()));
    }
    let steps = (t_end / dt).round() as usize;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(initial.clone());
    for _ in 0..steps {
        let next = perturbation_step(out.last().expect("non-empty"), dt)?;
        out.push(next);
    }
    Ok(out)
}
