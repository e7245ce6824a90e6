//! Reference solutions: the Kirchhoff ellipse, point vortices, a periodic
//! pseudo-spectral Euler solver, and contour comparison.

use crate::error::{Error, Result};
use crate::geometry::{zeta_at_level, GriddedVorticity, PatchContour, Point, VortexRegion};
use crate::spectral::TrigInterp;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

/// Kirchhoff ellipse with semi-axes `a ≥ b` after rigid rotation by
/// `M a b / (a + b)² · t`.
pub fn kirchhoff_state(a: f64, b: f64, m: f64, t: f64, n_phi: usize) -> Result<PatchContour> {
    if !(a >= b && b > 0.0) {
        return Err(Error::InvalidInput("Kirchhoff ellipse needs a ≥ b > 0".into()));
    }
    PatchContour::ellipse(Point::ORIGIN, m, a, b, kirchhoff_rate(a, b, m) * t, n_phi)
}

pub fn kirchhoff_rate(a: f64, b: f64, m: f64) -> f64 {
    m * a * b / ((a + b) * (a + b))
}

/// Point-vortex velocities for `ψ = Σ (Γ_j / 2π) ln |x − x_j|`.
fn point_vortex_rates(gammas: &[f64], pos: &[Point], min_dist: f64) -> Result<Vec<Point>> {
    let n = pos.len();
    let mut v = vec![Point::ORIGIN; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let d = pos[i] - pos[j];
            let r2 = d.x * d.x + d.y * d.y;
            if r2.sqrt() < min_dist {
                return Err(Error::CloseEncounter {
                    i: i.min(j),
                    j: i.max(j),
                    distance: r2.sqrt(),
                });
            }
            let c = gammas[j] / (2.0 * PI * r2);
            v[i] = v[i] + Point::new(-d.y * c, d.x * c);
        }
    }
    Ok(v)
}

/// Integrates point vortices to time `t` with `steps` RK4 steps. Halts when
/// two vortices come closer than `1e-9` times their initial minimum distance.
pub fn point_vortex_system(gammas: &[f64], positions: &[Point], t: f64, steps: usize) -> Result<Vec<Point>> {
    if gammas.len() != positions.len() || positions.is_empty() || steps == 0 {
        return Err(Error::InvalidInput("need matching non-empty circulations and positions".into()));
    }
    let mut d0 = f64::INFINITY;
    for i in 0..positions.len() {
        for j in 0..i {
            d0 = d0.min(positions[i].dist(positions[j]));
        }
    }
    if d0 == 0.0 {
        return Err(Error::InvalidInput("point vortex positions must be distinct".into()));
    }
    let min_dist = if d0.is_finite() { 1e-9 * d0 } else { 0.0 };
    let dt = t / steps as f64;
    let mut p = positions.to_vec();
    let ax = |p: &[Point], k: &[Point], c: f64| -> Vec<Point> { p.iter().zip(k).map(|(a, b)| *a + *b * c).collect() };
    for _ in 0..steps {
        let k1 = point_vortex_rates(gammas, &p, min_dist)?;
        let k2 = point_vortex_rates(gammas, &ax(&p, &k1, 0.5 * dt), min_dist)?;
        let k3 = point_vortex_rates(gammas, &ax(&p, &k2, 0.5 * dt), min_dist)?;
        let k4 = point_vortex_rates(gammas, &ax(&p, &k3, dt), min_dist)?;
        for i in 0..p.len() {
            p[i] = p[i] + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0);
        }
    }
    Ok(p)
}

// ---------------------------------------------------------------------------
// Pseudo-spectral Euler solver on a periodic box.

/// A gridded vorticity snapshot of the spectral solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    pub grid: GriddedVorticity,
    pub t: f64,
}

/// Workspace: FFT plans, wavenumbers and the 2/3-rule mask.
pub struct SpectralSolver {
    n: usize,
    length: f64,
    k: Vec<f64>,
    keep: Vec<bool>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralSolver")
            .field("n", &self.n)
            .field("length", &self.length)
            .finish()
    }
}

impl SpectralSolver {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 8 || n % 2 != 0 || !(length > 0.0) {
            return Err(Error::InvalidInput("spectral grid needs even n ≥ 8 and L > 0".into()));
        }
        let mut planner = FftPlanner::new();
        let k = (0..n)
            .map(|j| {
                let s = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
                2.0 * PI * s / length
            })
            .collect();
        let cut = n / 3;
        let keep = (0..n)
            .map(|j| {
                let s = if j <= n / 2 { j } else { n - j };
                s <= cut && j != n / 2
            })
            .collect();
        Ok(Self {
            n,
            length,
            k,
            keep,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        })
    }

    pub fn for_grid(grid: &GriddedVorticity) -> Result<Self> {
        Self::new(grid.n, grid.length)
    }

    fn fft2(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        let plan = if inverse { &self.inv } else { &self.fwd };
        plan.process(data);
        transpose(data, n);
        plan.process(data);
        transpose(data, n);
        if inverse {
            let s = 1.0 / (n * n) as f64;
            data.iter_mut().for_each(|v| *v *= s);
        }
    }

    fn spectrum(&self, omega: &[f64]) -> Vec<Complex64> {
        let mut w: Vec<Complex64> = omega.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft2(&mut w, false);
        w
    }

    /// `∂_t Ω = −(u Ω_x + v Ω_y)` with `∇²ψ = Ω`, `u = (−ψ_y, ψ_x)`; returns
    /// the dealiased tendency and the maximum speed.
    pub fn rhs(&self, omega: &[f64]) -> (Vec<f64>, f64) {
        let n = self.n;
        let w = self.spectrum(omega);
        let mut vel = vec![Complex64::new(0.0, 0.0); n * n];
        let mut grad = vec![Complex64::new(0.0, 0.0); n * n];
        let i1 = Complex64::new(0.0, 1.0);
        for jy in 0..n {
            for jx in 0..n {
                let idx = jy * n + jx;
                if !(self.keep[jx] && self.keep[jy]) {
                    continue;
                }
                let (kx, ky) = (self.k[jx], self.k[jy]);
                let k2 = kx * kx + ky * ky;
                let wk = w[idx];
                let psi = if k2 == 0.0 { Complex64::new(0.0, 0.0) } else { -wk / k2 };
                let u = -i1 * ky * psi;
                let v = i1 * kx * psi;
                vel[idx] = u + i1 * v;
                grad[idx] = i1 * kx * wk + i1 * (i1 * ky * wk);
            }
        }
        self.fft2(&mut vel, true);
        self.fft2(&mut grad, true);
        let mut vmax = 0.0f64;
        let mut nl: Vec<Complex64> = vel
            .iter()
            .zip(&grad)
            .map(|(uv, g)| {
                vmax = vmax.max(uv.norm());
                Complex64::new(-(uv.re * g.re + uv.im * g.im), 0.0)
            })
            .collect();
        self.fft2(&mut nl, false);
        for jy in 0..n {
            for jx in 0..n {
                if !(self.keep[jx] && self.keep[jy]) {
                    nl[jy * n + jx] = Complex64::new(0.0, 0.0);
                }
            }
        }
        self.fft2(&mut nl, true);
        (nl.iter().map(|v| v.re).collect(), vmax)
    }

    /// Kinetic energy `−½∫ψΩ` in the zero-mean gauge.
    pub fn energy(&self, omega: &[f64]) -> f64 {
        let n = self.n;
        let w = self.spectrum(omega);
        let mut s = 0.0;
        for jy in 0..n {
            for jx in 0..n {
                let k2 = self.k[jx] * self.k[jx] + self.k[jy] * self.k[jy];
                if k2 > 0.0 {
                    s += w[jy * n + jx].norm_sqr() / k2;
                }
            }
        }
        let da = (self.length / n as f64).powi(2);
        0.5 * s * da / (n * n) as f64
    }

    /// Stream function on the grid (zero-mean gauge).
    pub fn stream_function(&self, omega: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut w = self.spectrum(omega);
        for jy in 0..n {
            for jx in 0..n {
                let k2 = self.k[jx] * self.k[jx] + self.k[jy] * self.k[jy];
                let idx = jy * n + jx;
                w[idx] = if k2 == 0.0 { Complex64::new(0.0, 0.0) } else { -w[idx] / k2 };
            }
        }
        self.fft2(&mut w, true);
        w.iter().map(|v| v.re).collect()
    }

    /// Locates a critical point of the trigonometric interpolant by Newton
    /// iteration from `guess`; returns its position and value.
    pub fn refine_critical_point(&self, grid: &GriddedVorticity, guess: Point) -> Result<(Point, f64)> {
        let n = self.n;
        let w = self.spectrum(&grid.omega);
        let x0 = -0.5 * self.length;
        let i1 = Complex64::new(0.0, 1.0);
        let eval = |p: Point| -> [f64; 6] {
            let ex: Vec<Complex64> = self.k.iter().map(|&k| Complex64::from_polar(1.0, k * (p.x - x0))).collect();
            let ey: Vec<Complex64> = self.k.iter().map(|&k| Complex64::from_polar(1.0, k * (p.y - x0))).collect();
            let mut acc = [Complex64::new(0.0, 0.0); 6];
            for jy in 0..n {
                let ky = self.k[jy];
                let (mut r0, mut r1, mut r2) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
                for jx in 0..n {
                    let v = w[jy * n + jx] * ex[jx];
                    let kx = self.k[jx];
                    r0 += v;
                    r1 += v * kx;
                    r2 += v * (kx * kx);
                }
                let e = ey[jy];
                acc[0] += e * r0;
                acc[1] += e * r1 * i1;
                acc[2] += e * r0 * (i1 * ky);
                acc[3] += -e * r2;
                acc[4] += -e * r1 * ky;
                acc[5] += -e * r0 * (ky * ky);
            }
            let s = 1.0 / (n * n) as f64;
            acc.map(|c| c.re * s)
        };
        let mut p = guess;
        for _ in 0..30 {
            let [_, gx, gy, hxx, hxy, hyy] = eval(p);
            let det = hxx * hyy - hxy * hxy;
            if det == 0.0 {
                return Err(Error::NoConvergence { phi: 0.0, iterations: 0 });
            }
            let dx = -(hyy * gx - hxy * gy) / det;
            let dy = -(hxx * gy - hxy * gx) / det;
            p = Point::new(p.x + dx, p.y + dy);
            if dx.hypot(dy) < 1e-12 * self.length {
                return Ok((p, eval(p)[0]));
            }
        }
        Err(Error::NoConvergence { phi: 0.0, iterations: 30 })
    }

    /// One RK4 step; refuses steps with `max|u| dt / Δx > 0.5`.
    pub fn step(&self, state: &SpectralState, dt: f64) -> Result<SpectralState> {
        if state.grid.n != self.n || state.grid.length != self.length {
            return Err(Error::InvalidInput("state grid does not match the solver".into()));
        }
        let dx = self.length / self.n as f64;
        let w0 = &state.grid.omega;
        let (k1, vmax) = self.rhs(w0);
        let cfl = vmax * dt / dx;
        if cfl > 0.5 {
            return Err(Error::CflViolation { cfl });
        }
        let ax = |k: &[f64], c: f64| -> Vec<f64> { w0.iter().zip(k).map(|(a, b)| a + c * b).collect() };
        let (k2, _) = self.rhs(&ax(&k1, 0.5 * dt));
        let (k3, _) = self.rhs(&ax(&k2, 0.5 * dt));
        let (k4, _) = self.rhs(&ax(&k3, dt));
        let omega = (0..w0.len())
            .map(|j| w0[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]))
            .collect();
        Ok(SpectralState {
            grid: GriddedVorticity {
                length: self.length,
                n: self.n,
                omega,
            },
            t: state.t + dt,
        })
    }
}

fn transpose(a: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            a.swap(i * n + j, j * n + i);
        }
    }
}

/// One RK4 step of the spectral reference solver.
pub fn spectral_euler_step(solver: &SpectralSolver, state: &SpectralState, dt: f64) -> Result<SpectralState> {
    solver.step(state, dt)
}

/// Patch with its edge smoothed by a `tanh` ramp of width `3Δx`, sampled on
/// the periodic grid.
pub fn smoothed_patch_grid(patch: &PatchContour, length: f64, n: usize) -> GriddedVorticity {
    let rho = TrigInterp::new(&patch.rho);
    let width = 3.0 * length / n as f64;
    GriddedVorticity::from_fn(length, n, |p| {
        let d = p - patch.pole;
        let edge = rho.eval(d.angle());
        0.5 * patch.vorticity * (1.0 + ((edge - d.norm()) / width).tanh())
    })
}

/// Orientation `½ arg ∫ Ω (x + iy)²` of a gridded field about its centroid.
pub fn grid_orientation(grid: &GriddedVorticity) -> f64 {
    let (mut m0, mut mx) = (0.0, Complex64::new(0.0, 0.0));
    for j in 0..grid.n {
        for i in 0..grid.n {
            let p = grid.point(i, j);
            let w = grid.at(i, j);
            m0 += w;
            mx += w * Complex64::new(p.x, p.y);
        }
    }
    let c = mx / m0;
    let mut q = Complex64::new(0.0, 0.0);
    for j in 0..grid.n {
        for i in 0..grid.n {
            let p = grid.point(i, j);
            let z = Complex64::new(p.x, p.y) - c;
            q += grid.at(i, j) * z * z;
        }
    }
    0.5 * q.arg()
}

// ---------------------------------------------------------------------------
// Contour extraction and comparison.

/// A line segment of an extracted level curve.
pub type Segment = (Point, Point);

/// Marching-squares segments of `{Ω = w}` on the grid (non-periodic).
pub fn extract_level_segments(grid: &GriddedVorticity, w: f64) -> Vec<Segment> {
    let n = grid.n;
    let mut out = Vec::new();
    let lerp = |p: Point, q: Point, a: f64, b: f64| -> Point {
        let t = (w - a) / (b - a);
        p + (q - p) * t
    };
    for j in 0..n - 1 {
        for i in 0..n - 1 {
            let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let v: Vec<f64> = corners.iter().map(|&(a, b)| grid.at(a, b)).collect();
            let p: Vec<Point> = corners.iter().map(|&(a, b)| grid.point(a, b)).collect();
            let mut cross = Vec::with_capacity(4);
            for e in 0..4 {
                let (a, b) = (e, (e + 1) % 4);
                if (v[a] > w) != (v[b] > w) {
                    cross.push(lerp(p[a], p[b], v[a], v[b]));
                }
            }
            match cross.len() {
                2 => out.push((cross[0], cross[1])),
                4 => {
                    // Saddle cell: resolve with the cell-center average.
                    let center = 0.25 * (v[0] + v[1] + v[2] + v[3]);
                    if (center > w) == (v[0] > w) {
                        out.push((cross[0], cross[1]));
                        out.push((cross[2], cross[3]));
                    } else {
                        out.push((cross[0], cross[3]));
                        out.push((cross[1], cross[2]));
                    }
                }
                _ => {}
            }
        }
    }
    out
}

/// Closed polyline of the level-`w` contour of a contour-field region,
/// resampled to `samples` angles by trigonometric interpolation.
pub fn field_level_segments(region: &VortexRegion, w: f64, samples: usize) -> Result<Vec<Segment>> {
    let zeta = zeta_at_level(&region.field, w)?;
    let fine = TrigInterp::new(&zeta).resample(samples);
    let pts: Vec<Point> = fine
        .iter()
        .enumerate()
        .map(|(m, z)| region.center + Point::polar((2.0 * z.max(0.0)).sqrt(), 2.0 * PI * m as f64 / samples as f64))
        .collect();
    Ok((0..samples).map(|m| (pts[m], pts[(m + 1) % samples])).collect())
}

fn point_segment_distance(p: Point, s: &Segment) -> f64 {
    let d = s.1 - s.0;
    let l2 = d.x * d.x + d.y * d.y;
    let t = if l2 == 0.0 {
        0.0
    } else {
        (((p.x - s.0.x) * d.x + (p.y - s.0.y) * d.y) / l2).clamp(0.0, 1.0)
    };
    p.dist(s.0 + d * t)
}

fn directed(a: &[Segment], b: &[Segment]) -> f64 {
    let mut worst = 0.0f64;
    for s in a {
        for p in [s.0, s.1] {
            let d = b.iter().map(|t| point_segment_distance(p, t)).fold(f64::INFINITY, f64::min);
            worst = worst.max(d);
        }
    }
    worst
}

/// Symmetric Hausdorff distance between two segment sets, measured from
/// segment endpoints to the other set's segments.
pub fn hausdorff(a: &[Segment], b: &[Segment]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    directed(a, b).max(directed(b, a))
}

/// A field whose level curves can be compared.
#[derive(Debug, Clone, Copy)]
pub enum ContourSource<'a> {
    Field(&'a VortexRegion),
    Grid(&'a GriddedVorticity),
}

impl ContourSource<'_> {
    fn segments(&self, w: f64) -> Result<Vec<Segment>> {
        match self {
            ContourSource::Field(r) => field_level_segments(r, w, (4 * r.field.n_phi).max(256)),
            ContourSource::Grid(g) => {
                let max = g.omega.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                if w == 0.0 || w.abs() >= max {
                    return Err(Error::LevelOutOfRange(w));
                }
                Ok(extract_level_segments(g, w))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelDistance {
    pub w: f64,
    pub hausdorff: f64,
}

/// Hausdorff distance between the level curves of two fields at each level.
pub fn compare_contours(a: ContourSource<'_>, b: ContourSource<'_>, levels: &[f64]) -> Result<Vec<LevelDistance>> {
    levels
        .iter()
        .map(|&w| {
            Ok(LevelDistance {
                w,
                hausdorff: hausdorff(&a.segments(w)?, &b.segments(w)?),
            })
        })
        .collect()
}

/// Polyline CSV: one `x0,y0,x1,y1` row per segment.
pub fn segments_to_csv(segments: &[Segment]) -> String {
    let mut s = String::from("x0,y0,x1,y1\n");
    for (p, q) in segments {
        s.push_str(&format!("{:.17e},{:.17e},{:.17e},{:.17e}\n", p.x, p.y, q.x, q.y));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transpose_round_trip() {
        let n = 6;
        let mut a: Vec<Complex64> = (0..n * n).map(|k| Complex64::new(k as f64, 0.0)).collect();
        let b = a.clone();
        transpose(&mut a, n);
        assert_eq!(a[1].re, n as f64);
        transpose(&mut a, n);
        assert_eq!(a, b);
    }

    #[test]
    fn concentric_circles_are_delta_apart() {
        let seg = |r: f64| -> Vec<Segment> {
            (0..400)
                .map(|k| {
                    let a = 2.0 * PI * k as f64 / 400.0;
                    let b = 2.0 * PI * (k + 1) as f64 / 400.0;
                    (Point::polar(r, a), Point::polar(r, b))
                })
                .collect()
        };
        let d = hausdorff(&seg(1.0), &seg(1.1));
        assert!((d - 0.1).abs() < 1e-4);
    }
}
