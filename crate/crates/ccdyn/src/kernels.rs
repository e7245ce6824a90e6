//! Integral evaluations with the logarithmic kernel: stream functions of
//! contour fields and patches, the energy, the closed monopole operator and
//! the linearized perturbation kernel.
//!
//! Conventions: `ψ = (1/2π) ∫ Ω(y) ln|x − y| dy`, velocity `u = (−ψ_y, ψ_x)`,
//! energy `H = −½ ∫ ψ Ω`.

use crate::error::{Error, Result};
use crate::fastmath::{padded, sum_rays, wedge_p_axis, RayBlock};
use crate::geometry::{phi_node, PatchContour, Point, PolarContourField, VortexRegion, VortexSystem};
use crate::interp::{Barycentric, Pchip};
use crate::quadrature::{gauss_legendre, kress_log_weights};
use crate::spectral::{apply_circulant, derivative, diff_coeffs, hilbert, PeriodicTable, TrigInterp};
use num_complex::Complex64;
use std::f64::consts::PI;

/// `ζ(3) / (2π²)`, the coefficient of the `h³` self-layer term.
const C3: f64 = 0.060_896_695_012_366_3;

/// Treatment of the log singularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SingularityMode {
    /// Singular part integrated analytically (Kress weights on closed curves,
    /// kink and `h³` corrections on the layer staircase).
    #[default]
    SplitLog,
    /// Plain trapezoid with the coincident node dropped (or left uncorrected
    /// where the integrand stays finite).
    ExcludedNode,
}

/// Angular and level rules shared by the kernels.
#[derive(Debug, Clone)]
pub struct QuadratureSpec {
    pub n_phi: usize,
    pub h: f64,
    pub mode: SingularityMode,
    /// Worker threads for the target loop; results do not depend on it.
    pub threads: usize,
    cos: Vec<f64>,
    sin_abs: Vec<f64>,
    diff: Vec<f64>,
}

impl QuadratureSpec {
    pub fn new(n_phi: usize, mode: SingularityMode) -> Self {
        let h = 2.0 * PI / n_phi as f64;
        let mut cos = Vec::with_capacity(n_phi);
        let mut sin_abs = Vec::with_capacity(n_phi);
        for k in 0..n_phi {
            let (s, c) = (k as f64 * h).sin_cos();
            cos.push(c);
            sin_abs.push(s.abs());
        }
        // Exact zeros on the axis and the opposite ray.
        sin_abs[0] = 0.0;
        if n_phi % 2 == 0 {
            sin_abs[n_phi / 2] = 0.0;
            cos[n_phi / 2] = -1.0;
        }
        Self {
            n_phi,
            h,
            mode,
            threads: 1,
            cos,
            sin_abs,
            diff: diff_coeffs(n_phi),
        }
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads.max(1);
        self
    }

    /// Spectral derivative with offset-ordered summation.
    pub fn diff(&self, f: &[f64], out: &mut [f64]) {
        apply_circulant(&self.diff, f, out);
    }

    /// Angle weights (all `h`) sum to 2π.
    pub fn phi_weights(&self) -> Vec<f64> {
        vec![self.h; self.n_phi]
    }
}

/// Layer radii laid out for the vectorized wedge sum: `b[n * stride + j]`.
struct Layers {
    stride: usize,
    b: Vec<f64>,
    w: Vec<f64>,
}

impl Layers {
    fn new(f: &PolarContourField) -> Self {
        let n_w = f.n_w();
        let stride = padded(n_w);
        let mut b = vec![0.0; f.n_phi * stride];
        for n in 0..f.n_phi {
            for j in 0..n_w {
                b[n * stride + j] = f.rho(n, j);
            }
        }
        let mut w = vec![0.0; stride];
        w[..n_w].copy_from_slice(&f.weights);
        Self { stride, b, w }
    }

    fn block(&self) -> RayBlock<'_> {
        RayBlock {
            b: &self.b,
            w: &self.w,
            stride: self.stride,
        }
    }
}

fn centrally_symmetric(f: &PolarContourField) -> bool {
    let half = f.n_phi / 2 * f.n_w();
    f.zeta[..half] == f.zeta[half..]
}

/// Self-induced stream function at every node of a region, for unit sign
/// (multiply by the region sign). Layout `[m * n_w + i]`.
///
/// The vorticity is the Gauss–Legendre staircase `Σ W_j χ_j`; each layer's
/// potential is integrated exactly along rays and by the trapezoid rule in
/// angle, with the kink of the ray integral at the target and the `h³`
/// self-layer term added in a form that derives from a symmetric energy.
pub fn self_stream_unit(q: &QuadratureSpec, f: &PolarContourField) -> Vec<f64> {
    let n = f.n_phi;
    let n_w = f.n_w();
    assert_eq!(n, q.n_phi, "quadrature built for a different angular grid");
    let layers = Layers::new(f);
    let symmetric = n % 2 == 0 && centrally_symmetric(f);
    let m_count = if symmetric { n / 2 } else { n };
    let mut out = vec![0.0; n * n_w];

    let work = |m: usize, dst: &mut [f64]| {
        let ray: Vec<usize> = (1..n).map(|k| (m + k) % n).collect();
        for i in 0..n_w {
            dst[i] = target_stream(q, f, &layers, &ray, m, i);
        }
    };
    let threads = q.threads.min(m_count).max(1);
    if threads == 1 {
        for m in 0..m_count {
            work(m, &mut out[m * n_w..(m + 1) * n_w]);
        }
    } else {
        let chunk = m_count.div_ceil(threads);
        std::thread::scope(|s| {
            for (t, dst) in out[..m_count * n_w].chunks_mut(chunk * n_w).enumerate() {
                let work = &work;
                s.spawn(move || {
                    for (k, row) in dst.chunks_mut(n_w).enumerate() {
                        work(t * chunk + k, row);
                    }
                });
            }
        });
    }
    if symmetric {
        let (a, b) = out.split_at_mut(n / 2 * n_w);
        b.copy_from_slice(a);
    }
    if q.mode == SingularityMode::SplitLog {
        add_self_layer_term(q, f, &mut out);
    }
    out
}

fn target_stream(q: &QuadratureSpec, f: &PolarContourField, layers: &Layers, ray: &[usize], m: usize, i: usize) -> f64 {
    let n_w = f.n_w();
    let a = f.rho(m, i);
    let trap = sum_rays(a, &q.cos[1..], &q.sin_abs[1..], ray, layers.block());
    let p0 = wedge_p_axis(0.0, a);
    let mut axis = 0.0;
    for j in 0..n_w {
        axis += f.weights[j] * (wedge_p_axis(layers.b[m * layers.stride + j], a) - p0);
    }
    let mut psi = q.h / (4.0 * PI) * (trap + axis);
    if q.mode == SingularityMode::SplitLog {
        let zi = f.at(m, i);
        let mut k = 0.0;
        for j in 0..n_w {
            let zj = f.at(m, j);
            if zj > zi {
                k += f.weights[j];
            } else if zj == zi {
                k += 0.5 * f.weights[j];
            }
        }
        psi += q.h * q.h / 12.0 * a * a * k;
    }
    psi
}

/// Gradient of `E₃ = Σ λ (ρ⁴ − ρ²ρ′²)/4` per layer, converted to a stream
/// function correction.
fn add_self_layer_term(q: &QuadratureSpec, f: &PolarContourField, out: &mut [f64]) {
    let n = f.n_phi;
    let n_w = f.n_w();
    let mut rho = vec![0.0; n];
    let mut drho = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut dg = vec![0.0; n];
    for i in 0..n_w {
        for m in 0..n {
            rho[m] = f.rho(m, i);
        }
        q.diff(&rho, &mut drho);
        for m in 0..n {
            g[m] = 0.5 * rho[m] * rho[m] * drho[m];
        }
        q.diff(&g, &mut dg);
        let coef = f.weights[i] * C3 * q.h.powi(3) / (2.0 * PI);
        for m in 0..n {
            let r = rho[m];
            out[m * n_w + i] -= coef * (r * r * r - 0.5 * r * drho[m] * drho[m] + dg[m]) / r;
        }
    }
}

/// `ψ_x + iψ_y` of a region at its own center, for unit sign. Opposite rays
/// are paired so a centrally symmetric field gives exactly zero.
pub fn center_gradient_unit(f: &PolarContourField) -> Complex64 {
    let n = f.n_phi;
    let h = 2.0 * PI / n as f64;
    let mut s = Complex64::new(0.0, 0.0);
    for i in 0..f.n_w() {
        let mut acc = Complex64::new(0.0, 0.0);
        for m in 0..n / 2 {
            let (sn, cs) = phi_node(m, n).sin_cos();
            let d = f.rho(m, i) - f.rho(m + n / 2, i);
            acc += Complex64::new(d * cs, d * sn);
        }
        s += acc * f.weights[i];
    }
    -s * (h / (2.0 * PI))
}

/// Evaluator for the field of one region at arbitrary points.
pub struct RegionField<'a> {
    region: &'a VortexRegion,
    layers: Layers,
    tables: Vec<PeriodicTable>,
    h: f64,
}

impl<'a> RegionField<'a> {
    pub fn new(region: &'a VortexRegion) -> Self {
        let f = &region.field;
        Self {
            region,
            layers: Layers::new(f),
            tables: (0..f.n_w()).map(|i| PeriodicTable::new(&f.level_column(i), 8)).collect(),
            h: 2.0 * PI / f.n_phi as f64,
        }
    }

    pub fn region(&self) -> &VortexRegion {
        self.region
    }

    /// Stream function of this region at `p`.
    pub fn stream_at(&self, p: Point) -> f64 {
        let f = &self.region.field;
        let n = f.n_phi;
        let n_w = f.n_w();
        let d = p - self.region.center;
        let a = d.norm();
        let s = self.region.sign();
        if a == 0.0 {
            let mut acc = 0.0;
            for m in 0..n {
                for j in 0..n_w {
                    let b = f.rho(m, j);
                    acc += f.weights[j] * (0.5 * b * b * b.ln() - 0.25 * b * b);
                }
            }
            return s * self.h / (2.0 * PI) * acc;
        }
        let phi = d.angle().rem_euclid(2.0 * PI);
        let u = phi / self.h;
        let k0 = u.floor();
        let tau = u - k0;
        let k0 = (k0 as usize) % n;
        let mut kink = 0.0;
        let psi = if tau == 0.0 {
            let ray: Vec<usize> = (1..n).map(|k| (k0 + k) % n).collect();
            let q = QuadratureSpec::new(n, SingularityMode::SplitLog);
            let trap = sum_rays(a, &q.cos[1..], &q.sin_abs[1..], &ray, self.layers.block());
            let p0 = wedge_p_axis(0.0, a);
            let mut axis = 0.0;
            for j in 0..n_w {
                let b = f.rho(k0, j);
                axis += f.weights[j] * (wedge_p_axis(b, a) - p0);
                kink += f.weights[j] * step(b, a);
            }
            kink *= self.h * self.h / 12.0 * a * a;
            self.h / (4.0 * PI) * (trap + axis)
        } else {
            let mut cos = Vec::with_capacity(n);
            let mut sin = Vec::with_capacity(n);
            for m in 0..n {
                let (sn, cs) = (phi_node(m, n) - phi).sin_cos();
                cos.push(cs);
                sin.push(sn.abs());
            }
            let ray: Vec<usize> = (0..n).collect();
            let trap = sum_rays(a, &cos, &sin, &ray, self.layers.block());
            let b2 = tau * tau - tau + 1.0 / 6.0;
            let zx = 0.5 * a * a;
            for (j, t) in self.tables.iter().enumerate() {
                let zj = t.eval(phi);
                kink += f.weights[j] * step(zj, zx);
            }
            kink *= 0.5 * self.h * self.h * b2 * a * a;
            self.h / (4.0 * PI) * trap
        };
        s * (psi + kink)
    }

    /// `ψ_x + iψ_y` of this region at `p`; at its own center the paired
    /// formula is used.
    pub fn gradient_at(&self, p: Point) -> Complex64 {
        let f = &self.region.field;
        let s = self.region.sign();
        let d = p - self.region.center;
        if d.norm() == 0.0 {
            return s * center_gradient_unit(f);
        }
        let x = Complex64::new(d.x, d.y);
        let n = f.n_phi;
        let mut acc = Complex64::new(0.0, 0.0);
        for m in 0..n {
            let e = Complex64::from_polar(1.0, -phi_node(m, n));
            let c = x * e;
            let mut ray = Complex64::new(0.0, 0.0);
            for j in 0..f.n_w() {
                ray += f.weights[j] * ray_cauchy(f.rho(m, j), c);
            }
            acc += e * ray;
        }
        // ψ_x − iψ_y = (1/2π) ∫ Ω / (X − Y); return its conjugate.
        (s * self.h / (2.0 * PI) * acc).conj()
    }

    /// Velocity `(−ψ_y, ψ_x)` at `p`.
    pub fn velocity_at(&self, p: Point) -> Point {
        let g = self.gradient_at(p);
        Point::new(-g.im, g.re)
    }
}

fn step(b: f64, a: f64) -> f64 {
    if b > a {
        1.0
    } else if b == a {
        0.5
    } else {
        0.0
    }
}

/// `∫₀^ρ r / (c − r) dr = −ρ − c ln(1 − ρ/c)`, with the principal value on
/// the cut and a series where the two terms cancel.
fn ray_cauchy(rho: f64, c: Complex64) -> Complex64 {
    let x = rho / c;
    if x.norm() < 0.1 {
        let mut term = x;
        let mut s = Complex64::new(0.0, 0.0);
        for k in 1..40 {
            let add = term / (k as f64 + 1.0);
            s += add;
            if add.norm() < 1e-18 * s.norm() {
                break;
            }
            term *= x;
        }
        return rho * s;
    }
    let q = Complex64::new(1.0, 0.0) - x;
    let l = if q.im == 0.0 && q.re < 0.0 {
        Complex64::new((-q.re).ln(), 0.0)
    } else {
        q.ln()
    };
    -rho - c * l
}

/// Total stream function at every node of every region, including cross
/// contributions evaluated at the geometric node positions.
pub fn stream_nodes(q: &QuadratureSpec, system: &VortexSystem) -> Result<Vec<Vec<f64>>> {
    check_separation(system)?;
    let fields: Vec<RegionField> = system.regions.iter().map(RegionField::new).collect();
    let mut out = Vec::with_capacity(system.len());
    for (k, reg) in system.regions.iter().enumerate() {
        let s = reg.sign();
        let mut psi: Vec<f64> = self_stream_unit(q, &reg.field).into_iter().map(|v| s * v).collect();
        for (l, other) in fields.iter().enumerate() {
            if l == k {
                continue;
            }
            add_cross_stream(reg, other, &mut psi);
        }
        out.push(psi);
    }
    Ok(out)
}

/// Adds the stream function of `other` at every node position of `reg`.
pub fn add_cross_stream(reg: &VortexRegion, other: &RegionField<'_>, psi: &mut [f64]) {
    let f = &reg.field;
    let n_w = f.n_w();
    for m in 0..f.n_phi {
        let (sn, cs) = f.phi(m).sin_cos();
        for i in 0..n_w {
            let r = f.rho(m, i);
            psi[m * n_w + i] += other.stream_at(reg.center + Point::new(r * cs, r * sn));
        }
    }
}

fn check_separation(system: &VortexSystem) -> Result<()> {
    let scale = system.scale().max(f64::MIN_POSITIVE);
    for i in 0..system.len() {
        for j in 0..i {
            let d = system.regions[i].center.dist(system.regions[j].center);
            if d < 1e-12 * scale {
                return Err(Error::SingularDistance { distance: d });
            }
        }
    }
    Ok(())
}

/// Stream function at the level-`w` contour point of region `j` at angle
/// `theta`. Nodes use the nodal quadrature; other points are evaluated
/// directly at the interpolated contour position.
pub fn stream_polar(system: &VortexSystem, j: usize, theta: f64, w: f64) -> Result<f64> {
    check_separation(system)?;
    let reg = system
        .regions
        .get(j)
        .ok_or_else(|| Error::InvalidInput(format!("region index {j} out of range")))?;
    let f = &reg.field;
    let n = f.n_phi;
    let h = 2.0 * PI / n as f64;
    let t = theta.rem_euclid(2.0 * PI);
    let on_node = (t / h).fract() == 0.0;
    let level = f.levels.iter().position(|&l| l == w);
    if let (true, Some(i)) = (on_node, level) {
        let m = ((t / h) as usize) % n;
        let q = QuadratureSpec::new(n, SingularityMode::SplitLog);
        let psi = stream_nodes(&q, system)?;
        return Ok(psi[j][m * f.n_w() + i]);
    }
    let zeta = crate::geometry::zeta_at_level(f, w)?;
    let z = TrigInterp::new(&zeta).eval(t);
    let p = reg.center + Point::polar((2.0 * z).sqrt(), t);
    Ok(stream_at_point(system, p))
}

/// Total stream function at an arbitrary point.
pub fn stream_at_point(system: &VortexSystem, p: Point) -> f64 {
    system.regions.iter().map(|r| RegionField::new(r).stream_at(p)).sum()
}

/// Discrete circulation `Σ W_i h Σ_m ζ_im` (unsigned).
pub fn layer_circulation(f: &PolarContourField) -> f64 {
    let h = 2.0 * PI / f.n_phi as f64;
    let mut s = 0.0;
    for (i, &w) in f.weights.iter().enumerate() {
        let mut col = 0.0;
        for m in 0..f.n_phi {
            col += f.at(m, i);
        }
        s += w * h * col;
    }
    s
}

/// Self energy of one region from its nodal self stream function (unit sign)
/// using the scaling identity `H = ½ ζ·∂H/∂ζ + Γ²/16π`.
pub fn self_energy(f: &PolarContourField, psi_unit: &[f64]) -> f64 {
    let h = 2.0 * PI / f.n_phi as f64;
    let n_w = f.n_w();
    let mut s = 0.0;
    for m in 0..f.n_phi {
        for i in 0..n_w {
            s += f.weights[i] * f.at(m, i) * psi_unit[m * n_w + i];
        }
    }
    let g = layer_circulation(f);
    -0.5 * h * s + g * g / (16.0 * PI)
}

/// Energy of the whole system: self terms from the staircase quadrature,
/// interaction terms from a double contour integral per layer pair.
pub fn hamiltonian(q: &QuadratureSpec, system: &VortexSystem) -> Result<f64> {
    check_separation(system)?;
    let mut h = 0.0;
    for r in &system.regions {
        let psi = self_stream_unit(q, &r.field);
        h += self_energy(&r.field, &psi);
    }
    for k in 0..system.len() {
        for l in 0..k {
            h += interaction_energy(&system.regions[k], &system.regions[l]);
        }
    }
    Ok(h)
}

struct LayerCurve {
    x: Vec<f64>,
    y: Vec<f64>,
    nx: Vec<f64>,
    ny: Vec<f64>,
}

fn layer_curves(reg: &VortexRegion) -> Vec<LayerCurve> {
    let f = &reg.field;
    let n = f.n_phi;
    (0..f.n_w())
        .map(|i| {
            let rho: Vec<f64> = (0..n).map(|m| f.rho(m, i)).collect();
            let dr = derivative(&rho);
            let mut c = LayerCurve {
                x: Vec::with_capacity(n),
                y: Vec::with_capacity(n),
                nx: Vec::with_capacity(n),
                ny: Vec::with_capacity(n),
            };
            for m in 0..n {
                let (sn, cs) = f.phi(m).sin_cos();
                c.x.push(reg.center.x + rho[m] * cs);
                c.y.push(reg.center.y + rho[m] * sn);
                // Tangent (ρ' + iρ) e^{iφ}; outward normal times ds is (t_y, −t_x).
                let tx = dr[m] * cs - rho[m] * sn;
                let ty = dr[m] * sn + rho[m] * cs;
                c.nx.push(ty);
                c.ny.push(-tx);
            }
            c
        })
        .collect()
}

/// `∬_{A×B} ln|x − y|` for two star-shaped regions, as
/// `−∮∮ n_xᵀ Hess L(x − y) n_y` with `ΔΔL = ln r`.
fn area_log_integral(a: &LayerCurve, b: &LayerCurve, h: f64) -> f64 {
    let mut s = 0.0;
    for m in 0..a.x.len() {
        let mut row = 0.0;
        for n in 0..b.x.len() {
            let dx = a.x[m] - b.x[n];
            let dy = a.y[m] - b.y[n];
            let r2 = dx * dx + dy * dy;
            if r2 == 0.0 {
                continue;
            }
            let lnr = 0.5 * r2.ln();
            let nn = a.nx[m] * b.nx[n] + a.ny[m] * b.ny[n];
            let nd = (a.nx[m] * dx + a.ny[m] * dy) * (b.nx[n] * dx + b.ny[n] * dy);
            row += (r2 * lnr / 16.0 - 5.0 * r2 / 64.0) * nn + (lnr / 8.0 - 3.0 / 32.0) * nd;
        }
        s += row;
    }
    -s * h * h
}

/// Interaction energy `−(1/2π) ∬ Ω_k Ω_l ln|x − y|` of two regions.
pub fn interaction_energy(a: &VortexRegion, b: &VortexRegion) -> f64 {
    let ca = layer_curves(a);
    let cb = layer_curves(b);
    let ha = 2.0 * PI / a.field.n_phi as f64;
    let hb = 2.0 * PI / b.field.n_phi as f64;
    let h = (ha * hb).sqrt();
    let mut s = 0.0;
    for (i, ci) in ca.iter().enumerate() {
        for (j, cj) in cb.iter().enumerate() {
            s += a.field.weights[i] * b.field.weights[j] * area_log_integral(ci, cj, h);
        }
    }
    -a.sign() * b.sign() * s / (2.0 * PI)
}

/// Velocity of the peak of region `k`: `(−Ψ_y, Ψ_x)` of the total field at
/// its center.
pub fn peak_velocity(system: &VortexSystem, k: usize) -> Result<Point> {
    let g = total_center_gradient(system, k)?;
    Ok(Point::new(-g.im, g.re))
}

/// `Ψ_x + iΨ_y` of the total field at the center of region `k`.
pub fn total_center_gradient(system: &VortexSystem, k: usize) -> Result<Complex64> {
    check_separation(system)?;
    let reg = system
        .regions
        .get(k)
        .ok_or_else(|| Error::InvalidInput(format!("region index {k} out of range")))?;
    let mut g = reg.sign() * center_gradient_unit(&reg.field);
    for (l, other) in system.regions.iter().enumerate() {
        if l != k {
            g += RegionField::new(other).gradient_at(reg.center);
        }
    }
    Ok(g)
}

// ---------------------------------------------------------------------------
// Closed monopole operator evaluated as a direct area integral.

/// The closed operator `N(ρ²) = (1/4π) ∬ [u (ρ²)_u ln D − 4 ρ ρ' cos(φ − θ)] du dθ`
/// at every node, `D` the squared distance. Equals `−2ψ̃` where `ψ̃` is the
/// stream function in the frame of the peak, so `∂_t ζ = ½ ∂_φ N`.
///
/// Each ray's level profile is the polynomial through the Gauss nodes,
/// extended to the edge `u = 0`; the radial integral is done in closed form on
/// a piecewise-cubic Hermite model of `Ω(r) r`, and the angular trapezoid rule
/// is corrected for the `|α|` and `|α|³` terms at the target. Assumes compact
/// support (the polynomial edge must lie outside the lowest level).
pub fn operator_n(field: &PolarContourField, peak: f64) -> Result<Vec<f64>> {
    field.validate()?;
    let n = field.n_phi;
    let n_w = field.n_w();
    let h = 2.0 * PI / n as f64;
    let s = peak.signum();
    let big_m = peak.abs();
    let rays: Vec<RayProfile> = (0..n).map(|m| RayProfile::new(field, m, big_m)).collect();
    let mut out = vec![0.0; n * n_w];

    // Second term: ρ(φ, w) ∬ ρ(θ, u) cos(φ − θ) du dθ.
    let mut mom = Complex64::new(0.0, 0.0);
    for m in 0..n {
        let e = Complex64::from_polar(1.0, phi_node(m, n));
        let mut col = 0.0;
        for i in 0..n_w {
            col += field.weights[i] * field.rho(m, i);
        }
        mom += e * col * h;
    }
    for m in 0..n {
        let phi = phi_node(m, n);
        for i in 0..n_w {
            let a = field.rho(m, i);
            let mut trap = 0.0;
            for (k, ray) in rays.iter().enumerate() {
                let alpha = phi_node(k, n) - phi;
                trap += ray.log_integral(a, alpha);
            }
            let (g, g1, g2) = rays[m].g_derivs(i);
            let c1 = PI * a * g;
            let c3 = PI * (-a * g / 6.0 - a * a * g1 / 2.0 - a * a * a * g2 / 6.0);
            let integral = h * trap + c1 * h * h / 6.0 - c3 * h.powi(4) / 60.0;
            let psi = s * integral / (2.0 * PI);
            let frame = s * a * (mom * Complex64::from_polar(1.0, -phi)).re / (2.0 * PI);
            out[m * n_w + i] = -2.0 * (psi + frame);
        }
    }
    Ok(out)
}

/// Radial profile of the vorticity along one ray, as Hermite data of
/// `g(r) = |Ω| r` on the level radii.
struct RayProfile {
    /// Breakpoints ascending from the center to the edge.
    r: Vec<f64>,
    g: Vec<f64>,
    dg: Vec<f64>,
    /// Per level (in field order): `(g, g', g'')` at the level radius.
    level_derivs: Vec<(f64, f64, f64)>,
}

impl RayProfile {
    fn new(f: &PolarContourField, m: usize, big_m: f64) -> Self {
        let n_w = f.n_w();
        let (x, lam) = gauss_legendre(n_w);
        let bary = Barycentric::gauss(&x, &lam);
        let zeta: Vec<f64> = (0..n_w).map(|i| f.at(m, i)).collect();
        // d/du = (2/M) d/dx.
        let sc = 2.0 / big_m;
        let dz: Vec<f64> = bary.differentiate(&zeta).into_iter().map(|v| v * sc).collect();
        let ddz: Vec<f64> = bary.differentiate(&dz).into_iter().map(|v| v * sc).collect();
        let levels: Vec<f64> = f.levels.iter().map(|l| l.abs()).collect();

        let mut level_derivs = Vec::with_capacity(n_w);
        let mut pts: Vec<(f64, f64, f64)> = Vec::with_capacity(n_w + 2);
        pts.push((0.0, 0.0, big_m));
        for i in (0..n_w).rev() {
            let r = (2.0 * zeta[i]).sqrt();
            let om = levels[i];
            let om1 = r / dz[i];
            let om2 = 1.0 / dz[i] - r * r * ddz[i] / dz[i].powi(3);
            let g = om * r;
            let g1 = om1 * r + om;
            let g2 = om2 * r + 2.0 * om1;
            pts.push((r, g, g1));
            level_derivs.push((g, g1, g2));
        }
        level_derivs.reverse();
        // Edge at u = 0 from the level polynomial, or a linear fall-off when
        // the extension is not monotone.
        let z_edge = bary.eval(&zeta, -1.0);
        let r1 = (2.0 * zeta[0]).sqrt();
        let dz_edge = bary.eval(&dz, -1.0);
        let (r_edge, dg_edge) = if z_edge > zeta[0] && dz_edge < 0.0 {
            let re = (2.0 * z_edge).sqrt();
            (re, re * re / dz_edge)
        } else {
            let slope = r1 / dz[0];
            let re = r1 + levels[0] / -slope;
            (re, slope * re)
        };
        pts.push((r_edge, 0.0, dg_edge));
        Self {
            r: pts.iter().map(|p| p.0).collect(),
            g: pts.iter().map(|p| p.1).collect(),
            dg: pts.iter().map(|p| p.2).collect(),
            level_derivs,
        }
    }

    fn g_derivs(&self, i: usize) -> (f64, f64, f64) {
        self.level_derivs[i]
    }

    /// `½ ∫ g(r) ln(r² − 2 r a cos α + a²) dr` over the ray.
    fn log_integral(&self, a: f64, alpha: f64) -> f64 {
        let (sn, cs) = alpha.sin_cos();
        let p = a * cs;
        let qv = (a * sn).abs();
        let mut total = 0.0;
        for k in 0..self.r.len() - 1 {
            let (r0, r1) = (self.r[k], self.r[k + 1]);
            let hh = r1 - r0;
            if hh <= 0.0 {
                continue;
            }
            let (y0, y1, d0, d1) = (self.g[k], self.g[k + 1], self.dg[k], self.dg[k + 1]);
            let del = (y1 - y0) / hh;
            let c2 = (3.0 * del - 2.0 * d0 - d1) / hh;
            let c3 = (d0 + d1 - 2.0 * del) / (hh * hh);
            // Re-expand y0 + d0 σ + c2 σ² + c3 σ³ in t = r − p, σ = t + e.
            let e = p - r0;
            let b0 = y0 + d0 * e + c2 * e * e + c3 * e * e * e;
            let b1 = d0 + 2.0 * c2 * e + 3.0 * c3 * e * e;
            let b2 = c2 + 3.0 * c3 * e;
            let b3 = c3;
            let (t0, t1) = (r0 - p, r1 - p);
            let m0 = log_moments(t1, qv);
            let m1 = log_moments(t0, qv);
            total += b0 * (m0[0] - m1[0]) + b1 * (m0[1] - m1[1]) + b2 * (m0[2] - m1[2]) + b3 * (m0[3] - m1[3]);
        }
        0.5 * total
    }
}

/// Antiderivatives of `t^k ln(t² + q²)` for `k = 0..3`.
fn log_moments(t: f64, q: f64) -> [f64; 4] {
    let qq = t * t + q * q;
    let l = if qq > 0.0 { qq.ln() } else { 0.0 };
    let at = if q > 0.0 { q * t.atan2(q) } else { 0.0 };
    let t2 = t * t;
    let q2 = q * q;
    [
        t * l - 2.0 * t + 2.0 * at,
        0.5 * (qq * l - t2),
        t2 * t / 3.0 * l - 2.0 / 3.0 * (t2 * t / 3.0 - q2 * t + q2 * at),
        0.25 * (t2 * t2 - q2 * q2) * l - t2 * t2 / 8.0 + q2 * t2 / 4.0,
    ]
}

/// `∂_t ζ` from the closed operator: `½ ∂_φ N` on every level.
pub fn operator_n_rate(field: &PolarContourField, peak: f64) -> Result<Vec<f64>> {
    let nv = operator_n(field, peak)?;
    Ok(angular_derivative(field.n_phi, field.n_w(), &nv, 0.5))
}

/// `c · ∂_φ` applied level by level to a node array.
pub fn angular_derivative(n_phi: usize, n_w: usize, v: &[f64], c: f64) -> Vec<f64> {
    let coeffs = diff_coeffs(n_phi);
    let mut out = vec![0.0; v.len()];
    let mut col = vec![0.0; n_phi];
    let mut d = vec![0.0; n_phi];
    for i in 0..n_w {
        for m in 0..n_phi {
            col[m] = v[m * n_w + i];
        }
        apply_circulant(&coeffs, &col, &mut d);
        for m in 0..n_phi {
            out[m * n_w + i] = c * d[m];
        }
    }
    out
}

/// `∂_t ζ = −∂_φ ψ̃` from the stream-function route, `ψ̃` being the monopole
/// stream function minus the linear field of the peak gradient.
pub fn stream_route_rate(q: &QuadratureSpec, region: &VortexRegion) -> Vec<f64> {
    let f = &region.field;
    let s = region.sign();
    let n_w = f.n_w();
    let mut psi: Vec<f64> = self_stream_unit(q, f).into_iter().map(|v| s * v).collect();
    let g = s * center_gradient_unit(f);
    for m in 0..f.n_phi {
        let (sn, cs) = f.phi(m).sin_cos();
        for i in 0..n_w {
            psi[m * n_w + i] -= f.rho(m, i) * (g.re * cs + g.im * sn);
        }
    }
    angular_derivative(f.n_phi, n_w, &psi, -1.0)
}

// ---------------------------------------------------------------------------
// Uniform patches.

fn patch_geometry(patch: &PatchContour) -> (Vec<f64>, f64) {
    (derivative(&patch.rho), 2.0 * PI / patch.rho.len() as f64)
}

/// Stream function of a uniform patch at polar point `(φ, r)` about the pole:
/// `ψ = (M/8π) ∮ [ρ² − r (ρ sin(θ − φ))_θ] ln D dθ − M A / 4π`.
/// Points on the contour use the Kress log-split product rule.
pub fn patch_stream(patch: &PatchContour, phi: f64, r: f64, mode: SingularityMode) -> f64 {
    let (dr, h) = patch_geometry(patch);
    let n = patch.rho.len();
    let rho_at = TrigInterp::new(&patch.rho).eval(phi);
    let on_contour = (r - rho_at).abs() <= 1e-12 * rho_at;
    let mut s = 0.0;
    if on_contour && mode == SingularityMode::SplitLog {
        let r = rho_at;
        let (_, drho_at) = TrigInterp::new(&patch.rho).eval_with_derivative(phi);
        let wts = kress_weights_at(n, phi);
        for j in 0..n {
            let th = phi_node(j, n);
            let (sn, cs) = (th - phi).sin_cos();
            let fj = patch.rho[j] * patch.rho[j] - r * (dr[j] * sn + patch.rho[j] * cs);
            let d = r * r + patch.rho[j] * patch.rho[j] - 2.0 * r * patch.rho[j] * cs;
            let four_sin2 = 2.0 - 2.0 * cs;
            let smooth = if four_sin2 < 1e-28 {
                (rho_at * rho_at + drho_at * drho_at).ln()
            } else {
                (d / four_sin2).ln()
            };
            s += fj * (wts[j] + h * smooth);
        }
    } else {
        for j in 0..n {
            let th = phi_node(j, n);
            let (sn, cs) = (th - phi).sin_cos();
            let d = r * r + patch.rho[j] * patch.rho[j] - 2.0 * r * patch.rho[j] * cs;
            if d <= 0.0 {
                continue;
            }
            let fj = patch.rho[j] * patch.rho[j] - r * (dr[j] * sn + patch.rho[j] * cs);
            s += h * fj * d.ln();
        }
    }
    patch.vorticity / (8.0 * PI) * s - patch.vorticity * patch.area() / (4.0 * PI)
}

/// Kress weights for the target angle `t` on an `n`-node grid.
fn kress_weights_at(n_nodes: usize, t: f64) -> Vec<f64> {
    let h = 2.0 * PI / n_nodes as f64;
    let k = t / h;
    if k.fract() == 0.0 {
        let i = (k as usize) % n_nodes;
        let base = kress_log_weights(n_nodes);
        return (0..n_nodes).map(|j| base[(j + n_nodes - i) % n_nodes]).collect();
    }
    let nn = n_nodes / 2;
    let nf = nn as f64;
    (0..n_nodes)
        .map(|j| {
            let d = t - phi_node(j, n_nodes);
            let mut s = 0.0;
            for m in 1..nn {
                s += (m as f64 * d).cos() / m as f64;
            }
            -2.0 * PI / nf * s - PI / (nf * nf) * (nf * d).cos()
        })
        .collect()
}

/// Stream function on the contour at every node (Kress split).
pub fn patch_stream_nodes(patch: &PatchContour) -> Vec<f64> {
    let n = patch.rho.len();
    let (dr, h) = patch_geometry(patch);
    let wts = kress_log_weights(n);
    let rho = &patch.rho;
    let mut out = vec![0.0; n];
    for m in 0..n {
        let r = rho[m];
        let mut s = 0.0;
        for k in 0..n {
            let j = (m + k) % n;
            let (sn, cs) = if k == 0 {
                (0.0, 1.0)
            } else {
                (k as f64 * h).sin_cos()
            };
            let fj = rho[j] * rho[j] - r * (dr[j] * sn + rho[j] * cs);
            let smooth = if k == 0 {
                (r * r + dr[m] * dr[m]).ln()
            } else {
                let d = r * r + rho[j] * rho[j] - 2.0 * r * rho[j] * cs;
                (d / (2.0 - 2.0 * cs)).ln()
            };
            s += fj * (wts[k] + h * smooth);
        }
        out[m] = s;
    }
    let c = patch.vorticity * patch.area() / (4.0 * PI);
    out.iter().map(|v| patch.vorticity / (8.0 * PI) * v - c).collect()
}

/// Velocity on the contour at every node from the Cauchy–Pompeiu form
/// `u − iv = (M/4π) ∮ conj(Y − X)/(Y − X) dY`, whose integrand is smooth.
pub fn patch_boundary_velocity(patch: &PatchContour) -> Vec<Point> {
    let n = patch.rho.len();
    let (dr, h) = patch_geometry(patch);
    let pts: Vec<Complex64> = (0..n)
        .map(|j| Complex64::from_polar(patch.rho[j], phi_node(j, n)))
        .collect();
    let tang: Vec<Complex64> = (0..n)
        .map(|j| Complex64::new(dr[j], patch.rho[j]) * Complex64::from_polar(1.0, phi_node(j, n)))
        .collect();
    (0..n)
        .map(|m| {
            let mut s = Complex64::new(0.0, 0.0);
            for j in 0..n {
                let v = if j == m {
                    tang[m].conj()
                } else {
                    let d = pts[j] - pts[m];
                    d.conj() / d * tang[j]
                };
                s += v;
            }
            let c = patch.vorticity / (4.0 * PI) * h * s;
            Point::new(c.re, -c.im)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Linearized perturbation kernel.

/// `K(φ, θ) = (1/2π) ∂_φ ln(ρ₀²(φ) + ρ₀²(θ) − 2ρ₀(φ)ρ₀(θ) cos(θ − φ))` by
/// analytic differentiation of the trigonometric interpolant of `ρ₀`. At
/// `φ = θ` the regular part (the kernel minus `(1/2π) cot((φ−θ)/2)`) is
/// returned.
pub fn kernel_k(rho0: &[f64], phi: f64, theta: f64) -> f64 {
    let ti = TrigInterp::new(rho0);
    let (a, da) = ti.eval_with_derivative(phi);
    let (b, _) = ti.eval_with_derivative(theta);
    let diff = (phi - theta).rem_euclid(2.0 * PI);
    if diff == 0.0 {
        let dd = second_derivative(&ti, phi);
        return kernel_diag(a, da, dd);
    }
    let (sn, cs) = (theta - phi).sin_cos();
    let d = a * a + b * b - 2.0 * a * b * cs;
    let dd = 2.0 * a * da - 2.0 * da * b * cs - 2.0 * a * b * sn;
    dd / d / (2.0 * PI)
}

fn second_derivative(ti: &TrigInterp, x: f64) -> f64 {
    let e = 1e-4;
    let (_, d1) = ti.eval_with_derivative(x + e);
    let (_, d0) = ti.eval_with_derivative(x - e);
    (d1 - d0) / (2.0 * e)
}

/// `(1/2π) Re(γ''/γ')` with `γ' = (ρ' + iρ) e^{iφ}`, `γ'' = (ρ'' + 2iρ' − ρ) e^{iφ}`.
fn kernel_diag(rho: f64, d1: f64, d2: f64) -> f64 {
    let g1 = Complex64::new(d1, rho);
    let g2 = Complex64::new(d2 - rho, 2.0 * d1);
    (g2 / g1).re / (2.0 * PI)
}

/// `∫ K(φ_m, θ) z(θ) dθ` at every node: the Hilbert transform handles the
/// `cot` part exactly and the remainder is integrated by the trapezoid rule.
#[derive(Debug, Clone)]
pub struct KernelK {
    n: usize,
    smooth: Vec<f64>,
}

impl KernelK {
    pub fn new(rho0: &[f64]) -> Self {
        let n = rho0.len();
        let h = 2.0 * PI / n as f64;
        let d1 = derivative(rho0);
        let d2 = derivative(&d1);
        let mut smooth = vec![0.0; n * n];
        for m in 0..n {
            let (a, da) = (rho0[m], d1[m]);
            for j in 0..n {
                smooth[m * n + j] = if j == m {
                    kernel_diag(a, da, d2[m])
                } else {
                    let b = rho0[j];
                    let (sn, cs) = (phi_node(j, n) - phi_node(m, n)).sin_cos();
                    let d = a * a + b * b - 2.0 * a * b * cs;
                    let dd = 2.0 * a * da - 2.0 * da * b * cs - 2.0 * a * b * sn;
                    let half = 0.5 * (phi_node(m, n) - phi_node(j, n));
                    (dd / d - 1.0 / half.tan()) / (2.0 * PI)
                };
            }
        }
        smooth.iter_mut().for_each(|v| *v *= h);
        Self { n, smooth }
    }

    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        let mut out = hilbert(z);
        for m in 0..self.n {
            let row = &self.smooth[m * self.n..(m + 1) * self.n];
            out[m] += row.iter().zip(z).map(|(k, v)| k * v).sum::<f64>();
        }
        out
    }
}

/// `∂_w ζ` at the level nodes of one angle from the monotone level
/// interpolant.
pub fn level_slopes(f: &PolarContourField, m: usize) -> Vec<f64> {
    let n_w = f.n_w();
    if n_w < 2 {
        return vec![0.0; n_w];
    }
    let xs: Vec<f64> = f.levels.iter().map(|l| l.abs()).collect();
    let ys: Vec<f64> = (0..n_w).map(|i| f.at(m, i)).collect();
    Pchip::new(&xs, &ys).slopes().to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PolarContourField;

    fn rankine(n_phi: usize, m: f64, r: f64) -> VortexRegion {
        let f = PolarContourField::from_fn(n_phi, m, 1, |_, _| 0.5 * r * r).unwrap();
        VortexRegion::new(Point::ORIGIN, m, f).unwrap()
    }

    #[test]
    fn rankine_self_stream_on_boundary() {
        // ψ(R) = (M R²/2) ln R for a disk.
        let (m, r) = (1.3, 0.8);
        let reg = rankine(64, m, r);
        let q = QuadratureSpec::new(64, SingularityMode::SplitLog);
        let psi = self_stream_unit(&q, &reg.field);
        let exact = 0.5 * m * r * r * r.ln();
        for v in &psi {
            assert!((v - exact).abs() < 1e-6, "{v} vs {exact}");
        }
    }

    #[test]
    fn log_moments_differentiate_back() {
        for &(t, q) in &[(0.3, 0.7), (-1.2, 0.05), (2.0, 0.0), (0.5, 3.0)] {
            let e = 1e-6;
            let a = log_moments(t + e, q);
            let b = log_moments(t - e, q);
            let l = (t * t + q * q).ln();
            for k in 0..4 {
                let d = (a[k] - b[k]) / (2.0 * e);
                assert!((d - t.powi(k as i32) * l).abs() < 1e-7, "k={k} t={t} q={q}");
            }
        }
    }

    #[test]
    fn patch_boundary_velocity_of_disk_is_solid_body() {
        let p = PatchContour::new(Point::ORIGIN, 2.0, vec![0.7; 32]).unwrap();
        for (m, v) in patch_boundary_velocity(&p).iter().enumerate() {
            let phi = phi_node(m, 32);
            assert!((v.x + 0.7 * phi.sin()).abs() < 1e-12);
            assert!((v.y - 0.7 * phi.cos()).abs() < 1e-12);
        }
    }
}
