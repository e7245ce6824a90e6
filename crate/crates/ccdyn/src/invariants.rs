//! Conserved quantities and topology monitors.

use crate::error::{Error, Result};
use crate::geometry::{GriddedVorticity, Point, VortexSystem};
use crate::kernels::{hamiltonian, QuadratureSpec};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::fmt::Write as _;

/// Vorticity first moment `Σ_j s_j ∬ (½ z_j ρ² + ⅓ ρ³ e^{iφ}) dφ dw`.
pub fn first_moment(system: &VortexSystem) -> Complex64 {
    let mut c = Complex64::new(0.0, 0.0);
    for reg in &system.regions {
        let f = &reg.field;
        let n_w = f.n_w();
        let h = 2.0 * PI / f.n_phi as f64;
        let z = Complex64::new(reg.center.x, reg.center.y);
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n_w {
            let mut area = 0.0;
            let mut cubic = Complex64::new(0.0, 0.0);
            for m in 0..f.n_phi {
                let r = f.rho(m, i);
                area += 0.5 * r * r;
                cubic += Complex64::from_polar(r * r * r / 3.0, f.phi(m));
            }
            acc += f.weights[i] * h * (z * area + cubic);
        }
        c += reg.sign() * acc;
    }
    c
}

/// Casimir densities `K(Ω)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CasimirFn {
    /// `K ≡ 1`: support area.
    Area,
    /// `K(w) = w^k`.
    Power(u32),
    /// `K(w) = e^{a w} − 1`.
    Exp(f64),
}

impl CasimirFn {
    pub fn name(&self) -> String {
        match self {
            CasimirFn::Area => "area".into(),
            CasimirFn::Power(k) => format!("pow{k}"),
            CasimirFn::Exp(a) => format!("exp{a}"),
        }
    }

    pub fn value(&self, w: f64) -> f64 {
        match *self {
            CasimirFn::Area => 1.0,
            CasimirFn::Power(k) => w.powi(k as i32),
            CasimirFn::Exp(a) => (a * w).exp_m1(),
        }
    }

    pub fn derivative(&self, w: f64) -> f64 {
        match *self {
            CasimirFn::Area => 0.0,
            CasimirFn::Power(0) => 0.0,
            CasimirFn::Power(k) => k as f64 * w.powi(k as i32 - 1),
            CasimirFn::Exp(a) => a * (a * w).exp(),
        }
    }
}

/// Areas `A_i = ½∫ρ²(φ, w_i) dφ` at the stored levels.
pub fn level_areas(f: &crate::geometry::PolarContourField) -> Vec<f64> {
    let h = 2.0 * PI / f.n_phi as f64;
    (0..f.n_w())
        .map(|i| h * (0..f.n_phi).map(|m| f.at(m, i)).sum::<f64>())
        .collect()
}

/// `∫K(Ω) dA = Σ_j [K(0) A_j(0) + s_j ∫ K'(w) A_j(w) d|w|]`, the integrated-by-
/// parts form of `−Σ_j s_j ∫ K(w) ∂_w A_j dw`. The support area `A_j(0)` is
/// taken from the outermost stored level.
pub fn casimir(system: &VortexSystem, k: CasimirFn) -> f64 {
    let k0 = k.value(0.0);
    let mut c = 0.0;
    for reg in &system.regions {
        let f = &reg.field;
        let areas = level_areas(f);
        let mut s = 0.0;
        for i in 0..f.n_w() {
            s += f.weights[i] * k.derivative(f.levels[i]) * areas[i];
        }
        c += k0 * areas[0] + reg.sign() * s;
    }
    c
}

/// Type of a critical point of a gridded field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriticalKind {
    Maximum,
    Minimum,
    Saddle,
    /// Hessian determinant below tolerance: located but not classified.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalPoint {
    pub position: Point,
    pub value: f64,
    pub kind: CriticalKind,
}

/// Tolerances for [`locate_critical_points`].
#[derive(Debug, Clone, Copy)]
pub struct CriticalOptions {
    /// Nodes with `|Ω| ≤ floor · max|Ω|` are ignored (flat far field).
    pub floor: f64,
    /// `|det H| ≤ det_tol · ‖H‖²` is treated as degenerate.
    pub det_tol: f64,
}

impl Default for CriticalOptions {
    fn default() -> Self {
        Self {
            floor: 1e-3,
            det_tol: 1e-8,
        }
    }
}

/// Critical points from local quadratic fits: each interior node claims the
/// stationary point of its 3×3 fit when it lies in the node's half-open cell.
pub fn locate_critical_points(grid: &GriddedVorticity, opts: CriticalOptions) -> Vec<CriticalPoint> {
    let n = grid.n;
    let d = grid.spacing();
    let gmax = grid.omega.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut out = Vec::new();
    if gmax == 0.0 {
        return out;
    }
    let floor = opts.floor * gmax;
    for j in 1..n - 1 {
        for i in 1..n - 1 {
            let c = grid.at(i, j);
            if c.abs() <= floor {
                continue;
            }
            let gx = 0.5 * (grid.at(i + 1, j) - grid.at(i - 1, j));
            let gy = 0.5 * (grid.at(i, j + 1) - grid.at(i, j - 1));
            let hxx = grid.at(i + 1, j) - 2.0 * c + grid.at(i - 1, j);
            let hyy = grid.at(i, j + 1) - 2.0 * c + grid.at(i, j - 1);
            let hxy = 0.25 * (grid.at(i + 1, j + 1) - grid.at(i + 1, j - 1) - grid.at(i - 1, j + 1) + grid.at(i - 1, j - 1));
            let det = hxx * hyy - hxy * hxy;
            let norm2 = hxx * hxx + hyy * hyy + 2.0 * hxy * hxy;
            if det == 0.0 {
                continue;
            }
            let dx = -(hyy * gx - hxy * gy) / det;
            let dy = -(hxx * gy - hxy * gx) / det;
            if !((-0.5..0.5).contains(&dx) && (-0.5..0.5).contains(&dy)) {
                continue;
            }
            let value = c + gx * dx + gy * dy + 0.5 * (hxx * dx * dx + 2.0 * hxy * dx * dy + hyy * dy * dy);
            let kind = if det.abs() <= opts.det_tol * norm2 {
                CriticalKind::Degenerate
            } else if det < 0.0 {
                CriticalKind::Saddle
            } else if hxx + hyy < 0.0 {
                CriticalKind::Maximum
            } else {
                CriticalKind::Minimum
            };
            let p = grid.point(i, j);
            out.push(CriticalPoint {
                position: Point::new(p.x + dx * d, p.y + dy * d),
                value,
                kind,
            });
        }
    }
    out
}

/// Number of 4-connected components of `{Ω > w}` (`w > 0`) or `{Ω < w}` (`w < 0`).
pub fn count_level_components(grid: &GriddedVorticity, w: f64) -> Result<usize> {
    if w == 0.0 || !w.is_finite() {
        return Err(Error::InvalidInput("component threshold must be finite and non-zero".into()));
    }
    let n = grid.n;
    let inside = |k: usize| if w > 0.0 { grid.omega[k] > w } else { grid.omega[k] < w };
    let mut seen = vec![false; n * n];
    let mut count = 0;
    let mut stack = Vec::new();
    for start in 0..n * n {
        if seen[start] || !inside(start) {
            continue;
        }
        count += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(k) = stack.pop() {
            let (i, j) = (k % n, k / n);
            let mut visit = |kk: usize| {
                if !seen[kk] && inside(kk) {
                    seen[kk] = true;
                    stack.push(kk);
                }
            };
            if i > 0 {
                visit(k - 1);
            }
            if i + 1 < n {
                visit(k + 1);
            }
            if j > 0 {
                visit(k - n);
            }
            if j + 1 < n {
                visit(k + n);
            }
        }
    }
    Ok(count)
}

/// One row of the invariant monitor.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantReport {
    pub t: f64,
    pub hamiltonian: f64,
    pub first_moment: Complex64,
    pub casimir_samples: Vec<(String, f64)>,
    pub peak_values: Vec<f64>,
    pub peak_positions: Vec<Point>,
    pub n_of_w: Vec<(f64, usize)>,
    pub area_probes: Vec<(f64, f64)>,
}

/// What [`report_system`] and [`report_grid`] sample.
#[derive(Debug, Clone)]
pub struct ReportOptions {
    pub casimirs: Vec<CasimirFn>,
    /// Level indices (into each region's stored levels) for area probes.
    pub area_levels: Vec<usize>,
    /// Thresholds for `n(w)`.
    pub component_levels: Vec<f64>,
    pub with_hamiltonian: bool,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            casimirs: vec![CasimirFn::Area, CasimirFn::Power(1), CasimirFn::Power(2)],
            area_levels: Vec::new(),
            component_levels: Vec::new(),
            with_hamiltonian: true,
        }
    }
}

/// Eight level indices spread evenly over `n_w` stored levels.
pub fn default_probe_levels(n_w: usize) -> Vec<usize> {
    let k = n_w.min(8);
    if k <= 1 {
        return vec![0];
    }
    (0..k).map(|j| j * (n_w - 1) / (k - 1)).collect()
}

/// Report for a contour-field system. Each region contributes one component
/// to `n(w)` when `w` lies in its level range, which the representation
/// guarantees by construction.
pub fn report_system(q: &QuadratureSpec, system: &VortexSystem, t: f64, opts: &ReportOptions) -> Result<InvariantReport> {
    let h = if opts.with_hamiltonian {
        hamiltonian(q, system)?
    } else {
        f64::NAN
    };
    let mut area_probes = Vec::new();
    for reg in &system.regions {
        let areas = level_areas(&reg.field);
        for &i in &opts.area_levels {
            if i < areas.len() {
                area_probes.push((reg.field.levels[i], areas[i]));
            }
        }
    }
    let n_of_w = opts
        .component_levels
        .iter()
        .map(|&w| {
            let n = system
                .regions
                .iter()
                .filter(|r| w * r.peak > 0.0 && w.abs() < r.peak.abs())
                .count();
            (w, n)
        })
        .collect();
    Ok(InvariantReport {
        t,
        hamiltonian: h,
        first_moment: first_moment(system),
        casimir_samples: opts.casimirs.iter().map(|k| (k.name(), casimir(system, *k))).collect(),
        peak_values: system.regions.iter().map(|r| r.peak).collect(),
        peak_positions: system.regions.iter().map(|r| r.center).collect(),
        n_of_w,
        area_probes,
    })
}

/// Report for a gridded field; `energy` is supplied by the caller (the
/// spectral oracle computes it in Fourier space).
pub fn report_grid(grid: &GriddedVorticity, t: f64, energy: f64, opts: &ReportOptions) -> Result<InvariantReport> {
    let da = grid.spacing() * grid.spacing();
    let mut c = Complex64::new(0.0, 0.0);
    for j in 0..grid.n {
        for i in 0..grid.n {
            let p = grid.point(i, j);
            c += grid.at(i, j) * da * Complex64::new(p.x, p.y);
        }
    }
    let casimir_samples = opts
        .casimirs
        .iter()
        .map(|k| {
            let s: f64 = match k {
                CasimirFn::Area => grid.omega.iter().filter(|v| **v != 0.0).count() as f64,
                _ => grid.omega.iter().map(|&v| k.value(v)).sum(),
            };
            (k.name(), s * da)
        })
        .collect();
    let mut extrema: Vec<CriticalPoint> = locate_critical_points(grid, CriticalOptions::default())
        .into_iter()
        .filter(|p| matches!(p.kind, CriticalKind::Maximum | CriticalKind::Minimum))
        .collect();
    extrema.sort_by(|a, b| b.value.partial_cmp(&a.value).unwrap_or(std::cmp::Ordering::Equal));
    let mut n_of_w = Vec::new();
    for &w in &opts.component_levels {
        n_of_w.push((w, count_level_components(grid, w)?));
    }
    Ok(InvariantReport {
        t,
        hamiltonian: energy,
        first_moment: c,
        casimir_samples,
        peak_values: extrema.iter().map(|p| p.value).collect(),
        peak_positions: extrema.iter().map(|p| p.position).collect(),
        n_of_w,
        area_probes: Vec::new(),
    })
}

/// Schema tag written as the first line of invariant CSV files.
pub const INVARIANTS_CSV_VERSION: &str = "# ccdyn invariants v1";

impl InvariantReport {
    /// Column names; the layout follows the first report of a run.
    pub fn csv_header(&self) -> String {
        let mut h = String::from("t,H,c_re,c_im");
        for (name, _) in &self.casimir_samples {
            let _ = write!(h, ",casimir_{name}");
        }
        for k in 0..self.peak_values.len() {
            let _ = write!(h, ",peak_{k},peak_x_{k},peak_y_{k}");
        }
        for (w, _) in &self.n_of_w {
            let _ = write!(h, ",n_w{w}");
        }
        for (k, (w, _)) in self.area_probes.iter().enumerate() {
            let _ = write!(h, ",area_{k}_w{w:.6}");
        }
        h
    }

    pub fn csv_row(&self) -> String {
        let mut r = format!(
            "{:.17e},{:.17e},{:.17e},{:.17e}",
            self.t, self.hamiltonian, self.first_moment.re, self.first_moment.im
        );
        for (_, v) in &self.casimir_samples {
            let _ = write!(r, ",{v:.17e}");
        }
        for (v, p) in self.peak_values.iter().zip(&self.peak_positions) {
            let _ = write!(r, ",{v:.17e},{:.17e},{:.17e}", p.x, p.y);
        }
        for (_, n) in &self.n_of_w {
            let _ = write!(r, ",{n}");
        }
        for (_, a) in &self.area_probes {
            let _ = write!(r, ",{a:.17e}");
        }
        r
    }
}

/// Full CSV document: version line, header, one row per report.
pub fn reports_to_csv(reports: &[InvariantReport]) -> String {
    let mut s = String::from(INVARIANTS_CSV_VERSION);
    s.push('\n');
    if let Some(first) = reports.first() {
        s.push_str(&first.csv_header());
        s.push('\n');
        for r in reports {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
    }
    s
}

/// Largest relative deviation of `values` from the first entry; an absolute
/// deviation is returned when the first entry is zero.
pub fn relative_drift(values: &[f64]) -> f64 {
    let Some(&v0) = values.first() else { return 0.0 };
    let scale = if v0 == 0.0 { 1.0 } else { v0.abs() };
    values.iter().map(|v| (v - v0).abs() / scale).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{PolarContourField, VortexRegion};

    fn rankine(center: Point, m: f64, r: f64) -> VortexSystem {
        let f = PolarContourField::from_fn(32, m, 4, |_, _| 0.5 * r * r).unwrap();
        VortexSystem::monopole(VortexRegion::new(center, m, f).unwrap())
    }

    #[test]
    fn rankine_moments_and_casimirs() {
        let z0 = Point::new(0.3, -1.2);
        let sys = rankine(z0, 2.0, 0.7);
        let area = PI * 0.49;
        let c = first_moment(&sys);
        assert!((c.re - z0.x * 2.0 * area).abs() < 1e-13);
        assert!((c.im - z0.y * 2.0 * area).abs() < 1e-13);
        assert!((casimir(&sys, CasimirFn::Power(1)) - 2.0 * area).abs() < 1e-13);
        assert!((casimir(&sys, CasimirFn::Area) - area).abs() < 1e-13);
        assert!((casimir(&sys, CasimirFn::Power(2)) - 4.0 * area).abs() < 1e-12);
    }

    #[test]
    fn components_of_two_gaussians() {
        let g = GriddedVorticity::from_fn(20.0, 128, |p| {
            (-(p.dist(Point::new(-3.0, 0.0))).powi(2)).exp() + (-(p.dist(Point::new(3.0, 0.0))).powi(2)).exp()
        });
        assert_eq!(count_level_components(&g, 0.5).unwrap(), 2);
        assert_eq!(count_level_components(&g, 1.5).unwrap(), 0);
        assert_eq!(count_level_components(&g, -0.5).unwrap(), 0);
    }
}
