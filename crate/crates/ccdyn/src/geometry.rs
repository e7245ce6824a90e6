//! Contour-field data types, conversion from vorticity samplers by the
//! generalized-distance ray integral, reconstruction, and file formats.

use crate::error::{Error, Result};
use crate::interp::Pchip;
use crate::quadrature::level_grid;
use crate::spectral::PeriodicTable;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn polar(r: f64, phi: f64) -> Self {
        Self::new(r * phi.cos(), r * phi.sin())
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn dist(self, o: Point) -> f64 {
        (self - o).norm()
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

/// Tensor grid of `ζ = ρ²/2` over uniform angles and Gauss–Legendre levels.
///
/// `zeta[m * n_w + i]` belongs to angle `φ_m = 2πm/N_φ` and level `levels[i]`;
/// levels grow in magnitude with `i`, so `ζ` decreases along `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarContourField {
    pub n_phi: usize,
    pub levels: Vec<f64>,
    pub weights: Vec<f64>,
    pub zeta: Vec<f64>,
}

impl PolarContourField {
    /// Field on the standard Gauss–Legendre level grid of `peak`.
    pub fn gauss(n_phi: usize, peak: f64, n_w: usize, zeta: Vec<f64>) -> Result<Self> {
        let (levels, weights) = level_grid(peak, n_w);
        let f = Self {
            n_phi,
            levels,
            weights,
            zeta,
        };
        f.validate()?;
        Ok(f)
    }

    /// Builds the field by evaluating `zeta(φ, w)` at every node.
    pub fn from_fn(n_phi: usize, peak: f64, n_w: usize, zeta: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let (levels, _) = level_grid(peak, n_w);
        let mut z = Vec::with_capacity(n_phi * n_w);
        for m in 0..n_phi {
            let phi = phi_node(m, n_phi);
            for &w in &levels {
                z.push(zeta(phi, w));
            }
        }
        Self::gauss(n_phi, peak, n_w, z)
    }

    pub fn n_w(&self) -> usize {
        self.levels.len()
    }

    pub fn at(&self, m: usize, i: usize) -> f64 {
        self.zeta[m * self.n_w() + i]
    }

    pub fn rho(&self, m: usize, i: usize) -> f64 {
        (2.0 * self.at(m, i)).sqrt()
    }

    /// `ζ` along level `i` as a function of the angle index.
    pub fn level_column(&self, i: usize) -> Vec<f64> {
        (0..self.n_phi).map(|m| self.at(m, i)).collect()
    }

    pub fn phi(&self, m: usize) -> f64 {
        phi_node(m, self.n_phi)
    }

    pub fn validate(&self) -> Result<()> {
        let n_w = self.n_w();
        if self.n_phi < 4 || self.n_phi % 2 != 0 {
            return Err(Error::InvalidInput(format!("N_phi must be even and ≥ 4, got {}", self.n_phi)));
        }
        if n_w == 0 || self.weights.len() != n_w || self.zeta.len() != self.n_phi * n_w {
            return Err(Error::InvalidInput("contour field dimensions disagree".into()));
        }
        if !self.levels.windows(2).all(|p| p[1].abs() > p[0].abs() && p[0] * p[1] > 0.0) {
            return Err(Error::InvalidInput("levels must be same-signed and strictly increasing in magnitude".into()));
        }
        for m in 0..self.n_phi {
            for i in 0..n_w {
                let z = self.at(m, i);
                if !(z > 0.0) || !z.is_finite() {
                    return Err(Error::NonPositiveZeta {
                        phi_index: m,
                        level_index: i,
                    });
                }
            }
        }
        Ok(())
    }

    /// Largest stored radius.
    pub fn max_rho(&self) -> f64 {
        (2.0 * self.zeta.iter().fold(0.0f64, |a, &z| a.max(z))).sqrt()
    }
}

pub fn phi_node(m: usize, n_phi: usize) -> f64 {
    2.0 * PI * m as f64 / n_phi as f64
}

/// One extremum of the vorticity with its contour field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VortexRegion {
    pub center: Point,
    pub peak: f64,
    pub field: PolarContourField,
}

impl VortexRegion {
    pub fn new(center: Point, peak: f64, field: PolarContourField) -> Result<Self> {
        let r = Self { center, peak, field };
        r.validate()?;
        Ok(r)
    }

    pub fn sign(&self) -> f64 {
        self.peak.signum()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.peak.abs() > 0.0) {
            return Err(Error::InvalidInput("peak vorticity must be non-zero".into()));
        }
        self.field.validate()?;
        let s = self.sign();
        if self.field.levels.iter().any(|&w| !(w * s > 0.0 && w.abs() < self.peak.abs())) {
            return Err(Error::InvalidInput("levels must lie strictly between 0 and the peak".into()));
        }
        Ok(())
    }

    /// Total circulation carried by the stored layers.
    pub fn circulation(&self) -> f64 {
        let f = &self.field;
        let h = 2.0 * PI / f.n_phi as f64;
        let mut s = 0.0;
        for (i, &wt) in f.weights.iter().enumerate() {
            let col: f64 = (0..f.n_phi).map(|m| f.at(m, i)).sum();
            s += wt * h * col;
        }
        self.sign() * s
    }
}

/// Regions ordered by descending peak value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VortexSystem {
    pub regions: Vec<VortexRegion>,
}

impl VortexSystem {
    pub fn new(mut regions: Vec<VortexRegion>) -> Result<Self> {
        if regions.is_empty() {
            return Err(Error::InvalidInput("a vortex system needs at least one region".into()));
        }
        regions.sort_by(|a, b| b.peak.partial_cmp(&a.peak).unwrap_or(std::cmp::Ordering::Equal));
        for r in &regions {
            r.validate()?;
        }
        for i in 0..regions.len() {
            for j in 0..i {
                if regions[i].center.dist(regions[j].center) == 0.0 {
                    return Err(Error::InvalidInput("region centers must be distinct".into()));
                }
            }
        }
        Ok(Self { regions })
    }

    pub fn monopole(region: VortexRegion) -> Self {
        Self { regions: vec![region] }
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    /// Largest region extent, used to scale distance thresholds.
    pub fn scale(&self) -> f64 {
        self.regions.iter().map(|r| r.field.max_rho()).fold(0.0, f64::max)
    }
}

/// A uniform-vorticity patch bounded by `pole + ρ(φ) e^{iφ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchContour {
    pub pole: Point,
    pub vorticity: f64,
    pub rho: Vec<f64>,
}

impl PatchContour {
    pub fn new(pole: Point, vorticity: f64, rho: Vec<f64>) -> Result<Self> {
        if rho.len() < 4 || rho.len() % 2 != 0 {
            return Err(Error::InvalidInput("patch needs an even number (≥ 4) of nodes".into()));
        }
        if rho.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::InvalidInput("patch radius must be positive".into()));
        }
        Ok(Self { pole, vorticity, rho })
    }

    /// Ellipse with semi-axes `a` (rotated by `angle`) and `b` about `pole`.
    pub fn ellipse(pole: Point, vorticity: f64, a: f64, b: f64, angle: f64, n_phi: usize) -> Result<Self> {
        let rho = (0..n_phi)
            .map(|m| {
                let t = phi_node(m, n_phi) - angle;
                a * b / ((b * t.cos()).powi(2) + (a * t.sin()).powi(2)).sqrt()
            })
            .collect();
        Self::new(pole, vorticity, rho)
    }

    pub fn area(&self) -> f64 {
        let h = 2.0 * PI / self.rho.len() as f64;
        0.5 * h * self.rho.iter().map(|r| r * r).sum::<f64>()
    }
}

/// Vorticity on the square `[−L/2, L/2)²`; `omega[j * n + i]` sits at
/// `x = −L/2 + iΔ`, `y = −L/2 + jΔ`, `Δ = L/n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GriddedVorticity {
    pub length: f64,
    pub n: usize,
    pub omega: Vec<f64>,
}

impl GriddedVorticity {
    pub fn new(length: f64, n: usize, omega: Vec<f64>) -> Result<Self> {
        if omega.len() != n * n || n < 4 || !(length > 0.0) {
            return Err(Error::InvalidInput("grid dimensions disagree".into()));
        }
        Ok(Self { length, n, omega })
    }

    pub fn from_fn(length: f64, n: usize, f: impl Fn(Point) -> f64) -> Self {
        let mut omega = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                omega.push(f(Self::coord(length, n, i, j)));
            }
        }
        Self { length, n, omega }
    }

    fn coord(length: f64, n: usize, i: usize, j: usize) -> Point {
        let d = length / n as f64;
        Point::new(-0.5 * length + i as f64 * d, -0.5 * length + j as f64 * d)
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn point(&self, i: usize, j: usize) -> Point {
        Self::coord(self.length, self.n, i, j)
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.omega[j * self.n + i]
    }

    /// Ratio of the outer-ring maximum to the global maximum of |Ω|.
    pub fn boundary_ratio(&self) -> f64 {
        let n = self.n;
        let gmax = self.omega.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut bmax = 0.0f64;
        for k in 0..n {
            for &(i, j) in &[(k, 0), (k, n - 1), (0, k), (n - 1, k)] {
                bmax = bmax.max(self.at(i, j).abs());
            }
        }
        if gmax == 0.0 {
            0.0
        } else {
            bmax / gmax
        }
    }

    pub fn is_decayed(&self) -> bool {
        self.boundary_ratio() < 1e-6
    }
}

/// Options for the ray integral of the generalized distance.
#[derive(Debug, Clone, Copy)]
pub struct RayOptions {
    /// First horizon tried; doubled until the ray has left the lowest level.
    pub horizon: f64,
    pub max_horizon: f64,
    /// Uniform bracketing samples per ray.
    pub samples: usize,
}

impl Default for RayOptions {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            max_horizon: 1e6,
            samples: 4096,
        }
    }
}

/// Diagnostics of a sampler conversion.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SamplerReport {
    /// Number of (φ, w) nodes whose ray left and re-entered the level set.
    pub non_monotone_rays: usize,
}

/// Converts a vorticity sampler into a contour field about `center`: for each
/// node `ρ(φ, w)` is the measure of `{r ≥ 0 : sΩ(center + r e^{iφ}) > |w|}`.
pub fn contour_field_from_sampler(
    sampler: &dyn Fn(Point) -> f64,
    center: Point,
    peak: f64,
    n_phi: usize,
    n_w: usize,
    opts: RayOptions,
) -> Result<(VortexRegion, SamplerReport)> {
    if !(peak.abs() > 0.0) {
        return Err(Error::InvalidInput("peak vorticity must be non-zero".into()));
    }
    let s = peak.signum();
    let (levels, weights) = level_grid(peak, n_w);
    let lowest = levels[0].abs();
    let mut zeta = vec![0.0; n_phi * n_w];
    let mut report = SamplerReport::default();
    for m in 0..n_phi {
        let phi = phi_node(m, n_phi);
        let (c, sn) = (phi.cos(), phi.sin());
        let g = |r: f64| s * sampler(center + Point::new(r * c, r * sn));
        // Grow the horizon until the ray stays below the lowest level on a
        // trailing window four times as long.
        let mut horizon = opts.horizon;
        let reenters = |h: f64| (1..=256).any(|k| g(h * (1.0 + 3.0 * k as f64 / 256.0)) >= lowest);
        while g(horizon) >= lowest || reenters(horizon) {
            horizon *= 2.0;
            if horizon > opts.max_horizon {
                return Err(Error::NoCrossing {
                    phi,
                    level: levels[0],
                    horizon: opts.max_horizon,
                });
            }
        }
        let ns = opts.samples.max(16);
        let dr = horizon / ns as f64;
        let vals: Vec<f64> = (0..=ns).map(|k| g(k as f64 * dr)).collect();
        for (i, &w) in levels.iter().enumerate() {
            let aw = w.abs();
            let mut len = 0.0;
            let mut start: Option<f64> = if vals[0] > aw { Some(0.0) } else { None };
            let mut segments = 0;
            for k in 0..ns {
                let (v0, v1) = (vals[k] - aw, vals[k + 1] - aw);
                if (v0 > 0.0) != (v1 > 0.0) {
                    let r0 = k as f64 * dr;
                    let x = bisect(|r| g(r) - aw, r0, r0 + dr, v0);
                    match start.take() {
                        Some(a) => {
                            len += x - a;
                            segments += 1;
                        }
                        None => start = Some(x),
                    }
                }
            }
            if start.is_some() {
                return Err(Error::NoCrossing {
                    phi,
                    level: w,
                    horizon,
                });
            }
            if segments > 1 {
                report.non_monotone_rays += 1;
            }
            zeta[m * n_w + i] = 0.5 * len * len;
        }
    }
    let field = PolarContourField {
        n_phi,
        levels,
        weights,
        zeta,
    };
    Ok((VortexRegion::new(center, peak, field)?, report))
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, fa: f64) -> f64 {
    let pa = fa > 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if (f(mid) > 0.0) == pa {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// How a reconstructed value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReconstructionFlag {
    Interior,
    /// Beyond the outermost stored contour; the value is 0.
    OutsideSupport,
    /// Inside the innermost stored contour; clamped to the innermost level.
    InnerClamp,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reconstruction {
    pub value: f64,
    pub flag: ReconstructionFlag,
}

/// Evaluates the vorticity encoded by a region at arbitrary points.
#[derive(Debug, Clone)]
pub struct VorticityReconstructor {
    center: Point,
    levels: Vec<f64>,
    tables: Vec<PeriodicTable>,
}

impl VorticityReconstructor {
    pub fn new(region: &VortexRegion) -> Self {
        let f = &region.field;
        let tables = (0..f.n_w()).map(|i| PeriodicTable::new(&f.level_column(i), 8)).collect();
        Self {
            center: region.center,
            levels: f.levels.clone(),
            tables,
        }
    }

    pub fn eval(&self, p: Point) -> Reconstruction {
        let d = p - self.center;
        let zp = 0.5 * (d.x * d.x + d.y * d.y);
        let phi = d.angle();
        let n = self.levels.len();
        let z: Vec<f64> = self.tables.iter().map(|t| t.eval(phi)).collect();
        if zp > z[0] {
            return Reconstruction {
                value: 0.0,
                flag: ReconstructionFlag::OutsideSupport,
            };
        }
        if zp <= z[n - 1] || n == 1 {
            return Reconstruction {
                value: self.levels[n - 1],
                flag: ReconstructionFlag::InnerClamp,
            };
        }
        // Monotone interpolation of |w| against increasing ζ.
        let xs: Vec<f64> = z.iter().rev().copied().collect();
        let ys: Vec<f64> = self.levels.iter().rev().map(|w| w.abs()).collect();
        if xs.windows(2).any(|p| p[1] <= p[0]) {
            // Interpolated contours touch; fall back to the bracketing level.
            let k = z.iter().rposition(|&zi| zi >= zp).unwrap_or(0);
            return Reconstruction {
                value: self.levels[k],
                flag: ReconstructionFlag::Interior,
            };
        }
        let v = Pchip::new(&xs, &ys).eval(zp);
        Reconstruction {
            value: self.levels[0].signum() * v,
            flag: ReconstructionFlag::Interior,
        }
    }
}

/// Vorticity at `point` encoded by `region` (see [`VorticityReconstructor`]).
pub fn reconstruct_vorticity(region: &VortexRegion, point: Point) -> Reconstruction {
    VorticityReconstructor::new(region).eval(point)
}

/// `ζ(φ_m, w)` for all angles, by monotone interpolation in the level.
pub fn zeta_at_level(field: &PolarContourField, w: f64) -> Result<Vec<f64>> {
    let aw = w.abs();
    let n_w = field.n_w();
    let lo = field.levels[0].abs();
    let hi = field.levels[n_w - 1].abs();
    if !(aw >= lo * (1.0 - 1e-12) && aw <= hi * (1.0 + 1e-12)) || w * field.levels[0] < 0.0 {
        return Err(Error::LevelOutOfRange(w));
    }
    let xs: Vec<f64> = field.levels.iter().map(|l| l.abs()).collect();
    Ok((0..field.n_phi)
        .map(|m| {
            if n_w == 1 {
                return field.at(m, 0);
            }
            let ys: Vec<f64> = (0..n_w).map(|i| field.at(m, i)).collect();
            Pchip::new(&xs, &ys).eval(aw)
        })
        .collect())
}

/// Area `½∫ρ²(φ, w) dφ` enclosed by the level-`w` contour.
pub fn area_function(field: &PolarContourField, w: f64) -> Result<f64> {
    let z = zeta_at_level(field, w)?;
    let h = 2.0 * PI / field.n_phi as f64;
    Ok(h * z.iter().sum::<f64>())
}

const CSV_MAGIC: &str = "# ccdyn contour-field v1";

/// Columnar CSV: a header with center, peak and sizes, the level table, then
/// one `(phi_index, w_index, zeta)` row per node. Floats use the shortest
/// round-trip representation, so reading back is bit-identical.
pub fn region_to_csv(region: &VortexRegion) -> String {
    let f = &region.field;
    let mut s = String::new();
    s.push_str(CSV_MAGIC);
    s.push('\n');
    s.push_str("# center_x,center_y,peak,n_phi,n_w\n");
    let _ = writeln!(s, "{},{},{},{},{}", region.center.x, region.center.y, region.peak, f.n_phi, f.n_w());
    s.push_str("# w_index,w,weight\n");
    for (i, (w, wt)) in f.levels.iter().zip(&f.weights).enumerate() {
        let _ = writeln!(s, "{i},{w},{wt}");
    }
    s.push_str("# phi_index,w_index,zeta\n");
    for m in 0..f.n_phi {
        for i in 0..f.n_w() {
            let _ = writeln!(s, "{m},{i},{}", f.at(m, i));
        }
    }
    s
}

pub fn region_from_csv(text: &str) -> Result<VortexRegion> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    if lines.next().map(str::trim) != Some(CSV_MAGIC) {
        return Err(Error::Parse("missing contour-field header".into()));
    }
    let mut data = lines.filter(|l| !l.starts_with('#'));
    let head = data.next().ok_or_else(|| Error::Parse("missing header row".into()))?;
    let hv: Vec<&str> = head.split(',').collect();
    if hv.len() != 5 {
        return Err(Error::Parse("header row needs 5 fields".into()));
    }
    let cx = parse_f(hv[0])?;
    let cy = parse_f(hv[1])?;
    let peak = parse_f(hv[2])?;
    let n_phi = parse_u(hv[3])?;
    let n_w = parse_u(hv[4])?;
    let mut levels = vec![0.0; n_w];
    let mut weights = vec![0.0; n_w];
    for _ in 0..n_w {
        let row = data.next().ok_or_else(|| Error::Parse("truncated level table".into()))?;
        let v: Vec<&str> = row.split(',').collect();
        if v.len() != 3 {
            return Err(Error::Parse(format!("bad level row '{row}'")));
        }
        let i = parse_u(v[0])?;
        if i >= n_w {
            return Err(Error::Parse("level index out of range".into()));
        }
        levels[i] = parse_f(v[1])?;
        weights[i] = parse_f(v[2])?;
    }
    let mut zeta = vec![f64::NAN; n_phi * n_w];
    let mut count = 0;
    for row in data {
        let v: Vec<&str> = row.split(',').collect();
        if v.len() != 3 {
            return Err(Error::Parse(format!("bad node row '{row}'")));
        }
        let (m, i) = (parse_u(v[0])?, parse_u(v[1])?);
        if m >= n_phi || i >= n_w {
            return Err(Error::Parse("node index out of range".into()));
        }
        zeta[m * n_w + i] = parse_f(v[2])?;
        count += 1;
    }
    if count != n_phi * n_w {
        return Err(Error::Parse(format!("expected {} nodes, found {count}", n_phi * n_w)));
    }
    VortexRegion::new(
        Point::new(cx, cy),
        peak,
        PolarContourField {
            n_phi,
            levels,
            weights,
            zeta,
        },
    )
}

pub fn region_to_json(region: &VortexRegion) -> String {
    serde_json::to_string_pretty(region).expect("region serializes")
}

pub fn region_from_json(text: &str) -> Result<VortexRegion> {
    let r: VortexRegion = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    r.validate()?;
    Ok(r)
}

const GRID_MAGIC: &str = "# ccdyn gridded-vorticity v1";

/// Grid snapshot in the same columnar style: header `(length, n)` then
/// `(i, j, omega)` rows.
pub fn grid_to_csv(grid: &GriddedVorticity) -> String {
    let mut s = String::new();
    s.push_str(GRID_MAGIC);
    s.push('\n');
    s.push_str("# length,n\n");
    let _ = writeln!(s, "{},{}", grid.length, grid.n);
    s.push_str("# i,j,omega\n");
    for j in 0..grid.n {
        for i in 0..grid.n {
            let _ = writeln!(s, "{i},{j},{}", grid.at(i, j));
        }
    }
    s
}

pub fn grid_from_csv(text: &str) -> Result<GriddedVorticity> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    if lines.next().map(str::trim) != Some(GRID_MAGIC) {
        return Err(Error::Parse("missing grid header".into()));
    }
    let mut data = lines.filter(|l| !l.starts_with('#'));
    let head = data.next().ok_or_else(|| Error::Parse("missing header row".into()))?;
    let hv: Vec<&str> = head.split(',').collect();
    if hv.len() != 2 {
        return Err(Error::Parse("grid header needs 2 fields".into()));
    }
    let length = parse_f(hv[0])?;
    let n = parse_u(hv[1])?;
    let mut omega = vec![f64::NAN; n * n];
    let mut count = 0;
    for row in data {
        let v: Vec<&str> = row.split(',').collect();
        if v.len() != 3 {
            return Err(Error::Parse(format!("bad grid row '{row}'")));
        }
        let (i, j) = (parse_u(v[0])?, parse_u(v[1])?);
        if i >= n || j >= n {
            return Err(Error::Parse("grid index out of range".into()));
        }
        omega[j * n + i] = parse_f(v[2])?;
        count += 1;
    }
    if count != n * n {
        return Err(Error::Parse("grid is incomplete".into()));
    }
    GriddedVorticity::new(length, n, omega)
}

fn parse_f(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("'{s}': {e}")))
}

fn parse_u(s: &str) -> Result<usize> {
    s.trim().parse::<usize>().map_err(|e| Error::Parse(format!("'{s}': {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_region(n_phi: usize, n_w: usize) -> VortexRegion {
        let (m, r) = (1.0, 1.0);
        let field = PolarContourField::from_fn(n_phi, m, n_w, |_, w| 0.5 * r * r * (m / w).ln()).unwrap();
        VortexRegion::new(Point::ORIGIN, m, field).unwrap()
    }

    #[test]
    fn sampler_inverts_gaussian() {
        let g = |p: Point| (-(p.x * p.x + p.y * p.y)).exp();
        let (reg, rep) = contour_field_from_sampler(&g, Point::ORIGIN, 1.0, 16, 12, RayOptions::default()).unwrap();
        assert_eq!(rep.non_monotone_rays, 0);
        for m in 0..16 {
            for (i, &w) in reg.field.levels.iter().enumerate() {
                let exact = (1.0f64 / w).ln().sqrt();
                assert!((reg.field.rho(m, i) - exact).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn sampler_reports_rankine_radius() {
        let g = |p: Point| if p.norm() < 0.8 { 2.0 } else { 0.0 };
        let (reg, _) = contour_field_from_sampler(&g, Point::ORIGIN, 2.0, 8, 5, RayOptions::default()).unwrap();
        for m in 0..8 {
            for i in 0..5 {
                assert!((reg.field.rho(m, i) - 0.8).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sampler_flags_non_monotone_rays_and_missing_exit() {
        // A ring beyond the core makes every ray cross the low levels twice.
        let g = |p: Point| {
            let r = p.norm();
            (-r * r).exp() + 0.5 * (-(r - 3.0).powi(2) * 20.0).exp()
        };
        let (_, rep) = contour_field_from_sampler(&g, Point::ORIGIN, 1.0, 8, 6, RayOptions::default()).unwrap();
        assert!(rep.non_monotone_rays > 0);
        let flat = |_: Point| 1.0;
        let opts = RayOptions {
            max_horizon: 64.0,
            ..RayOptions::default()
        };
        assert!(matches!(
            contour_field_from_sampler(&flat, Point::ORIGIN, 2.0, 8, 4, opts),
            Err(Error::NoCrossing { .. })
        ));
    }

    #[test]
    fn reconstruct_gaussian_examples() {
        let reg = gaussian_region(32, 48);
        let r = (2.0f64).ln().sqrt();
        let v = reconstruct_vorticity(&reg, Point::polar(r, 0.7));
        assert_eq!(v.flag, ReconstructionFlag::Interior);
        assert!((v.value - 0.5).abs() < 1e-5);
        let c = reconstruct_vorticity(&reg, Point::ORIGIN);
        assert_eq!(c.flag, ReconstructionFlag::InnerClamp);
        assert_eq!(c.value, *reg.field.levels.last().unwrap());
    }

    #[test]
    fn reconstruct_outside_rankine_is_zero() {
        let field = PolarContourField::from_fn(16, 1.0, 6, |_, _| 0.5).unwrap();
        let reg = VortexRegion::new(Point::ORIGIN, 1.0, field).unwrap();
        let v = reconstruct_vorticity(&reg, Point::new(2.0, 0.0));
        assert_eq!(v.value, 0.0);
        assert_eq!(v.flag, ReconstructionFlag::OutsideSupport);
    }

    #[test]
    fn area_examples() {
        let circle = PolarContourField::from_fn(16, 1.0, 4, |_, w| 0.5 * (1.5 - w)).unwrap();
        let w = circle.levels[1];
        assert!((area_function(&circle, w).unwrap() - PI * (1.5 - w)).abs() < 1e-13);
        let (a, b) = (1.5, 1.0);
        let ell = PolarContourField::from_fn(256, 1.0, 3, |phi, w| {
            let r2 = (a * b) * (a * b) / ((b * phi.cos()).powi(2) + (a * phi.sin()).powi(2));
            0.5 * r2 * (2.0 - w)
        })
        .unwrap();
        let w = ell.levels[0];
        assert!((area_function(&ell, w).unwrap() - PI * a * b * (2.0 - w)).abs() < 1e-8);
        let g = gaussian_region(16, 48);
        for &w in &[0.1, 0.5, 0.9] {
            let err = (area_function(&g.field, w).unwrap() - PI * (1.0f64 / w).ln()).abs();
            assert!(err < 1e-4, "w={w} err={err}");
        }
        assert!(matches!(area_function(&g.field, 0.99999), Err(Error::LevelOutOfRange(_))));
    }

    #[test]
    fn csv_and_json_round_trip_bitwise() {
        let mut reg = gaussian_region(8, 5);
        reg.center = Point::new(0.1 + 0.2, -1.0 / 3.0);
        let back = region_from_csv(&region_to_csv(&reg)).unwrap();
        assert_eq!(back, reg);
        for (a, b) in back.field.zeta.iter().zip(&reg.field.zeta) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let back = region_from_json(&region_to_json(&reg)).unwrap();
        assert_eq!(back, reg);
        let grid = GriddedVorticity::from_fn(4.0, 8, |p| (-(p.x * p.x + p.y * p.y)).exp() / 3.0);
        assert_eq!(grid_from_csv(&grid_to_csv(&grid)).unwrap(), grid);
    }
}
