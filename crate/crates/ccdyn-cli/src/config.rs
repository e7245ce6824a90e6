//! Scenario files: versioned TOML.

use crate::CliError;
use ccdyn::dynamics::PerturbationModel;
use ccdyn::geometry::{
    grid_from_csv, region_from_csv, region_from_json, GriddedVorticity, PolarContourField, Point, VortexRegion,
};
use ccdyn::invariants::CasimirFn;
use serde::Deserialize;
use std::path::{Path, PathBuf};

/// Schema version accepted by this build.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Monopole,
    Dipole,
    Patch,
    Satellite,
    Perturbation,
    SpectralReference,
    CrossValidate,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema: u32,
    pub kind: Kind,
    #[serde(default)]
    pub name: Option<String>,
    pub time: TimeConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub initial: Option<InitialCondition>,
    #[serde(default)]
    pub regions: Vec<InitialCondition>,
    #[serde(default)]
    pub satellite: Option<SatelliteConfig>,
    #[serde(default)]
    pub perturbation: Option<PerturbationConfig>,
    #[serde(default)]
    pub spectral: Option<SpectralConfig>,
    #[serde(default)]
    pub probes: ProbeConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Seeds randomized test-point selection only.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_end: f64,
    pub dt: f64,
    /// Steps between recorded snapshots.
    #[serde(default = "default_every")]
    pub output_every: usize,
}

fn default_every() -> usize {
    100
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_n_phi")]
    pub n_phi: usize,
    #[serde(default = "default_n_w")]
    pub n_w: usize,
}

fn default_n_phi() -> usize {
    64
}

fn default_n_w() -> usize {
    16
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n_phi: default_n_phi(),
            n_w: default_n_w(),
        }
    }
}

/// Named analytic families, or a contour-field file.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialCondition {
    /// `Ω = M exp(−r²/R²)`.
    Gaussian {
        peak: f64,
        radius: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    /// `Ω = M exp(−r² / (R² (1 + δ cos k(φ − angle))))`.
    PerturbedGaussian {
        peak: f64,
        radius: f64,
        delta: f64,
        #[serde(default = "default_mode")]
        mode: u32,
        #[serde(default)]
        angle: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    /// `Ω = M (1 − r²/R²)₊`.
    Paraboloid {
        peak: f64,
        radius: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    /// `ρ = R(φ) (ln(M/w))^ε` with `R` an ellipse of semi-axes `a`, `b`.
    ScaledEllipse {
        peak: f64,
        a: f64,
        b: f64,
        eps: f64,
        #[serde(default)]
        angle: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    /// Uniform elliptic patch (the `patch` kind and smoothed spectral data).
    EllipsePatch {
        peak: f64,
        a: f64,
        b: f64,
        #[serde(default)]
        angle: f64,
    },
    /// Contour field (`.csv` or `.json`) or, for spectral runs, a grid CSV.
    File { path: PathBuf },
}

fn default_mode() -> u32 {
    2
}

fn ellipse_radius(a: f64, b: f64, phi: f64) -> f64 {
    a * b / ((b * phi.cos()).powi(2) + (a * phi.sin()).powi(2)).sqrt()
}

impl InitialCondition {
    pub fn peak(&self) -> Option<f64> {
        match self {
            Self::Gaussian { peak, .. }
            | Self::PerturbedGaussian { peak, .. }
            | Self::Paraboloid { peak, .. }
            | Self::ScaledEllipse { peak, .. }
            | Self::EllipsePatch { peak, .. } => Some(*peak),
            Self::File { .. } => None,
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.into()));
        match self {
            Self::Gaussian { peak, radius, .. } | Self::Paraboloid { peak, radius, .. } => {
                if *peak == 0.0 || !(*radius > 0.0) {
                    return bad("peak must be non-zero and radius positive");
                }
            }
            Self::PerturbedGaussian {
                peak, radius, delta, mode, ..
            } => {
                if *peak == 0.0 || !(*radius > 0.0) || !(delta.abs() < 1.0) || *mode == 0 {
                    return bad("perturbed-gaussian needs peak ≠ 0, radius > 0, |delta| < 1, mode ≥ 1");
                }
            }
            Self::ScaledEllipse { peak, a, b, eps, .. } => {
                if *peak == 0.0 || !(*a > 0.0 && *b > 0.0) || !(*eps > 0.0 && *eps <= 0.5) {
                    return bad("scaled-ellipse needs peak ≠ 0, a, b > 0 and 0 < eps ≤ 0.5");
                }
            }
            Self::EllipsePatch { peak, a, b, .. } => {
                if *peak == 0.0 || !(*a > 0.0 && *b > 0.0) {
                    return bad("ellipse-patch needs peak ≠ 0 and a, b > 0");
                }
            }
            Self::File { .. } => {}
        }
        Ok(())
    }

    fn center(&self) -> Point {
        match self {
            Self::Gaussian { center, .. }
            | Self::PerturbedGaussian { center, .. }
            | Self::Paraboloid { center, .. }
            | Self::ScaledEllipse { center, .. } => Point::new(center[0], center[1]),
            _ => Point::ORIGIN,
        }
    }

    /// Contour field about the family's peak.
    pub fn region(&self, n_phi: usize, n_w: usize, base: &Path) -> Result<VortexRegion, CliError> {
        let field = match *self {
            Self::Gaussian { peak, radius, .. } => {
                PolarContourField::from_fn(n_phi, peak, n_w, |_, w| 0.5 * radius * radius * (peak / w).ln())
            }
            Self::PerturbedGaussian {
                peak,
                radius,
                delta,
                mode,
                angle,
                ..
            } => PolarContourField::from_fn(n_phi, peak, n_w, |phi, w| {
                0.5 * radius * radius * (1.0 + delta * (mode as f64 * (phi - angle)).cos()) * (peak / w).ln()
            }),
            Self::Paraboloid { peak, radius, .. } => {
                PolarContourField::from_fn(n_phi, peak, n_w, |_, w| 0.5 * radius * radius * (1.0 - w / peak))
            }
            Self::ScaledEllipse {
                peak, a, b, eps, angle, ..
            } => PolarContourField::from_fn(n_phi, peak, n_w, |phi, w| {
                0.5 * ellipse_radius(a, b, phi - angle).powi(2) * (peak / w).ln().powf(2.0 * eps)
            }),
            Self::EllipsePatch { .. } => {
                return Err(CliError::Config(
                    "ellipse-patch is a uniform patch, not a smooth contour field".into(),
                ))
            }
            Self::File { ref path } => {
                let p = resolve(base, path);
                let text = std::fs::read_to_string(&p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                let ext = p.extension().and_then(|e| e.to_str()).unwrap_or("");
                let reg = if ext == "json" {
                    region_from_json(&text)
                } else {
                    region_from_csv(&text)
                };
                return reg.map_err(|e| CliError::Config(format!("{}: {e}", p.display())));
            }
        };
        let field = field.map_err(|e| CliError::Config(e.to_string()))?;
        let peak = self.peak().expect("analytic family");
        VortexRegion::new(self.center(), peak, field).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Vorticity of the family at a point.
    pub fn vorticity(&self, p: Point) -> Option<f64> {
        let d = p - self.center();
        let r2 = d.x * d.x + d.y * d.y;
        let phi = d.angle();
        Some(match *self {
            Self::Gaussian { peak, radius, .. } => peak * (-r2 / (radius * radius)).exp(),
            Self::PerturbedGaussian {
                peak,
                radius,
                delta,
                mode,
                angle,
                ..
            } => peak * (-r2 / (radius * radius * (1.0 + delta * (mode as f64 * (phi - angle)).cos()))).exp(),
            Self::Paraboloid { peak, radius, .. } => peak * (1.0 - r2 / (radius * radius)).max(0.0),
            Self::ScaledEllipse {
                peak, a, b, eps, angle, ..
            } => peak * (-(r2.sqrt() / ellipse_radius(a, b, phi - angle)).powf(1.0 / eps)).exp(),
            Self::EllipsePatch { .. } | Self::File { .. } => return None,
        })
    }

    /// Gridded vorticity on `[−L/2, L/2)²`.
    pub fn grid(&self, length: f64, n: usize, base: &Path) -> Result<GriddedVorticity, CliError> {
        match self {
            Self::File { path } => {
                let p = resolve(base, path);
                let text = std::fs::read_to_string(&p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                grid_from_csv(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
            }
            Self::EllipsePatch { peak, a, b, angle } => {
                let patch = ccdyn::geometry::PatchContour::ellipse(Point::ORIGIN, *peak, *a, *b, *angle, 256)
                    .map_err(|e| CliError::Config(e.to_string()))?;
                Ok(ccdyn::oracles::smoothed_patch_grid(&patch, length, n))
            }
            _ => Ok(GriddedVorticity::from_fn(length, n, |p| self.vorticity(p).unwrap_or(0.0))),
        }
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SatelliteConfig {
    pub big_r: f64,
    pub k: f64,
    pub m: f64,
    /// `[w, r0]` pairs.
    pub levels: Vec<[f64; 2]>,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    2048
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelName {
    #[default]
    Consistent,
    Literal,
}

impl From<ModelName> for PerturbationModel {
    fn from(m: ModelName) -> Self {
        match m {
            ModelName::Consistent => PerturbationModel::Consistent,
            ModelName::Literal => PerturbationModel::Literal,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    pub eps: f64,
    pub peak: f64,
    /// Semi-axes of the elliptic base contour.
    pub a: f64,
    pub b: f64,
    #[serde(default)]
    pub model: ModelName,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralConfig {
    pub n: usize,
    pub length: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    /// Level indices for area probes; eight evenly spread indices if empty.
    #[serde(default)]
    pub area_levels: Vec<usize>,
    /// Thresholds for component counts.
    #[serde(default)]
    pub component_levels: Vec<f64>,
    /// Casimir densities: "area", "pow<k>", "exp<a>".
    #[serde(default)]
    pub casimirs: Vec<String>,
    /// Levels drawn in SVG plots and used for contour comparison.
    #[serde(default)]
    pub plot_levels: Vec<f64>,
    /// Skip the energy (costly on fine dipole grids).
    #[serde(default)]
    pub skip_hamiltonian: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_out() }
    }
}

pub fn parse_casimir(s: &str) -> Result<CasimirFn, CliError> {
    if s == "area" {
        return Ok(CasimirFn::Area);
    }
    if let Some(k) = s.strip_prefix("pow") {
        return k
            .parse()
            .map(CasimirFn::Power)
            .map_err(|_| CliError::Config(format!("bad casimir {s:?}")));
    }
    if let Some(a) = s.strip_prefix("exp") {
        return a
            .parse()
            .map(CasimirFn::Exp)
            .map_err(|_| CliError::Config(format!("bad casimir {s:?}")));
    }
    Err(CliError::Config(format!("unknown casimir {s:?}")))
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn steps(&self) -> usize {
        (self.time.t_end / self.time.dt).round() as usize
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.schema != SCHEMA_VERSION {
            return bad(format!("unsupported schema {} (expected {SCHEMA_VERSION})", self.schema));
        }
        let t = &self.time;
        if !(t.dt > 0.0 && t.t_end > 0.0 && t.dt < t.t_end) {
            return bad("time: need 0 < dt < t_end".into());
        }
        if self.grid.n_phi < 4 || self.grid.n_phi % 2 != 0 || self.grid.n_w == 0 {
            return bad("grid: n_phi must be even and ≥ 4, n_w ≥ 1".into());
        }
        for c in &self.probes.casimirs {
            parse_casimir(c)?;
        }
        let need_initial = |c: &Option<InitialCondition>| -> Result<(), CliError> {
            match c {
                Some(ic) => ic.validate(),
                None => Err(CliError::Config(format!("{:?} needs an [initial] section", self.kind))),
            }
        };
        match self.kind {
            Kind::Monopole | Kind::Patch => need_initial(&self.initial)?,
            Kind::Dipole => {
                if self.regions.len() != 2 {
                    return bad("dipole needs exactly two [[regions]]".into());
                }
                for r in &self.regions {
                    r.validate()?;
                }
                if let (Some(a), Some(b)) = (self.regions[0].peak(), self.regions[1].peak()) {
                    if a * b > 0.0 {
                        return bad("dipole regions must have opposite signs".into());
                    }
                }
            }
            Kind::Satellite => {
                let s = self
                    .satellite
                    .as_ref()
                    .ok_or_else(|| CliError::Config("satellite needs a [satellite] section".into()))?;
                if s.levels.is_empty() || s.samples < 8 {
                    return bad("satellite: need at least one level and 8 samples".into());
                }
            }
            Kind::Perturbation => {
                let p = self
                    .perturbation
                    .as_ref()
                    .ok_or_else(|| CliError::Config("perturbation needs a [perturbation] section".into()))?;
                if !(p.eps > 0.0 && p.eps <= 0.5 && p.peak > 0.0 && p.a > 0.0 && p.b > 0.0) {
                    return bad("perturbation: need 0 < eps ≤ 0.5, peak > 0, a, b > 0".into());
                }
            }
            Kind::SpectralReference | Kind::CrossValidate => {
                need_initial(&self.initial)?;
                let s = self
                    .spectral
                    .as_ref()
                    .ok_or_else(|| CliError::Config("spectral runs need a [spectral] section".into()))?;
                if s.n < 8 || s.n % 2 != 0 || !(s.length > 0.0) {
                    return bad("spectral: n must be even and ≥ 8, length > 0".into());
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_dt_is_a_config_error() {
        let text = "schema = 1\nkind = \"patch\"\n[time]\nt_end = 1.0\n";
        assert!(matches!(ScenarioConfig::from_toml(text), Err(CliError::Config(_))));
    }

    #[test]
    fn same_sign_dipole_is_rejected() {
        let text = r#"
schema = 1
kind = "dipole"
[time]
t_end = 1.0
dt = 0.01
[[regions]]
family = "gaussian"
peak = 1.0
radius = 0.5
center = [1.0, 0.0]
[[regions]]
family = "gaussian"
peak = 1.0
radius = 0.5
center = [-1.0, 0.0]
"#;
        assert!(matches!(ScenarioConfig::from_toml(text), Err(CliError::Config(_))));
    }
}
