//! Scenario runners: each kind writes state snapshots, `invariants.csv`,
//! SVG plots and `summary.json` into the output directory.

use crate::config::{parse_casimir, InitialCondition, Kind, ScenarioConfig};
use crate::output::{default_levels, patch_to_csv, plot_contours, satellite_to_csv, Snapshot};
use crate::CliError;
use ccdyn::dynamics::{
    quadrupole_phase, run_recorded, run_satellite, ContourStepper, PatchStepper, PerturbationState, PhaseTracker,
    SatelliteScenario, SimState,
};
use ccdyn::geometry::{grid_to_csv, phi_node, region_to_csv, PatchContour, Point, VortexSystem};
use ccdyn::invariants::{
    default_probe_levels, locate_critical_points, relative_drift, report_grid, report_system, reports_to_csv,
    CriticalKind, CriticalOptions, InvariantReport, ReportOptions, INVARIANTS_CSV_VERSION,
};
use ccdyn::kernels::{QuadratureSpec, SingularityMode};
use ccdyn::oracles::{compare_contours, kirchhoff_rate, ContourSource, SpectralSolver, SpectralState};
use num_complex::Complex64;
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

/// Where and how a scenario runs.
#[derive(Debug, Clone)]
pub struct RunContext {
    /// Directory that relative paths in the config resolve against.
    pub base: PathBuf,
    pub out: PathBuf,
    pub threads: usize,
}

/// Result of a finished (or halted) run, as written to `summary.json`.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub value: Value,
    pub halted: Option<String>,
}

struct Writer {
    out: PathBuf,
}

impl Writer {
    fn put(&self, name: &str, text: &str) -> Result<(), CliError> {
        fs::write(self.out.join(name), text).map_err(|e| CliError::Io(format!("{name}: {e}")))
    }
}

/// Runs one scenario. Output files are written even when the simulation
/// halts; the halt is then reported through `RunSummary::halted`.
pub fn run_scenario(cfg: &ScenarioConfig, ctx: &RunContext) -> Result<RunSummary, CliError> {
    cfg.validate()?;
    fs::create_dir_all(&ctx.out).map_err(|e| CliError::Io(format!("{}: {e}", ctx.out.display())))?;
    let w = Writer { out: ctx.out.clone() };
    let mut diag = Map::new();
    let mut files = Map::new();
    let outcome = match cfg.kind {
        Kind::Monopole | Kind::Dipole => run_contour(cfg, ctx, &w, &mut diag, &mut files),
        Kind::Patch => run_patch(cfg, &w, &mut diag, &mut files),
        Kind::Satellite => run_sat(cfg, &w, &mut diag, &mut files),
        Kind::Perturbation => run_perturbation(cfg, ctx, &w, &mut diag, &mut files),
        Kind::SpectralReference => run_spectral(cfg, ctx, &w, &mut diag, &mut files),
        Kind::CrossValidate => run_cross(cfg, ctx, &w, &mut diag, &mut files),
    };
    let (status, halted) = match outcome {
        Ok(()) => ("ok", None),
        Err(CliError::Halt(m)) => ("halted", Some(m)),
        Err(e) => return Err(e),
    };
    let mut value = json!({
        "schema": crate::config::SCHEMA_VERSION,
        "kind": format!("{:?}", cfg.kind),
        "name": cfg.name.clone().unwrap_or_default(),
        "status": status,
        "diagnostics": Value::Object(diag),
        "files": Value::Object(files),
    });
    if let Some(m) = &halted {
        value["error"] = json!({ "kind": "simulation-halt", "message": m });
    }
    let text = serde_json::to_string_pretty(&value).map_err(|e| CliError::Io(e.to_string()))?;
    w.put("summary.json", &text)?;
    Ok(RunSummary { value, halted })
}

fn report_options(cfg: &ScenarioConfig, n_w: usize) -> Result<ReportOptions, CliError> {
    let p = &cfg.probes;
    let casimirs = if p.casimirs.is_empty() {
        ReportOptions::default().casimirs
    } else {
        p.casimirs.iter().map(|c| parse_casimir(c)).collect::<Result<_, _>>()?
    };
    Ok(ReportOptions {
        casimirs,
        area_levels: if p.area_levels.is_empty() {
            default_probe_levels(n_w)
        } else {
            p.area_levels.clone()
        },
        component_levels: p.component_levels.clone(),
        with_hamiltonian: !p.skip_hamiltonian,
    })
}

fn halt(e: ccdyn::error::Error) -> CliError {
    CliError::Halt(e.to_string())
}

fn sim(e: ccdyn::error::Error) -> CliError {
    CliError::Config(e.to_string())
}

fn plot_levels(cfg: &ScenarioConfig, peaks: &[f64]) -> Vec<f64> {
    if cfg.probes.plot_levels.is_empty() {
        default_levels(peaks)
    } else {
        cfg.probes.plot_levels.clone()
    }
}

fn write_system(w: &Writer, tag: &str, sys: &VortexSystem) -> Result<Vec<String>, CliError> {
    let mut names = Vec::new();
    for (k, r) in sys.regions.iter().enumerate() {
        let name = format!("state_{tag}_r{k}.csv");
        w.put(&name, &region_to_csv(r))?;
        names.push(name);
    }
    Ok(names)
}

/// Drift summary shared by the contour-field kinds.
fn report_drifts(reports: &[InvariantReport], diag: &mut Map<String, Value>) {
    if reports.is_empty() {
        return;
    }
    let h: Vec<f64> = reports.iter().map(|r| r.hamiltonian).collect();
    if h.iter().all(|v| v.is_finite()) {
        diag.insert("hamiltonian_rel_drift".into(), json!(relative_drift(&h)));
    }
    let c0 = reports[0].first_moment;
    let dc = reports.iter().map(|r| (r.first_moment - c0).norm()).fold(0.0, f64::max);
    diag.insert("first_moment_abs_drift".into(), json!(dc));
    let mut cas = Map::new();
    for (k, (name, _)) in reports[0].casimir_samples.iter().enumerate() {
        let v: Vec<f64> = reports.iter().map(|r| r.casimir_samples[k].1).collect();
        cas.insert(name.clone(), json!(relative_drift(&v)));
    }
    diag.insert("casimir_rel_drift".into(), Value::Object(cas));
    let na = reports[0].area_probes.len();
    let da = (0..na)
        .map(|k| relative_drift(&reports.iter().map(|r| r.area_probes[k].1).collect::<Vec<_>>()))
        .fold(0.0, f64::max);
    diag.insert("area_probe_rel_drift".into(), json!(da));
    let p0 = &reports[0].peak_positions;
    let disp = reports
        .iter()
        .flat_map(|r| r.peak_positions.iter().zip(p0).map(|(a, b)| a.dist(*b)))
        .fold(0.0, f64::max);
    diag.insert("center_displacement".into(), json!(disp));
}

fn run_contour(
    cfg: &ScenarioConfig,
    ctx: &RunContext,
    w: &Writer,
    diag: &mut Map<String, Value>,
    files: &mut Map<String, Value>,
) -> Result<(), CliError> {
    let g = &cfg.grid;
    let ics: Vec<&InitialCondition> = match cfg.kind {
        Kind::Monopole => vec![cfg.initial.as_ref().expect("validated")],
        _ => cfg.regions.iter().collect(),
    };
    let regions = ics
        .iter()
        .map(|ic| ic.region(g.n_phi, g.n_w, &ctx.base))
        .collect::<Result<Vec<_>, _>>()?;
    if regions.iter().any(|r| r.field.n_phi != g.n_phi) {
        return Err(CliError::Config("contour-field file disagrees with grid.n_phi".into()));
    }
    if cfg.kind == Kind::Dipole && regions[0].peak * regions[1].peak > 0.0 {
        return Err(CliError::Config("dipole regions must have opposite signs".into()));
    }
    let system = VortexSystem::new(regions).map_err(sim)?;
    let n_w = system.regions[0].field.n_w();
    let q = QuadratureSpec::new(g.n_phi, SingularityMode::SplitLog).with_threads(ctx.threads);
    let stepper = ContourStepper::with_quadrature(q.clone());
    let opts = report_options(cfg, n_w)?;
    let peaks: Vec<f64> = system.regions.iter().map(|r| r.peak).collect();
    let levels = plot_levels(cfg, &peaks);
    w.put(
        "contours_initial.svg",
        &plot_contours(Snapshot::System(&system), &levels, "t = 0"),
    )?;
    let mut snaps: Vec<SimState> = Vec::new();
    let result = run_recorded(
        &stepper,
        SimState::new(system),
        cfg.time.dt,
        cfg.steps(),
        cfg.time.output_every,
        &mut snaps,
    );
    let mut reports = Vec::with_capacity(snaps.len());
    for (k, s) in snaps.iter().enumerate() {
        write_system(w, &format!("{k:04}"), &s.system)?;
        reports.push(report_system(&q, &s.system, s.t, &opts).map_err(halt)?);
    }
    w.put("invariants.csv", &reports_to_csv(&reports))?;
    report_drifts(&reports, diag);
    let last = snaps.last().expect("initial state recorded");
    diag.insert("t_final".into(), json!(last.t));
    diag.insert("steps".into(), json!(last.steps));
    if last.system.len() == 2 {
        let first = &snaps[0].system;
        let sum0 = first.regions[0].center + first.regions[1].center;
        let drift = snaps
            .iter()
            .map(|s| (s.system.regions[0].center + s.system.regions[1].center).dist(sum0))
            .fold(0.0, f64::max);
        diag.insert("center_sum_drift".into(), json!(drift));
        let sep0 = first.regions[0].center - first.regions[1].center;
        let sep1 = last.system.regions[0].center - last.system.regions[1].center;
        if last.t > 0.0 {
            let turn = (Complex64::new(sep1.x, sep1.y) / Complex64::new(sep0.x, sep0.y)).arg();
            diag.insert("pair_rotation_rate".into(), json!(turn / last.t));
            let mid0 = (first.regions[0].center + first.regions[1].center) * 0.5;
            let mid1 = (last.system.regions[0].center + last.system.regions[1].center) * 0.5;
            diag.insert("midpoint_velocity".into(), json!([(mid1.x - mid0.x) / last.t, (mid1.y - mid0.y) / last.t]));
        }
    }
    let finals = write_system(w, "final", &last.system)?;
    files.insert("final_state".into(), json!(finals));
    files.insert("final_format".into(), json!("region"));
    w.put(
        "contours_final.svg",
        &plot_contours(Snapshot::System(&last.system), &levels, &format!("t = {:.4}", last.t)),
    )?;
    result.map(|_| ()).map_err(halt)
}

fn patch_report(p: &PatchContour, t: f64) -> InvariantReport {
    let n = p.rho.len();
    let h = 2.0 * PI / n as f64;
    let area = p.area();
    let mut c = Complex64::new(p.pole.x, p.pole.y) * area;
    for (m, r) in p.rho.iter().enumerate() {
        c += Complex64::from_polar(h * r * r * r / 3.0, phi_node(m, n));
    }
    InvariantReport {
        t,
        hamiltonian: f64::NAN,
        first_moment: c * p.vorticity,
        casimir_samples: vec![("area".into(), area)],
        peak_values: vec![p.vorticity],
        peak_positions: vec![p.pole],
        n_of_w: Vec::new(),
        area_probes: vec![(p.vorticity, area)],
    }
}

fn run_patch(
    cfg: &ScenarioConfig,
    w: &Writer,
    diag: &mut Map<String, Value>,
    files: &mut Map<String, Value>,
) -> Result<(), CliError> {
    let (peak, a, b, angle) = match cfg.initial.as_ref().expect("validated") {
        InitialCondition::EllipsePatch { peak, a, b, angle } => (*peak, *a, *b, *angle),
        _ => return Err(CliError::Config("patch runs need family = \"ellipse-patch\"".into())),
    };
    let n = cfg.grid.n_phi;
    let mut p = PatchContour::ellipse(Point::ORIGIN, peak, a, b, angle, n).map_err(sim)?;
    let stepper = PatchStepper::new(n);
    let mut tracker = PhaseTracker::default();
    let phase0 = tracker.update(quadrupole_phase(&p.rho));
    let mut phase = phase0;
    let title = |t: f64| format!("t = {t:.4}");
    w.put("contours_initial.svg", &plot_contours(Snapshot::Patch(&p), &[], &title(0.0)))?;
    let mut reports = vec![patch_report(&p, 0.0)];
    let mut rows = vec![(0.0, phase0)];
    w.put("state_0000.csv", &patch_to_csv(&p))?;
    let steps = cfg.steps();
    let every = cfg.time.output_every.max(1);
    let mut t = 0.0;
    let mut result = Ok(());
    for k in 1..=steps {
        match stepper.step(&p, cfg.time.dt, t) {
            Ok(next) => p = next,
            Err(e) => {
                result = Err(halt(e));
                break;
            }
        }
        t = k as f64 * cfg.time.dt;
        phase = tracker.update(quadrupole_phase(&p.rho));
        if k % every == 0 || k == steps {
            reports.push(patch_report(&p, t));
            rows.push((t, phase));
            w.put(&format!("state_{:04}.csv", reports.len() - 1), &patch_to_csv(&p))?;
        }
    }
    w.put("invariants.csv", &reports_to_csv(&reports))?;
    let mut ph = String::from("t,phase\n");
    for (t, v) in &rows {
        ph.push_str(&format!("{t:.17e},{v:.17e}\n"));
    }
    w.put("phase.csv", &ph)?;
    report_drifts(&reports, diag);
    diag.insert("t_final".into(), json!(t));
    if t > 0.0 {
        let rate = (phase - phase0) / t;
        diag.insert("rotation_rate".into(), json!(rate));
        if a != b {
            let exact = kirchhoff_rate(a.max(b), a.min(b), peak);
            diag.insert("kirchhoff_rate".into(), json!(exact));
            diag.insert("rotation_rate_rel_error".into(), json!((rate - exact).abs() / exact.abs()));
        }
    }
    w.put("state_final.csv", &patch_to_csv(&p))?;
    files.insert("final_state".into(), json!(["state_final.csv"]));
    files.insert("final_format".into(), json!("patch"));
    w.put("contours_final.svg", &plot_contours(Snapshot::Patch(&p), &[], &title(t)))?;
    result
}

fn run_sat(
    cfg: &ScenarioConfig,
    w: &Writer,
    diag: &mut Map<String, Value>,
    files: &mut Map<String, Value>,
) -> Result<(), CliError> {
    let s = cfg.satellite.as_ref().expect("validated");
    let scn = SatelliteScenario {
        big_r: s.big_r,
        k: s.k,
        levels: s.levels.iter().map(|l| (l[0], l[1])).collect(),
        m: s.m,
    };
    let strong = scn.validate().map_err(sim)?;
    let run = run_satellite(&scn, cfg.time.t_end, cfg.time.dt, s.samples).map_err(sim)?;
    let every = cfg.time.output_every.max(1);
    let mut csv = format!("{INVARIANTS_CSV_VERSION}\nt");
    for (lw, _) in &scn.levels {
        csv.push_str(&format!(",residual_w{lw},winding_w{lw}"));
    }
    csv.push('\n');
    let mut worst = 0.0f64;
    let mut written = 0;
    for (k, (t, cs)) in run.times.iter().zip(&run.contours).enumerate() {
        let mut row = format!("{t:.17e}");
        for c in cs {
            let r = c.implicit_residual(&scn, *t);
            worst = worst.max(r);
            row.push_str(&format!(",{r:.17e},{:.17e}", c.winding()));
        }
        csv.push_str(&row);
        csv.push('\n');
        if k % every == 0 || k + 1 == run.times.len() {
            w.put(&format!("state_{written:04}.csv"), &satellite_to_csv(cs))?;
            written += 1;
        }
    }
    w.put("invariants.csv", &csv)?;
    diag.insert("max_implicit_residual".into(), json!(worst));
    diag.insert("omega0".into(), json!(scn.omega0()));
    diag.insert("strong_satellite_warning".into(), json!(strong));
    let last = run.contours.last().expect("non-empty");
    let hist: Vec<Value> = last
        .iter()
        .map(|c| json!({ "w": c.w, "winding": c.winding(), "radial_histogram": c.radial_histogram(10) }))
        .collect();
    diag.insert("final_levels".into(), Value::Array(hist));
    let title = |t: f64| format!("t = {t:.4}");
    w.put(
        "contours_initial.svg",
        &plot_contours(Snapshot::Satellite(&run.contours[0]), &[], &title(0.0)),
    )?;
    w.put(
        "contours_final.svg",
        &plot_contours(Snapshot::Satellite(last), &[], &title(*run.times.last().unwrap_or(&0.0))),
    )?;
    w.put("state_final.csv", &satellite_to_csv(last))?;
    files.insert("final_state".into(), json!(["state_final.csv"]));
    files.insert("final_format".into(), json!("satellite"));
    Ok(())
}

fn run_perturbation(
    cfg: &ScenarioConfig,
    ctx: &RunContext,
    w: &Writer,
    diag: &mut Map<String, Value>,
    files: &mut Map<String, Value>,
) -> Result<(), CliError> {
    let p = cfg.perturbation.as_ref().expect("validated");
    let n = cfg.grid.n_phi;
    let n_w = cfg.grid.n_w;
    let r_phi: Vec<f64> = (0..n)
        .map(|m| {
            let phi = phi_node(m, n);
            p.a * p.b / ((p.b * phi.cos()).powi(2) + (p.a * phi.sin()).powi(2)).sqrt()
        })
        .collect();
    let init = PerturbationState::new(p.eps, p.peak, r_phi, p.model.into()).map_err(sim)?;
    let q = QuadratureSpec::new(n, SingularityMode::SplitLog).with_threads(ctx.threads);
    let opts = report_options(cfg, n_w)?;
    let levels = plot_levels(cfg, &[p.peak]);
    let steps = cfg.steps();
    let every = cfg.time.output_every.max(1);
    let mut st = init.clone();
    let mut reports = Vec::new();
    let mut result = Ok(());
    let snap = |st: &PerturbationState, k: usize, reports: &mut Vec<InvariantReport>| -> Result<VortexSystem, CliError> {
        let reg = st.contour_field(n_w, Some(&init)).map_err(halt)?;
        let sys = VortexSystem::monopole(reg);
        write_system(w, &format!("{k:04}"), &sys)?;
        reports.push(report_system(&q, &sys, st.t, &opts).map_err(halt)?);
        Ok(sys)
    };
    let first = snap(&st, 0, &mut reports)?;
    w.put(
        "contours_initial.svg",
        &plot_contours(Snapshot::System(&first), &levels, "t = 0"),
    )?;
    for k in 1..=steps {
        match ccdyn::dynamics::perturbation_step(&st, cfg.time.dt) {
            Ok(next) => st = next,
            Err(e) => {
                result = Err(halt(e));
                break;
            }
        }
        if k % every == 0 || k == steps {
            let idx = reports.len();
            snap(&st, idx, &mut reports)?;
        }
    }
    w.put("invariants.csv", &reports_to_csv(&reports))?;
    report_drifts(&reports, diag);
    let fin = VortexSystem::monopole(st.contour_field(n_w, Some(&init)).map_err(halt)?);
    let f = &fin.regions[0].field;
    let half = n / 2;
    let mut asym = 0.0f64;
    for m in 0..half {
        for i in 0..n_w {
            asym = asym.max((f.at(m, i) - f.at(m + half, i)).abs());
        }
    }
    diag.insert("t_final".into(), json!(st.t));
    diag.insert("central_symmetry_defect".into(), json!(asym));
    let base: Vec<f64> = st.rho0_sq.iter().map(|v| v.sqrt()).collect();
    let r0: Vec<f64> = init.rho0_sq.iter().map(|v| v.sqrt()).collect();
    if st.t > 0.0 {
        let rate = (quadrupole_phase(&base) - quadrupole_phase(&r0)) / st.t;
        diag.insert("base_rotation_rate".into(), json!(rate));
    }
    let finals = write_system(w, "final", &fin)?;
    files.insert("final_state".into(), json!(finals));
    files.insert("final_format".into(), json!("region"));
    w.put(
        "contours_final.svg",
        &plot_contours(Snapshot::System(&fin), &levels, &format!("t = {:.4}", st.t)),
    )?;
    result
}

fn critical_census(grid: &ccdyn::geometry::GriddedVorticity) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for p in locate_critical_points(grid, CriticalOptions::default()) {
        let k = match p.kind {
            CriticalKind::Maximum => "maximum",
            CriticalKind::Minimum => "minimum",
            CriticalKind::Saddle => "saddle",
            CriticalKind::Degenerate => "degenerate",
        };
        *m.entry(k.to_string()).or_insert(0) += 1;
    }
    m
}

fn run_spectral(
    cfg: &ScenarioConfig,
    ctx: &RunContext,
    w: &Writer,
    diag: &mut Map<String, Value>,
    files: &mut Map<String, Value>,
) -> Result<(), CliError> {
    let sp = cfg.spectral.as_ref().expect("validated");
    let ic = cfg.initial.as_ref().expect("validated");
    let grid = ic.grid(sp.length, sp.n, &ctx.base)?;
    if !grid.is_decayed() {
        diag.insert("boundary_ratio_warning".into(), json!(grid.boundary_ratio()));
    }
    let solver = SpectralSolver::for_grid(&grid).map_err(sim)?;
    let opts = report_options(cfg, 1)?;
    let peak = grid.omega.iter().fold(0.0f64, |a, v| if v.abs() > a.abs() { *v } else { a });
    let levels = plot_levels(cfg, &[peak]);
    w.put("contours_initial.svg", &plot_contours(Snapshot::Grid(&grid), &levels, "t = 0"))?;
    w.put("state_0000.csv", &grid_to_csv(&grid))?;
    let census0 = critical_census(&grid);
    let mut census_constant = true;
    let integrals = |g: &ccdyn::geometry::GriddedVorticity| -> (f64, f64) {
        let da = g.spacing() * g.spacing();
        (
            g.omega.iter().map(|v| v * v).sum::<f64>() * da,
            g.omega.iter().map(|v| v * v * v).sum::<f64>() * da,
        )
    };
    let mut st = SpectralState { grid, t: 0.0 };
    let mut reports = vec![report_grid(&st.grid, 0.0, solver.energy(&st.grid.omega), &opts).map_err(halt)?];
    let mut ens = vec![integrals(&st.grid)];
    let steps = cfg.steps();
    let every = cfg.time.output_every.max(1);
    let mut result = Ok(());
    for k in 1..=steps {
        match solver.step(&st, cfg.time.dt) {
            Ok(next) => st = next,
            Err(e) => {
                result = Err(halt(e));
                break;
            }
        }
        if k % every == 0 || k == steps {
            reports.push(report_grid(&st.grid, st.t, solver.energy(&st.grid.omega), &opts).map_err(halt)?);
            ens.push(integrals(&st.grid));
            census_constant &= critical_census(&st.grid) == census0;
        }
    }
    w.put("invariants.csv", &reports_to_csv(&reports))?;
    let e: Vec<f64> = reports.iter().map(|r| r.hamiltonian).collect();
    diag.insert("t_final".into(), json!(st.t));
    diag.insert("energy_rel_drift".into(), json!(relative_drift(&e)));
    diag.insert(
        "enstrophy_rel_drift".into(),
        json!(relative_drift(&ens.iter().map(|v| v.0).collect::<Vec<_>>())),
    );
    diag.insert(
        "cubic_casimir_drift".into(),
        json!(relative_drift(&ens.iter().map(|v| v.1).collect::<Vec<_>>())),
    );
    diag.insert("critical_points_initial".into(), json!(census0));
    diag.insert("critical_points_constant".into(), json!(census_constant));
    let n0: Vec<usize> = reports[0].n_of_w.iter().map(|x| x.1).collect();
    let n_const = reports.iter().all(|r| r.n_of_w.iter().map(|x| x.1).collect::<Vec<_>>() == n0);
    diag.insert("n_of_w_constant".into(), json!(n_const));
    let pk0 = reports[0].peak_values.clone();
    let pk_drift = reports
        .iter()
        .filter(|r| r.peak_values.len() == pk0.len())
        .flat_map(|r| r.peak_values.iter().zip(&pk0).map(|(a, b)| ((a - b) / b).abs()))
        .fold(0.0, f64::max);
    diag.insert("peak_value_rel_drift".into(), json!(pk_drift));
    w.put("state_final.csv", &grid_to_csv(&st.grid))?;
    files.insert("final_state".into(), json!(["state_final.csv"]));
    files.insert("final_format".into(), json!("grid"));
    w.put(
        "contours_final.svg",
        &plot_contours(Snapshot::Grid(&st.grid), &levels, &format!("t = {:.4}", st.t)),
    )?;
    result
}

fn run_cross(
    cfg: &ScenarioConfig,
    ctx: &RunContext,
    w: &Writer,
    diag: &mut Map<String, Value>,
    files: &mut Map<String, Value>,
) -> Result<(), CliError> {
    let sp = cfg.spectral.as_ref().expect("validated");
    let ic = cfg.initial.as_ref().expect("validated");
    let g = &cfg.grid;
    let region = ic.region(g.n_phi, g.n_w, &ctx.base)?;
    let grid = ic.grid(sp.length, sp.n, &ctx.base)?;
    let solver = SpectralSolver::for_grid(&grid).map_err(sim)?;
    let q = QuadratureSpec::new(g.n_phi, SingularityMode::SplitLog).with_threads(ctx.threads);
    let stepper = ContourStepper::with_quadrature(q);
    let levels = plot_levels(cfg, &[region.peak]);
    let dx = grid.spacing();
    let mut cs = SimState::new(VortexSystem::monopole(region));
    let mut st = SpectralState { grid, t: 0.0 };
    let steps = cfg.steps();
    let every = cfg.time.output_every.max(1);
    let mut csv = String::from("# ccdyn cross-validation v1\nt");
    for l in &levels {
        csv.push_str(&format!(",hausdorff_cells_w{l}"));
    }
    csv.push('\n');
    let mut worst = vec![0.0f64; levels.len()];
    let mut result = Ok(());
    for k in 0..=steps {
        if k > 0 {
            let next = solver.step(&st, cfg.time.dt).and_then(|s| Ok((s, stepper.step(&cs, cfg.time.dt)?)));
            match next {
                Ok((a, b)) => {
                    st = a;
                    cs = b;
                }
                Err(e) => {
                    result = Err(halt(e));
                    break;
                }
            }
        }
        if k % every == 0 || k == steps {
            let d = compare_contours(ContourSource::Field(&cs.system.regions[0]), ContourSource::Grid(&st.grid), &levels)
                .map_err(halt)?;
            csv.push_str(&format!("{:.17e}", cs.t));
            for (j, l) in d.iter().enumerate() {
                worst[j] = worst[j].max(l.hausdorff / dx);
                csv.push_str(&format!(",{:.17e}", l.hausdorff / dx));
            }
            csv.push('\n');
        }
    }
    w.put("invariants.csv", &csv)?;
    let per_level: Vec<Value> = levels
        .iter()
        .zip(&worst)
        .map(|(l, d)| json!({ "w": l, "max_hausdorff_cells": d }))
        .collect();
    diag.insert("t_final".into(), json!(cs.t));
    diag.insert("hausdorff".into(), Value::Array(per_level));
    diag.insert("max_hausdorff_cells".into(), json!(worst.iter().cloned().fold(0.0, f64::max)));
    let finals = write_system(w, "final", &cs.system)?;
    w.put("state_final_grid.csv", &grid_to_csv(&st.grid))?;
    files.insert("final_state".into(), json!(finals));
    files.insert("final_format".into(), json!("region"));
    files.insert("final_grid".into(), json!("state_final_grid.csv"));
    w.put(
        "contours_final.svg",
        &plot_contours(Snapshot::System(&cs.system), &levels, &format!("contour field, t = {:.4}", cs.t)),
    )?;
    w.put(
        "contours_final_spectral.svg",
        &plot_contours(Snapshot::Grid(&st.grid), &levels, &format!("spectral, t = {:.4}", st.t)),
    )?;
    result
}

/// Loads the final state named in a run directory's `summary.json`.
pub enum LoadedState {
    Region(ccdyn::geometry::VortexRegion),
    Grid(ccdyn::geometry::GriddedVorticity),
}

impl LoadedState {
    fn source(&self) -> ContourSource<'_> {
        match self {
            LoadedState::Region(r) => ContourSource::Field(r),
            LoadedState::Grid(g) => ContourSource::Grid(g),
        }
    }

    fn peak(&self) -> f64 {
        match self {
            LoadedState::Region(r) => r.peak,
            LoadedState::Grid(g) => g.omega.iter().fold(0.0f64, |a, v| if v.abs() > a.abs() { *v } else { a }),
        }
    }
}

pub fn load_final_state(dir: &Path) -> Result<LoadedState, CliError> {
    let read = |p: PathBuf| fs::read_to_string(&p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())));
    let summary: Value =
        serde_json::from_str(&read(dir.join("summary.json"))?).map_err(|e| CliError::Config(e.to_string()))?;
    let files = &summary["files"];
    let format = files["final_format"].as_str().unwrap_or("");
    let first = files["final_state"][0]
        .as_str()
        .ok_or_else(|| CliError::Config(format!("{}: summary has no final state", dir.display())))?;
    let text = read(dir.join(first))?;
    match format {
        "region" => Ok(LoadedState::Region(
            ccdyn::geometry::region_from_csv(&text).map_err(|e| CliError::Config(e.to_string()))?,
        )),
        "grid" => Ok(LoadedState::Grid(
            ccdyn::geometry::grid_from_csv(&text).map_err(|e| CliError::Config(e.to_string()))?,
        )),
        other => Err(CliError::Config(format!(
            "{}: final state format {other:?} cannot be compared",
            dir.display()
        ))),
    }
}

/// Hausdorff distances between the final level curves of two runs.
pub fn compare_runs(a: &Path, b: &Path, levels: &[f64]) -> Result<Value, CliError> {
    let sa = load_final_state(a)?;
    let sb = load_final_state(b)?;
    let levels = if levels.is_empty() {
        default_levels(&[sa.peak()])
    } else {
        levels.to_vec()
    };
    let d = compare_contours(sa.source(), sb.source(), &levels).map_err(|e| CliError::Config(e.to_string()))?;
    let rows: Vec<Value> = d.iter().map(|l| json!({ "w": l.w, "hausdorff": l.hausdorff })).collect();
    Ok(json!({
        "a": a.display().to_string(),
        "b": b.display().to_string(),
        "levels": rows,
        "max_hausdorff": d.iter().map(|l| l.hausdorff).fold(0.0, f64::max),
    }))
}
