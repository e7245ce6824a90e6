//! Snapshot files and SVG contour plots.

use ccdyn::dynamics::SatelliteContour;
use ccdyn::geometry::{GriddedVorticity, PatchContour, Point, VortexSystem};
use ccdyn::oracles::{extract_level_segments, field_level_segments};
use std::fmt::Write as _;

/// Something whose level curves can be drawn.
#[derive(Debug, Clone, Copy)]
pub enum Snapshot<'a> {
    System(&'a VortexSystem),
    Patch(&'a PatchContour),
    Satellite(&'a [SatelliteContour]),
    Grid(&'a GriddedVorticity),
}

/// A polyline tagged with its level.
#[derive(Debug, Clone)]
pub struct Curve {
    pub w: f64,
    pub points: Vec<Point>,
    pub closed: bool,
}

/// Five levels at 10%, 30%, …, 90% of every peak.
pub fn default_levels(peaks: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for &p in peaks {
        for f in [0.1, 0.3, 0.5, 0.7, 0.9] {
            out.push(f * p);
        }
    }
    out
}

pub fn curves(snapshot: Snapshot<'_>, levels: &[f64]) -> Vec<Curve> {
    let mut out = Vec::new();
    match snapshot {
        Snapshot::System(sys) => {
            for &w in levels {
                for r in &sys.regions {
                    if let Ok(seg) = field_level_segments(r, w, 4 * r.field.n_phi) {
                        out.push(Curve {
                            w,
                            points: seg.iter().map(|s| s.0).collect(),
                            closed: true,
                        });
                    }
                }
            }
        }
        Snapshot::Patch(p) => {
            let n = p.rho.len();
            out.push(Curve {
                w: p.vorticity,
                points: (0..n)
                    .map(|m| p.pole + Point::polar(p.rho[m], ccdyn::geometry::phi_node(m, n)))
                    .collect(),
                closed: true,
            });
        }
        Snapshot::Satellite(cs) => {
            for c in cs {
                out.push(Curve {
                    w: c.w,
                    points: c.points(),
                    closed: true,
                });
            }
        }
        Snapshot::Grid(g) => {
            for &w in levels {
                for (a, b) in extract_level_segments(g, w) {
                    out.push(Curve {
                        w,
                        points: vec![a, b],
                        closed: false,
                    });
                }
            }
        }
    }
    out
}

fn color(w: f64, rank: f64) -> String {
    // Warm for positive levels, cool for negative; darker toward the peak.
    let t = 0.35 + 0.65 * rank;
    let v = (255.0 * (1.0 - t)) as u8;
    if w >= 0.0 {
        format!("rgb(200,{v},{v})")
    } else {
        format!("rgb({v},{v},200)")
    }
}

/// SVG document with one path per curve, axes and a legend of levels.
/// Output depends only on the input.
pub fn plot_contours(snapshot: Snapshot<'_>, levels: &[f64], title: &str) -> String {
    let cs = curves(snapshot, levels);
    let (size, margin, legend_w) = (600.0, 40.0, 140.0);
    let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for c in &cs {
        for p in &c.points {
            lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
        }
    }
    if !lo.x.is_finite() {
        lo = Point::new(-1.0, -1.0);
        hi = Point::new(1.0, 1.0);
    }
    let span = (hi.x - lo.x).max(hi.y - lo.y).max(1e-12) * 1.1;
    let mid = Point::new(0.5 * (lo.x + hi.x), 0.5 * (lo.y + hi.y));
    let scale = (size - 2.0 * margin) / span;
    let map = |p: Point| -> (f64, f64) {
        (
            margin + (p.x - mid.x + 0.5 * span) * scale,
            size - margin - (p.y - mid.y + 0.5 * span) * scale,
        )
    };
    let mut wl: Vec<f64> = cs.iter().map(|c| c.w).collect();
    wl.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    wl.dedup();
    let wmax = wl.iter().fold(0.0f64, |a, w| a.max(w.abs())).max(f64::MIN_POSITIVE);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{size}" viewBox="0 0 {} {size}">"#,
        size + legend_w,
        size + legend_w
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{margin}" y="24" font-family="sans-serif" font-size="14">{}</text>"#,
        escape(title)
    );
    // Axes through the plot origin when visible, else along the frame.
    let (x0, y0) = map(Point::ORIGIN);
    let ax = x0.clamp(margin, size - margin);
    let ay = y0.clamp(margin, size - margin);
    let _ = writeln!(
        s,
        r##"<g stroke="#888" stroke-width="0.8"><line x1="{margin}" y1="{ay:.2}" x2="{:.2}" y2="{ay:.2}"/><line x1="{ax:.2}" y1="{margin}" x2="{ax:.2}" y2="{:.2}"/></g>"##,
        size - margin,
        size - margin
    );
    let _ = writeln!(
        s,
        r##"<g font-family="sans-serif" font-size="10" fill="#444"><text x="{margin}" y="{:.2}">x: [{:.3}, {:.3}]</text><text x="{margin}" y="{:.2}">y: [{:.3}, {:.3}]</text></g>"##,
        size - 22.0,
        mid.x - 0.5 * span,
        mid.x + 0.5 * span,
        size - 10.0,
        mid.y - 0.5 * span,
        mid.y + 0.5 * span
    );
    for c in &cs {
        let rank = c.w.abs() / wmax;
        let mut d = String::new();
        for (k, p) in c.points.iter().enumerate() {
            let (x, y) = map(*p);
            let _ = write!(d, "{}{x:.2} {y:.2} ", if k == 0 { "M" } else { "L" });
        }
        if c.closed {
            d.push('Z');
        }
        let _ = writeln!(
            s,
            r#"<path d="{}" fill="none" stroke="{}" stroke-width="1.2"/>"#,
            d.trim_end(),
            color(c.w, rank)
        );
    }
    let _ = writeln!(s, r#"<g font-family="sans-serif" font-size="11">"#);
    for (k, w) in wl.iter().enumerate() {
        let y = margin + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.0}" y1="{y:.0}" x2="{:.0}" y2="{y:.0}" stroke="{}" stroke-width="2"/><text x="{:.0}" y="{:.0}">w = {w:.4}</text>"#,
            size + 10.0,
            size + 30.0,
            color(*w, w.abs() / wmax),
            size + 36.0,
            y + 4.0
        );
    }
    let _ = writeln!(s, "</g>\n</svg>");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Patch contour as `phi,rho` rows.
pub fn patch_to_csv(p: &PatchContour) -> String {
    let n = p.rho.len();
    let mut s = format!(
        "# ccdyn patch v1\n# pole,{:.17e},{:.17e}\n# vorticity,{:.17e}\nphi,rho\n",
        p.pole.x, p.pole.y, p.vorticity
    );
    for (m, r) in p.rho.iter().enumerate() {
        let _ = writeln!(s, "{:.17e},{r:.17e}", ccdyn::geometry::phi_node(m, n));
    }
    s
}

/// Satellite level curves as `w,r,theta` rows.
pub fn satellite_to_csv(cs: &[SatelliteContour]) -> String {
    let mut s = String::from("w,r,theta\n");
    for c in cs {
        for (r, t) in c.r.iter().zip(&c.theta) {
            let _ = writeln!(s, "{:.17e},{r:.17e},{t:.17e}", c.w);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use ccdyn::geometry::{PolarContourField, VortexRegion};

    #[test]
    fn circles_plot_deterministically() {
        let f = PolarContourField::from_fn(16, 1.0, 4, |_, w| 0.5 * (1.0 - w)).unwrap();
        let sys = VortexSystem::monopole(VortexRegion::new(Point::ORIGIN, 1.0, f).unwrap());
        let a = plot_contours(Snapshot::System(&sys), &[0.3, 0.6], "disk");
        let b = plot_contours(Snapshot::System(&sys), &[0.3, 0.6], "disk");
        assert_eq!(a, b);
        assert_eq!(a.matches("<path").count(), 2);
        assert!(a.contains("w = 0.3000"));
    }
}
