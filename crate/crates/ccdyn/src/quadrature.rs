//! Quadrature rules: Gauss–Legendre level nodes and periodic log-split weights.

use std::f64::consts::PI;

/// Gauss–Legendre nodes (ascending, in (-1, 1)) and weights.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton.
        let k = (i + 1) as f64;
        let nf = n as f64;
        let mut z = (PI * (k - 0.25) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss–Legendre nodes mapped to (0, |peak|), ascending in magnitude, with
/// the matching weights. Nodes carry the sign of `peak`; weights are positive.
pub fn level_grid(peak: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let m = peak.abs();
    let s = peak.signum();
    let nodes = x.iter().map(|&xi| s * 0.5 * m * (1.0 + xi)).collect();
    let weights = w.iter().map(|&wi| 0.5 * m * wi).collect();
    (nodes, weights)
}

/// Weights `R_j` of the periodic product rule
/// `∫₀^{2π} ln(4 sin²((t−τ)/2)) f(τ) dτ ≈ Σ_j R_j(t) f(τ_j)` on `2n` nodes,
/// for a target `t = τ_i`; the result is indexed by `(j − i) mod 2n`.
pub fn kress_log_weights(n_nodes: usize) -> Vec<f64> {
    assert!(n_nodes % 2 == 0 && n_nodes >= 2);
    let n = n_nodes / 2;
    let nf = n as f64;
    (0..n_nodes)
        .map(|k| {
            let d = PI * k as f64 / nf;
            let mut s = 0.0;
            for m in 1..n {
                s += (m as f64 * d).cos() / m as f64;
            }
            -2.0 * PI / nf * s - PI / (nf * nf) * (nf * d).cos()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(12);
        for p in 0..23 {
            let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(p)).sum();
            let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-14, "degree {p}: {q} vs {exact}");
        }
    }

    #[test]
    fn level_grid_is_signed_and_sums_to_range() {
        let (nodes, weights) = level_grid(-2.5, 9);
        assert!(nodes.iter().all(|&w| w < 0.0 && w > -2.5));
        assert!(nodes.windows(2).all(|p| p[1].abs() > p[0].abs()));
        assert!((weights.iter().sum::<f64>() - 2.5).abs() < 1e-14);
    }

    #[test]
    fn kress_weights_reproduce_log_moments() {
        // ∫ ln(4 sin²(τ/2)) cos(kτ) dτ = −2π/k for k ≥ 1, and 0 for k = 0.
        let nn = 32;
        let r = kress_log_weights(nn);
        let h = 2.0 * PI / nn as f64;
        for k in 0..8 {
            let q: f64 = (0..nn).map(|j| r[j] * (k as f64 * j as f64 * h).cos()).sum();
            let exact = if k == 0 { 0.0 } else { -2.0 * PI / k as f64 };
            assert!((q - exact).abs() < 1e-12, "k={k}: {q} vs {exact}");
        }
    }
}
