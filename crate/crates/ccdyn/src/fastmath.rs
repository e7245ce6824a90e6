//! Branch-free `ln`/`atan` and the polar wedge kernel, written so that the
//! inner loop over layers vectorizes. Runtime dispatch picks AVX-512 or AVX2
//! builds of the same code when the CPU supports them.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, LN_2, SQRT_2};
use std::sync::OnceLock;

/// Lane count of the layer loop; layer arrays are padded to a multiple of it.
pub const LANES: usize = 8;

#[inline(always)]
pub fn fast_ln(x: f64) -> f64 {
    let bits = x.to_bits();
    let mut e = ((bits >> 52) & 0x7ff) as i64 - 1023;
    let mut m = f64::from_bits((bits & 0x000f_ffff_ffff_ffff) | 0x3ff0_0000_0000_0000);
    let big = m > SQRT_2;
    m = if big { m * 0.5 } else { m };
    e += big as i64;
    let f = m - 1.0;
    let s = f / (2.0 + f);
    let z = s * s;
    let p = 1.0 / 3.0
        + z * (1.0 / 5.0
            + z * (1.0 / 7.0
                + z * (1.0 / 9.0
                    + z * (1.0 / 11.0
                        + z * (1.0 / 13.0
                            + z * (1.0 / 15.0 + z * (1.0 / 17.0 + z * (1.0 / 19.0 + z * (1.0 / 21.0)))))))));
    e as f64 * LN_2 + 2.0 * s + 2.0 * s * z * p
}

const AP: [f64; 5] = [
    -8.750608600031904122785e-1,
    -1.615753718733365076637e1,
    -7.500855792314704667340e1,
    -1.228866684490136173410e2,
    -6.485021904942025371773e1,
];
const AQ: [f64; 5] = [
    2.485846490142306297962e1,
    1.650270098316988542046e2,
    4.328810604912902668951e2,
    4.853903996359136964868e2,
    1.945506571482613964425e2,
];
const MOREBITS: f64 = 6.123233995736765886130e-17;

/// `atan(t / beta)` for `beta ≥ 0`, without forming the quotient first.
#[inline(always)]
pub fn atan_ratio(t: f64, beta: f64) -> f64 {
    let at = t.abs();
    let r1 = at > 2.414213562373095 * beta;
    let r2 = at > 0.66 * beta;
    let num = if r1 {
        -beta
    } else if r2 {
        at - beta
    } else {
        at
    };
    let den = if r1 {
        at
    } else if r2 {
        at + beta
    } else {
        beta
    };
    let xr = num / den;
    let base = if r1 {
        FRAC_PI_2 + MOREBITS
    } else if r2 {
        FRAC_PI_4 + 0.5 * MOREBITS
    } else {
        0.0
    };
    let z = xr * xr;
    let pz = (((AP[0] * z + AP[1]) * z + AP[2]) * z + AP[3]) * z + AP[4];
    let qz = ((((z + AQ[0]) * z + AQ[1]) * z + AQ[2]) * z + AQ[3]) * z + AQ[4];
    let y = base + xr * z * pz / qz + xr;
    if t < 0.0 {
        -y
    } else {
        y
    }
}

/// Antiderivative in `r` of `r ln(r² − 2 r ac + ac² + β²)`.
#[inline(always)]
pub fn wedge_p(r: f64, ac: f64, beta: f64) -> f64 {
    let t = r - ac;
    let q = t * t + beta * beta;
    let lnq = fast_ln(q);
    0.5 * (q * lnq - q) + ac * (t * lnq - 2.0 * t + 2.0 * beta * atan_ratio(t, beta))
}

/// Same antiderivative on the ray through the target (β = 0, ac = a).
pub fn wedge_p_axis(r: f64, a: f64) -> f64 {
    let t = r - a;
    if t == 0.0 {
        return 0.0;
    }
    let lnq = (t * t).ln();
    0.5 * (t * t * lnq - t * t) + a * (t * lnq - 2.0 * t)
}

/// `∫₀^b ln|a e^{iα} − r| r dr`, the potential of a unit-density wedge.
pub fn wedge_psi0(a: f64, b: f64, alpha: f64) -> f64 {
    let (s, c) = alpha.sin_cos();
    let ac = a * c;
    let beta = (a * s).abs();
    if beta == 0.0 {
        if c > 0.0 {
            return 0.5 * (wedge_p_axis(b, a) - wedge_p_axis(0.0, a));
        }
        // Opposite ray: ac = −a and t = r + a > 0 for a > 0.
        let f = |r: f64| {
            let t = r + a;
            let lnq = (t * t).ln();
            0.5 * (t * t * lnq - t * t) - a * (t * lnq - 2.0 * t)
        };
        return 0.5 * (f(b) - f(0.0));
    }
    0.5 * (wedge_p(b, ac, beta) - wedge_p(0.0, ac, beta))
}

/// A block of rays sharing one layer layout: `b[ray * stride + j]` are layer
/// radii, `w[j]` layer weights (zero on padding lanes).
#[derive(Clone, Copy)]
pub struct RayBlock<'a> {
    pub b: &'a [f64],
    pub w: &'a [f64],
    pub stride: usize,
}

/// Computes `Σ_k Σ_j w_j [P(b_{ray_k, j}) − P(0)]` for a target at radius `a`,
/// where ray `k` sits at `ray[k]` with `cos α_k`, `|sin α_k|`. Terms are added in
/// `k` order, so the result depends only on the listed sequence.
pub fn sum_rays(a: f64, cos: &[f64], sin_abs: &[f64], ray: &[usize], blk: RayBlock<'_>) -> f64 {
    kernel_fn()(a, cos, sin_abs, ray, blk)
}

type KernelFn = fn(f64, &[f64], &[f64], &[usize], RayBlock<'_>) -> f64;

fn kernel_fn() -> KernelFn {
    static F: OnceLock<KernelFn> = OnceLock::new();
    *F.get_or_init(select_kernel)
}

fn select_kernel() -> KernelFn {
    #[cfg(target_arch = "x86_64")]
    {
        if std::env::var_os("CCDYN_SCALAR_KERNEL").is_none() {
            if is_x86_feature_detected!("avx512f") && is_x86_feature_detected!("avx2") {
                return sum_rays_avx512;
            }
            if is_x86_feature_detected!("avx2") && is_x86_feature_detected!("fma") {
                return sum_rays_avx2;
            }
        }
    }
    sum_rays_generic
}

#[inline(always)]
fn sum_rays_body(a: f64, cos: &[f64], sin_abs: &[f64], ray: &[usize], blk: RayBlock<'_>) -> f64 {
    let stride = blk.stride;
    debug_assert!(stride % LANES == 0);
    let mut total = 0.0;
    for k in 0..ray.len() {
        let ac = a * cos[k];
        let beta = a * sin_abs[k];
        let p0 = wedge_p(0.0, ac, beta);
        let row = &blk.b[ray[k] * stride..ray[k] * stride + stride];
        let mut lanes = [0.0f64; LANES];
        for (rc, wc) in row.chunks_exact(LANES).zip(blk.w.chunks_exact(LANES)) {
            for l in 0..LANES {
                lanes[l] += wc[l] * (wedge_p(rc[l], ac, beta) - p0);
            }
        }
        let mut s = 0.0;
        for v in lanes {
            s += v;
        }
        total += s;
    }
    total
}

fn sum_rays_generic(a: f64, cos: &[f64], sin_abs: &[f64], ray: &[usize], blk: RayBlock<'_>) -> f64 {
    sum_rays_body(a, cos, sin_abs, ray, blk)
}

#[cfg(target_arch = "x86_64")]
fn sum_rays_avx2(a: f64, cos: &[f64], sin_abs: &[f64], ray: &[usize], blk: RayBlock<'_>) -> f64 {
    #[target_feature(enable = "avx2,fma")]
    unsafe fn inner(a: f64, cos: &[f64], sin_abs: &[f64], ray: &[usize], blk: RayBlock<'_>) -> f64 {
        sum_rays_body(a, cos, sin_abs, ray, blk)
    }
    // SAFETY: only selected after runtime detection of AVX2 and FMA.
    unsafe { inner(a, cos, sin_abs, ray, blk) }
}

#[cfg(target_arch = "x86_64")]
fn sum_rays_avx512(a: f64, cos: &[f64], sin_abs: &[f64], ray: &[usize], blk: RayBlock<'_>) -> f64 {
    #[target_feature(enable = "avx512f,avx2,fma")]
    unsafe fn inner(a: f64, cos: &[f64], sin_abs: &[f64], ray: &[usize], blk: RayBlock<'_>) -> f64 {
        sum_rays_body(a, cos, sin_abs, ray, blk)
    }
    // SAFETY: only selected after runtime detection of AVX-512F and AVX2.
    unsafe { inner(a, cos, sin_abs, ray, blk) }
}

/// Rounds a layer count up to the lane width.
pub fn padded(n: usize) -> usize {
    n.div_ceil(LANES) * LANES
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_ln_matches_std() {
        for k in 1..5000 {
            let x = 10f64.powf(-300.0 + 0.12 * k as f64) * (1.0 + 0.001 * (k % 7) as f64);
            let rel = (fast_ln(x) - x.ln()).abs() / x.ln().abs().max(1.0);
            assert!(rel < 1e-15, "x={x} rel={rel}");
        }
    }

    #[test]
    fn atan_ratio_matches_std() {
        for k in -2000..2000 {
            let t = k as f64 * 0.013;
            for &b in &[1e-9, 0.3, 1.0, 7.0] {
                assert!((atan_ratio(t, b) - (t / b).atan()).abs() < 3e-16);
            }
        }
    }

    #[test]
    fn wedge_potential_matches_quadrature() {
        let (a, b, alpha) = (0.7, 1.3, 0.4f64);
        let n = 200_000;
        let mut q = 0.0;
        for k in 0..n {
            let r = b * (k as f64 + 0.5) / n as f64;
            let d2 = r * r - 2.0 * r * a * alpha.cos() + a * a;
            q += 0.5 * d2.ln() * r * b / n as f64;
        }
        assert!((wedge_psi0(a, b, alpha) - q).abs() < 1e-9);
        // Continuity onto the axis ray, from both sides of the target.
        for &bb in &[0.4, 1.3] {
            let on = wedge_psi0(a, bb, 0.0);
            let near = wedge_psi0(a, bb, 1e-7);
            assert!((on - near).abs() < 1e-6);
        }
        assert!((wedge_psi0(a, 0.4, std::f64::consts::PI) - wedge_psi0(a, 0.4, std::f64::consts::PI - 6.5e-7)).abs() < 1e-6);
    }

    #[test]
    fn dispatched_kernel_matches_generic() {
        let stride = 16;
        let b: Vec<f64> = (0..3 * stride).map(|k| 0.2 + 0.05 * (k % 11) as f64).collect();
        let mut w = vec![0.0; stride];
        for (j, wj) in w.iter_mut().enumerate().take(13) {
            *wj = 1.0 / (j + 1) as f64;
        }
        let blk = RayBlock { b: &b, w: &w, stride };
        let cos = [0.3f64.cos(), 2.0f64.cos(), 1.0f64.cos()];
        let sin = [0.3f64.sin(), 2.0f64.sin().abs(), 1.0f64.sin()];
        let ray = [2, 0, 1];
        let x = sum_rays(0.61, &cos, &sin, &ray, blk);
        let y = sum_rays_generic(0.61, &cos, &sin, &ray, blk);
        assert_eq!(x.to_bits(), y.to_bits());
    }
}
