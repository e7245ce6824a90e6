//! Periodic spectral tools on uniform grids: circulant differentiation,
//! trigonometric interpolation and the discrete conjugate (Hilbert) operator.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

/// First-derivative circulant coefficients `c_k = ½(−1)^k cot(k h / 2)`,
/// with `(Df)_m = Σ_k c_k f_{m−k}`. The Nyquist mode is annihilated.
pub fn diff_coeffs(n: usize) -> Vec<f64> {
    assert!(n % 2 == 0, "grid size must be even");
    let h = 2.0 * PI / n as f64;
    (0..n)
        .map(|k| {
            if k == 0 {
                0.0
            } else {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                0.5 * sign / (0.5 * k as f64 * h).tan()
            }
        })
        .collect()
}

/// Applies a circulant operator with the summation ordered by relative offset,
/// so that an index shift of the input shifts the output bit for bit.
pub fn apply_circulant(c: &[f64], f: &[f64], out: &mut [f64]) {
    let n = c.len();
    debug_assert_eq!(f.len(), n);
    for m in 0..n {
        let mut s = 0.0;
        for k in 1..n {
            let j = if m >= k { m - k } else { m + n - k };
            s += c[k] * f[j];
        }
        out[m] = s;
    }
}

/// Spectral derivative of periodic samples.
pub fn derivative(f: &[f64]) -> Vec<f64> {
    let c = diff_coeffs(f.len());
    let mut out = vec![0.0; f.len()];
    apply_circulant(&c, f, &mut out);
    out
}

/// Complex Fourier coefficients `f̂_k = (1/N) Σ f_j e^{−i k φ_j}`.
pub fn fourier_coeffs(f: &[f64]) -> Vec<Complex64> {
    let n = f.len();
    let mut buf: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let inv = 1.0 / n as f64;
    buf.iter_mut().for_each(|c| *c *= inv);
    buf
}

fn inverse_real(coeffs: &mut [Complex64]) -> Vec<f64> {
    let n = coeffs.len();
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(n).process(coeffs);
    coeffs.iter().map(|c| c.re).collect()
}

/// Discrete conjugate function: multiplies mode `k` by `−i sgn(k)`, which is
/// the trapezoid image of `(1/2π) PV∫ cot((φ−θ)/2) f(θ) dθ`.
pub fn hilbert(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut c = fourier_coeffs(f);
    for (k, ck) in c.iter_mut().enumerate() {
        let kk = signed_wavenumber(k, n);
        *ck = if kk == 0 || 2 * k == n {
            Complex64::new(0.0, 0.0)
        } else {
            *ck * Complex64::new(0.0, -(kk.signum() as f64))
        };
    }
    inverse_real(&mut c)
}

/// Wavenumber of FFT bin `k` on an `n`-point grid (Nyquist reported positive).
pub fn signed_wavenumber(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Trigonometric interpolant of uniformly sampled periodic data on `[0, 2π)`.
#[derive(Debug, Clone)]
pub struct TrigInterp {
    coeffs: Vec<Complex64>,
}

impl TrigInterp {
    pub fn new(samples: &[f64]) -> Self {
        Self {
            coeffs: fourier_coeffs(samples),
        }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Value and first derivative at angle `x`.
    pub fn eval_with_derivative(&self, x: f64) -> (f64, f64) {
        let n = self.coeffs.len();
        let mut v = self.coeffs[0].re;
        let mut d = 0.0;
        let e1 = Complex64::from_polar(1.0, x);
        let mut e = e1;
        for k in 1..n / 2 {
            let c = self.coeffs[k];
            let t = c * e;
            v += 2.0 * t.re;
            d -= 2.0 * k as f64 * t.im;
            e *= e1;
        }
        // Nyquist term split evenly between ±n/2 (a pure cosine).
        let half = n / 2;
        let c = self.coeffs[half];
        v += c.re * (half as f64 * x).cos();
        d -= c.re * half as f64 * (half as f64 * x).sin();
        (v, d)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_with_derivative(x).0
    }

    /// Samples on a uniform grid of `m ≥ n` points (zero-padded spectrum).
    pub fn resample(&self, m: usize) -> Vec<f64> {
        let n = self.coeffs.len();
        assert!(m >= n && m % 2 == 0);
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        let half = n / 2;
        for k in 0..half {
            buf[k] = self.coeffs[k];
            if k > 0 {
                buf[m - k] = self.coeffs[n - k];
            }
        }
        if m == n {
            buf[half] = self.coeffs[half];
        } else {
            buf[half] = self.coeffs[half] * 0.5;
            buf[m - half] = self.coeffs[half] * 0.5;
        }
        inverse_real(&mut buf)
    }
}

/// Periodic table for fast angular lookups: a finely resampled trigonometric
/// interpolant read with four-point Lagrange interpolation.
#[derive(Debug, Clone)]
pub struct PeriodicTable {
    values: Vec<f64>,
    inv_h: f64,
}

impl PeriodicTable {
    pub fn new(samples: &[f64], refine: usize) -> Self {
        let m = samples.len() * refine.max(1);
        let values = TrigInterp::new(samples).resample(m);
        Self {
            values,
            inv_h: m as f64 / (2.0 * PI),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let m = self.values.len();
        let t = x.rem_euclid(2.0 * PI) * self.inv_h;
        let i = t.floor();
        let f = t - i;
        let i = i as usize % m;
        let at = |k: isize| self.values[((i as isize + k).rem_euclid(m as isize)) as usize];
        let (p0, p1, p2, p3) = (at(-1), at(0), at(1), at(2));
        let a = -f * (f - 1.0) * (f - 2.0) / 6.0;
        let b = (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0;
        let c = -(f + 1.0) * f * (f - 2.0) / 2.0;
        let d = (f + 1.0) * f * (f - 1.0) / 6.0;
        a * p0 + b * p1 + c * p2 + d * p3
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect()
    }

    #[test]
    fn circulant_derivative_is_spectral() {
        let x = grid(32);
        let f: Vec<f64> = x.iter().map(|&t| (t.sin()).exp()).collect();
        let d = derivative(&f);
        for (j, &t) in x.iter().enumerate() {
            assert!((d[j] - t.cos() * t.sin().exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn circulant_is_shift_equivariant_bitwise() {
        let n = 16;
        let c = diff_coeffs(n);
        let f: Vec<f64> = (0..n).map(|j| ((j * 7919) % 13) as f64 * 0.37).collect();
        let shifted: Vec<f64> = (0..n).map(|j| f[(j + n - 5) % n]).collect();
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        apply_circulant(&c, &f, &mut a);
        apply_circulant(&c, &shifted, &mut b);
        for j in 0..n {
            assert_eq!(b[j].to_bits(), a[(j + n - 5) % n].to_bits());
        }
    }

    #[test]
    fn hilbert_maps_cos_to_sin() {
        let x = grid(64);
        let f: Vec<f64> = x.iter().map(|&t| (3.0 * t).cos() + 0.5).collect();
        let g = hilbert(&f);
        for (j, &t) in x.iter().enumerate() {
            assert!((g[j] - (3.0 * t).sin()).abs() < 1e-13);
        }
    }

    #[test]
    fn trig_interp_matches_band_limited_function() {
        let x = grid(16);
        let f: Vec<f64> = x.iter().map(|&t| 1.0 + (2.0 * t).cos() - 0.3 * (5.0 * t).sin()).collect();
        let ti = TrigInterp::new(&f);
        for &t in &[0.1, 1.7, 4.4, 6.2] {
            let (v, d) = ti.eval_with_derivative(t);
            assert!((v - (1.0 + (2.0 * t).cos() - 0.3 * (5.0 * t).sin())).abs() < 1e-13);
            assert!((d - (-2.0 * (2.0 * t).sin() - 1.5 * (5.0 * t).cos())).abs() < 1e-12);
        }
        let fine = ti.resample(64);
        assert!((fine[4] - f[1]).abs() < 1e-13);
        let table = PeriodicTable::new(&f, 16);
        assert!((table.eval(2.3) - ti.eval(2.3)).abs() < 1e-5);
    }
}
