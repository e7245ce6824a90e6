//! One-dimensional interpolants used along the level direction.

/// Monotone piecewise-cubic Hermite interpolant (Fritsch–Carlson slopes).
/// Abscissae must be strictly increasing.
#[derive(Debug, Clone)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    pub fn new(x: &[f64], y: &[f64]) -> Self {
        let n = x.len();
        assert!(n >= 2 && y.len() == n);
        debug_assert!(x.windows(2).all(|p| p[1] > p[0]));
        let h: Vec<f64> = x.windows(2).map(|p| p[1] - p[0]).collect();
        let del: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = del[0];
            d[1] = del[0];
        } else {
            for k in 1..n - 1 {
                if del[k - 1] * del[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / del[k - 1] + w2 / del[k]);
                }
            }
            d[0] = end_slope(h[0], h[1], del[0], del[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
        }
        Self {
            x: x.to_vec(),
            y: y.to_vec(),
            d,
        }
    }

    fn segment(&self, t: f64) -> usize {
        let n = self.x.len();
        match self.x.binary_search_by(|v| v.partial_cmp(&t).unwrap_or(std::cmp::Ordering::Less)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    /// Value and derivative; outside the node range the end cubic is extended.
    pub fn eval_with_derivative(&self, t: f64) -> (f64, f64) {
        let k = self.segment(t);
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let (y0, y1, d0, d1) = (self.y[k], self.y[k + 1], self.d[k], self.d[k + 1]);
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let v = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
        let dh00 = 6.0 * s * (s - 1.0);
        let dh10 = (1.0 - s) * (1.0 - 3.0 * s);
        let dh01 = -dh00;
        let dh11 = s * (3.0 * s - 2.0);
        let dv = (dh00 * y0 + dh01 * y1) / h + dh10 * d0 + dh11 * d1;
        (v, dv)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_with_derivative(t).0
    }

    pub fn slopes(&self) -> &[f64] {
        &self.d
    }
}

fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d * del0 <= 0.0 {
        0.0
    } else if del0 * del1 <= 0.0 && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

/// Barycentric Lagrange interpolant on Gauss–Legendre nodes.
#[derive(Debug, Clone)]
pub struct Barycentric {
    x: Vec<f64>,
    w: Vec<f64>,
}

impl Barycentric {
    /// `x` are Gauss–Legendre nodes on (-1, 1) with quadrature weights `lambda`.
    pub fn gauss(x: &[f64], lambda: &[f64]) -> Self {
        let w = x
            .iter()
            .zip(lambda)
            .enumerate()
            .map(|(j, (&xj, &lj))| {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                s * ((1.0 - xj * xj) * lj).sqrt()
            })
            .collect();
        Self { x: x.to_vec(), w }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.x
    }

    pub fn eval(&self, f: &[f64], t: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for ((&xj, &wj), &fj) in self.x.iter().zip(&self.w).zip(f) {
            let d = t - xj;
            if d == 0.0 {
                return fj;
            }
            let c = wj / d;
            num += c * fj;
            den += c;
        }
        num / den
    }

    /// Node values of the derivative of the interpolant of `f`.
    pub fn differentiate(&self, f: &[f64]) -> Vec<f64> {
        let n = self.x.len();
        (0..n)
            .map(|i| {
                let mut s = 0.0;
                for j in 0..n {
                    if j != i {
                        s += self.w[j] / self.w[i] * (f[j] - f[i]) / (self.x[i] - self.x[j]);
                    }
                }
                s
            })
            .collect()
    }
}
