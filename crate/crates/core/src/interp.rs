//! Monotone piecewise-cubic Hermite interpolation on uniform 1D grids.

/// Fritsch-Carlson interpolant of samples at `origin + j * dx`.
///
/// Node slopes use the weighted harmonic mean of neighbouring secants, so the
/// interpolant never overshoots the data between two nodes.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    origin: f64,
    dx: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(origin: f64, dx: f64, values: Vec<f64>) -> Self {
        let slopes = pchip_slopes(&values, dx);
        Self {
            origin,
            dx,
            values,
            slopes,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at `x`, or `None` outside `[first node, last node]`.
    pub fn eval(&self, x: f64) -> Option<f64> {
        let n = self.values.len();
        if n == 0 {
            return None;
        }
        let s = (x - self.origin) / self.dx;
        let last = (n - 1) as f64;
        if !(s >= -1e-12 && s <= last + 1e-12) {
            return None;
        }
        if n == 1 {
            return Some(self.values[0]);
        }
        let s = s.clamp(0.0, last);
        let j = (s.floor() as usize).min(n - 2);
        let u = s - j as f64;
        let (y0, y1) = (self.values[j], self.values[j + 1]);
        let (m0, m1) = (self.slopes[j] * self.dx, self.slopes[j + 1] * self.dx);
        let u2 = u * u;
        let u3 = u2 * u;
        let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        Some(h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1)
    }
    /// Like [`eval`](Self::eval), but continues linearly with the end slope up
    /// to `reach` grid spacings beyond the first and last node.
    pub fn eval_extended(&self, x: f64, reach: f64) -> Option<f64> {
        let n = self.values.len();
        if n == 0 {
            return None;
        }
        let first = self.origin;
        let last = self.origin + (n - 1) as f64 * self.dx;
        if x < first {
            (first - x <= reach * self.dx).then(|| self.values[0] + self.slopes[0] * (x - first))
        } else if x > last {
            (x - last <= reach * self.dx).then(|| self.values[n - 1] + self.slopes[n - 1] * (x - last))
        } else {
            self.eval(x)
        }
    }
}

fn pchip_slopes(y: &[f64], dx: f64) -> Vec<f64> {
    let n = y.len();
    let mut d = vec![0.0; n];
    if n < 2 {
        return d;
    }
    let delta: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]) / dx).collect();
    if n == 2 {
        d[0] = delta[0];
        d[1] = delta[0];
        return d;
    }
    for j in 1..n - 1 {
        let (a, b) = (delta[j - 1], delta[j]);
        d[j] = if a * b <= 0.0 { 0.0 } else { 2.0 / (1.0 / a + 1.0 / b) };
    }
    d[0] = end_slope(delta[0], delta[1]);
    d[n - 1] = end_slope(delta[n - 2], delta[n - 3]);
    d
}

// One-sided three-point estimate, limited to keep monotonicity.
fn end_slope(d0: f64, d1: f64) -> f64 {
    let s = 1.5 * d0 - 0.5 * d1;
    if s * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && s.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        s
    }
}
