//! One-dimensional quadrature rules.

/// Adaptive Simpson integration of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Composite trapezoid rule for samples on a uniform 1D grid of spacing `dx`.
pub fn trapezoid(values: &[f64], dx: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let interior = crate::sum::pairwise_sum(&values[1..n - 1]);
            dx * (interior + 0.5 * (values[0] + values[n - 1]))
        }
    }
}

/// Composite Simpson weights on `n` uniform nodes over `[a, b]` (`n` odd, `n >= 3`).
pub fn simpson_rule(a: f64, b: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 3 && n % 2 == 1, "Simpson's rule needs an odd node count");
    let dx = (b - a) / (n - 1) as f64;
    let nodes = (0..n).map(|i| a + i as f64 * dx).collect();
    let weights = (0..n)
        .map(|i| {
            let c = if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * dx / 3.0
        })
        .collect();
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_integrates_gaussian() {
        let v = adaptive_simpson(|x| (-x * x).exp(), -6.0, 6.0, 1e-13);
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-11);
    }

    #[test]
    fn trapezoid_exact_for_linear() {
        let xs: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
        let v = trapezoid(&xs, 0.1);
        assert!((v - 0.5).abs() < 1e-14);
    }

    #[test]
    fn simpson_rule_exact_for_cubics() {
        let (x, w) = simpson_rule(-1.0, 2.0, 7);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * (x * x * x - x)).sum();
        assert!((s - (16.0 / 4.0 - 1.0 / 4.0 - (4.0 - 1.0) / 2.0)).abs() < 1e-13);
    }
}
