//! Sampling-based cross-check of the declared hypotheses.

use serde::Serialize;

use super::{Derivative, ModelSpec};
use crate::geometry::Aabb;

/// Hypotheses that [`validate_model`] samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Hypothesis {
    /// `psi_g >= psi_g_min > 0`.
    GrowthKernelLowerBound,
    /// `m >= 0`.
    MutationNonNegative,
    /// `m = 0` outside the declared x/y supports.
    MutationSupport,
    /// `R(t, x, I) + K < -r*` for `I >= I*`.
    GrowthVersusMutation,
    /// `|a(t, x)| <= a_sup` (local advection only).
    AdvectionBound,
    /// Supplied derivatives agree with central differences.
    DerivativeConsistency,
}

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub hypothesis: Hypothesis,
    /// `(t, x..., [y...], [I])` at which the violation was observed.
    pub witness: Vec<f64>,
    pub value: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub samples: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violated(&self, h: Hypothesis) -> bool {
        self.violations.iter().any(|v| v.hypothesis == h)
    }
}

const PRIMES: [u32; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

/// Radical inverse of `index` in `base` (one Halton coordinate).
fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut acc = 0.0;
    while index > 0 {
        acc += (index % b) as f64 * f;
        index /= b;
        f *= inv;
    }
    acc
}

fn halton(index: u64, dims: usize) -> Vec<f64> {
    (0..dims)
        .map(|k| radical_inverse(index, PRIMES[k % PRIMES.len()]))
        .collect()
}

fn lerp_box(b: &Aabb, u: &[f64]) -> Vec<f64> {
    (0..b.dim()).map(|k| b.lo[k] + u[k] * b.width(k)).collect()
}

const DERIVATIVE_RTOL: f64 = 1e-5;

/// Samples the hypotheses of `model` on `bbox x [0, t_max]` with `samples`
/// Halton points. Equality at the `I >= I*` boundary is accepted.
pub fn validate_model(model: &ModelSpec, bbox: &Aabb, t_max: f64, samples: usize) -> ValidationReport {
    let d = model.dim;
    let c = model.constants;
    let mut report = ValidationReport {
        samples,
        violations: Vec::new(),
    };
    let record = |report: &mut ValidationReport, h: Hypothesis, witness: Vec<f64>, value: f64, detail: String| {
        // One witness per hypothesis keeps the report readable.
        if !report.violated(h) {
            report.violations.push(Violation {
                hypothesis: h,
                witness,
                value,
                detail,
            });
        }
    };
    if !(model.psi_g_min > 0.0) {
        record(
            &mut report,
            Hypothesis::GrowthKernelLowerBound,
            vec![],
            model.psi_g_min,
            "declared psi_g_min is not positive".into(),
        );
    }
    let dims = 1 + 2 * d + 2;
    let i_span = 1.0 + c.i_star.abs();
    let mut vel = vec![0.0; d];
    for s in 1..=samples as u64 {
        let u = halton(s, dims);
        let t = u[0] * t_max;
        let x = lerp_box(bbox, &u[1..1 + d]);
        let y = lerp_box(bbox, &u[1 + d..1 + 2 * d]);
        let i_level = c.i_star + u[1 + 2 * d] * i_span;
        let i_any = u[2 + 2 * d] * (c.i_star.abs() + 1.0) * 2.0;

        let g = model.kernel_g.value(t, &x, &y);
        if !(g >= model.psi_g_min) {
            let mut w = vec![t];
            w.extend_from_slice(&x);
            w.extend_from_slice(&y);
            record(
                &mut report,
                Hypothesis::GrowthKernelLowerBound,
                w,
                g,
                format!("psi_g = {g:e} < psi_g_min = {:e}", model.psi_g_min),
            );
        }

        let r = model.growth.rate(t, &x, i_level);
        if r + c.k_const > -c.r_star {
            let mut w = vec![t];
            w.extend_from_slice(&x);
            w.push(i_level);
            record(
                &mut report,
                Hypothesis::GrowthVersusMutation,
                w,
                r + c.k_const,
                format!("R + K = {:e} is not below -r* = {:e}", r + c.k_const, -c.r_star),
            );
        }

        if let Some(m) = &model.mutation {
            let v = m.density(t, &x, &y, i_any);
            let witness = || {
                let mut w = vec![t];
                w.extend_from_slice(&x);
                w.extend_from_slice(&y);
                w.push(i_any);
                w
            };
            if !(v >= 0.0) {
                record(
                    &mut report,
                    Hypothesis::MutationNonNegative,
                    witness(),
                    v,
                    format!("m = {v:e}"),
                );
            }
            let outside = !m.support_x.contains(&x) || !m.support_y.contains(&y);
            if outside && v != 0.0 {
                record(
                    &mut report,
                    Hypothesis::MutationSupport,
                    witness(),
                    v,
                    format!("m = {v:e} outside the declared supports"),
                );
            }
        }

        if model.advection.is_local() {
            model.advection.velocity(t, &x, &[], &mut vel);
            let norm = vel.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > model.a_sup * (1.0 + 1e-12) {
                let mut w = vec![t];
                w.extend_from_slice(&x);
                record(
                    &mut report,
                    Hypothesis::AdvectionBound,
                    w,
                    norm,
                    format!("|a| = {norm:e} exceeds a_sup = {:e}", model.a_sup),
                );
            }
        }

        let args: Vec<f64> = (0..model.advection.n_args())
            .map(|k| (k as f64 + 1.0) * u[1 + 2 * d] - 0.5)
            .collect();
        if let Derivative::Supplied(f) = model.advection.divergence_kind() {
            let supplied = f(t, &x, &args);
            let fd = model.advection.fd_divergence(t, &x, &args);
            if (supplied - fd).abs() > DERIVATIVE_RTOL * supplied.abs().max(1.0) {
                let mut w = vec![t];
                w.extend_from_slice(&x);
                record(
                    &mut report,
                    Hypothesis::DerivativeConsistency,
                    w,
                    supplied - fd,
                    format!("div a supplied {supplied:e} vs finite difference {fd:e}"),
                );
            }
        }
        if let Derivative::Supplied(f) = model.advection.arg_gradient_kind() {
            let mut a = vec![0.0; d];
            let mut b = vec![0.0; d];
            for k in 0..args.len() {
                f(t, &x, &args, k, &mut a);
                model.advection.fd_arg_gradient(t, &x, &args, k, &mut b);
                let err = a.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
                let scale = a.iter().map(|p| p.abs()).fold(1.0, f64::max);
                if err > DERIVATIVE_RTOL * scale {
                    let mut w = vec![t];
                    w.extend_from_slice(&x);
                    record(
                        &mut report,
                        Hypothesis::DerivativeConsistency,
                        w,
                        err,
                        format!("da/dI_{k} disagrees with finite differences by {err:e}"),
                    );
                }
            }
        }
        for (k, kernel) in model.kernels_a.iter().enumerate() {
            if let Derivative::Supplied(f) = kernel.grad_kind() {
                let mut a = vec![0.0; d];
                let mut b = vec![0.0; d];
                f(t, &x, &y, &mut a);
                kernel.fd_grad_x(t, &x, &y, &mut b);
                let err = a.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
                let scale = a.iter().map(|p| p.abs()).fold(1.0, f64::max);
                if err > DERIVATIVE_RTOL * scale {
                    let mut w = vec![t];
                    w.extend_from_slice(&x);
                    w.extend_from_slice(&y);
                    record(
                        &mut report,
                        Hypothesis::DerivativeConsistency,
                        w,
                        err,
                        format!("grad_x psi_a[{k}] disagrees with finite differences by {err:e}"),
                    );
                }
            }
        }
    }
    report
}
