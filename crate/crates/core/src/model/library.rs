//! Built-in problem instances.

use std::collections::BTreeMap;

use super::{Advection, Growth, HypothesisConstants, Kernel, ModelBuilder, ModelSpec, Regularity};
use crate::error::{Error, Result};
use crate::geometry::Aabb;

/// Slack added to the declared growth threshold.
const R_STAR: f64 = 0.1;

/// Names accepted by [`by_name`].
pub const PRESETS: &[&str] = &["advsel1d", "logistic", "nonlocal1d"];

/// Advection-selection model on `[0, 1]`: `a(x) = x(1 - x)`,
/// `R(x, I) = r0 - r1 x - I`, `psi_g = 1`, no mutation.
///
/// `a_sup` and `I*` are declared over the forward-invariant interval `[0, 1]`.
pub fn advsel1d(r0: f64, r1: f64) -> Result<ModelSpec> {
    let adv = Advection::local(1, |_, x, out| out[0] = x[0] * (1.0 - x[0])).with_divergence(|_, x, _| 1.0 - 2.0 * x[0]);
    let growth = Growth::new(move |_, x, i| r0 - r1 * x[0] - i).with_d_rate(|_, _, _| -1.0);
    let r_max = r0.max(r0 - r1);
    ModelBuilder::new("advsel1d", adv, Aabb::interval(0.0, 1.0))
        .growth(growth, Kernel::constant(1.0), 1.0)
        .a_sup(0.25)
        .constants(HypothesisConstants {
            i_star: r_max + R_STAR,
            r_star: R_STAR,
            m_bar: 0.0,
            k_const: 0.0,
        })
        .regularity(Regularity {
            kappa: 2,
            k_reg: 2,
            r_order: 2,
        })
        .build()
}

/// Pure logistic growth: `a = 0`, `R = 1 - I`, `psi_g = 1`.
pub fn logistic(support: Aabb) -> Result<ModelSpec> {
    let dim = support.dim();
    let growth = Growth::new(|_, _, i| 1.0 - i).with_d_rate(|_, _, _| -1.0);
    ModelBuilder::new("logistic", Advection::zero(dim), support)
        .growth(growth, Kernel::constant(1.0), 1.0)
        .a_sup(0.0)
        .constants(HypothesisConstants {
            i_star: 1.0 + R_STAR,
            r_star: R_STAR,
            m_bar: 0.0,
            k_const: 0.0,
        })
        .build()
}

/// Non-local toy in 1D: `a(I) = 1 - I` and `R(I) = 1 - I`, both with
/// constant kernels. `a_sup = 1` holds while the mass stays in `[0, 2]`.
pub fn nonlocal1d(support: Aabb) -> Result<ModelSpec> {
    let adv = Advection::nonlocal(1, 1, |_, _, i, out| out[0] = 1.0 - i[0])
        .with_divergence(|_, _, _| 0.0)
        .with_arg_gradient(|_, _, _, _, out| out[0] = -1.0);
    let growth = Growth::new(|_, _, i| 1.0 - i).with_d_rate(|_, _, _| -1.0);
    ModelBuilder::new("nonlocal1d", adv, support)
        .advection_kernels(vec![Kernel::constant(1.0)])
        .growth(growth, Kernel::constant(1.0), 1.0)
        .a_sup(1.0)
        .constants(HypothesisConstants {
            i_star: 1.0 + R_STAR,
            r_star: R_STAR,
            m_bar: 0.0,
            k_const: 0.0,
        })
        .regularity(Regularity {
            kappa: 1,
            k_reg: 2,
            r_order: 2,
        })
        .build()
}

/// Two-argument non-local transport in 2D with `psi_a^(j)(t, x, y) = y_j`.
///
/// The advection law `(t, x, [I1, I2], out)` is supplied by the caller;
/// derivatives are taken by finite differences. `growth` defaults to zero.
pub fn friedman2d<F>(velocity: F, growth: Option<Growth>, a_sup: f64, support: Aabb) -> Result<ModelSpec>
where
    F: Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
{
    let adv = Advection::nonlocal(2, 2, velocity)
        .with_fd_divergence()
        .with_fd_arg_gradient();
    friedman2d_from(adv, growth, a_sup, support)
}

/// [`friedman2d`] with a caller-built advection, e.g. one carrying an
/// analytic divergence.
pub fn friedman2d_from(adv: Advection, growth: Option<Growth>, a_sup: f64, support: Aabb) -> Result<ModelSpec> {
    if support.dim() != 2 || adv.dim() != 2 || adv.n_args() != 2 {
        return Err(Error::Configuration(
            "friedman2d lives in two dimensions with two arguments".into(),
        ));
    }
    ModelBuilder::new("friedman2d", adv, support)
        .advection_kernels(vec![
            Kernel::x_independent(|_, y| y[0]),
            Kernel::x_independent(|_, y| y[1]),
        ])
        .growth(growth.unwrap_or_else(Growth::zero), Kernel::constant(1.0), 1.0)
        .a_sup(a_sup)
        .regularity(Regularity {
            kappa: 1,
            k_reg: 2,
            r_order: 2,
        })
        .build()
}

fn param(params: &BTreeMap<String, f64>, key: &str, default: f64) -> f64 {
    params.get(key).copied().unwrap_or(default)
}

/// Builds a preset from its registry name. Unknown parameters are ignored.
///
/// * `advsel1d`: `r0` (default 6), `r1` (default 4)
/// * `logistic`, `nonlocal1d`: `lo`, `hi` support bounds (default `[0, 1]`)
pub fn by_name(name: &str, params: &BTreeMap<String, f64>) -> Result<ModelSpec> {
    match name {
        "advsel1d" => advsel1d(param(params, "r0", 6.0), param(params, "r1", 4.0)),
        "logistic" | "logistic0d" => logistic(Aabb::interval(param(params, "lo", 0.0), param(params, "hi", 1.0))),
        "nonlocal1d" => nonlocal1d(Aabb::interval(param(params, "lo", 0.0), param(params, "hi", 1.0))),
        other => Err(Error::Configuration(format!(
            "unknown model '{other}' (known: {})",
            PRESETS.join(", ")
        ))),
    }
}
