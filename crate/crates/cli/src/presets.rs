//! Models and initial densities named in a config.

use std::collections::BTreeMap;

use wdm_core::discretize::InitialDensity;
use wdm_core::model::library;
use wdm_core::{Aabb, Advection, Growth, ModelSpec};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::expr::CompiledExpr;

/// Model names accepted in `[model] name`.
pub const MODELS: &[&str] = &["advsel1d", "logistic", "nonlocal1d", "friedman2d"];

/// Variables of the `friedman2d` velocity and divergence expressions.
pub const FRIEDMAN_VARS: [&str; 5] = ["t", "x1", "x2", "I1", "I2"];
/// Variables of the `friedman2d` growth expression.
pub const FRIEDMAN_GROWTH_VARS: [&str; 4] = ["t", "x1", "x2", "I"];

pub struct Problem {
    pub model: ModelSpec,
    pub v0: InitialDensity,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn initial_support(cfg: &ExperimentConfig) -> Aabb {
    Aabb::new(cfg.initial.lo.clone(), cfg.initial.hi.clone())
}

fn friedman(cfg: &ExperimentConfig, support: Aabb) -> CliResult<ModelSpec> {
    let m = &cfg.model;
    let params = &m.params;
    let velocity = m
        .velocity
        .as_ref()
        .ok_or_else(|| usage("friedman2d needs model.velocity = [\"a1\", \"a2\"]"))?;
    if velocity.len() != 2 {
        return Err(usage(format!(
            "friedman2d needs 2 velocity components, got {}",
            velocity.len()
        )));
    }
    let a_sup = m.a_sup.ok_or_else(|| usage("friedman2d needs model.a_sup"))?;
    if !(a_sup >= 0.0) {
        return Err(usage("model.a_sup must be non-negative"));
    }
    let a1 = CompiledExpr::compile(&velocity[0], &FRIEDMAN_VARS, params)?;
    let a2 = CompiledExpr::compile(&velocity[1], &FRIEDMAN_VARS, params)?;
    let mut adv = Advection::nonlocal(2, 2, move |t, x, i, out| {
        let v = [t, x[0], x[1], i[0], i[1]];
        out[0] = a1.eval(&v);
        out[1] = a2.eval(&v);
    })
    .with_fd_arg_gradient();
    adv = match &m.divergence {
        Some(src) => {
            let div = CompiledExpr::compile(src, &FRIEDMAN_VARS, params)?;
            adv.with_divergence(move |t, x, i| div.eval(&[t, x[0], x[1], i[0], i[1]]))
        }
        None => adv.with_fd_divergence(),
    };
    let growth = match &m.growth {
        Some(src) => {
            let r = CompiledExpr::compile(src, &FRIEDMAN_GROWTH_VARS, params)?;
            Some(Growth::new(move |t, x, i| r.eval(&[t, x[0], x[1], i])))
        }
        None => None,
    };
    Ok(library::friedman2d_from(adv, growth, a_sup, support)?)
}

/// Model and initial density of a config.
pub fn build_problem(cfg: &ExperimentConfig) -> CliResult<Problem> {
    let support = initial_support(cfg);
    let m = &cfg.model;
    let model = match m.name.as_str() {
        "friedman2d" => friedman(cfg, support.clone())?,
        name => {
            if m.velocity.is_some() || m.divergence.is_some() || m.growth.is_some() || m.a_sup.is_some() {
                return Err(usage(format!(
                    "model.velocity, divergence, growth and a_sup only apply to friedman2d, not '{name}'"
                )));
            }
            let mut params: BTreeMap<String, f64> = m.params.clone();
            if matches!(name, "logistic" | "nonlocal1d") {
                params.entry("lo".into()).or_insert(support.lo[0]);
                params.entry("hi".into()).or_insert(support.hi[0]);
            }
            library::by_name(name, &params)
                .map_err(|_| usage(format!("unknown model '{name}' (known: {})", MODELS.join(", "))))?
        }
    };
    if model.dim != support.dim() {
        return Err(usage(format!(
            "model '{}' lives in {} dimension(s) but initial.lo/hi have {}",
            model.name,
            model.dim,
            support.dim()
        )));
    }
    let v0 = InitialDensity::by_name(&cfg.initial.name, &cfg.initial.params, support)?;
    Ok(Problem { model, v0 })
}
