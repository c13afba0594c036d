//! Right-hand side of the particle ODE system and its fixed-step RK4 integration.
//!
//! For every active particle,
//!
//! ```text
//! x_i'  = A(t, x_i)
//! w_i'  = div A(t, x_i) w_i
//! nu_i' = (-div A(t, x_i) + R(t, x_i, I_g(t, x_i))) nu_i
//!         + sum_j w_j nu_j m(t, x_i, x_j, I_d(t, x_i))
//! ```
//!
//! with `A(t, x) = a(t, x, I_a(t, x))`. Non-local sums are recomputed at every
//! Runge-Kutta stage. The per-particle map runs on the ambient rayon pool;
//! each particle's sums use the fixed pairwise tree, so results do not depend
//! on the worker count.

use rayon::prelude::*;
use serde::Serialize;

use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::geometry::Aabb;
use crate::model::{ModelSpec, SharedSums};
use crate::sum::pairwise_sum_by;

const PARTICLES_PER_TASK: usize = 256;

/// Box `(supp v0 U supp_x m) + B_{2 a_sup T}` containing every particle that
/// can matter up to time `T`. The union of two boxes is replaced by its hull.
pub fn active_box(model: &ModelSpec, horizon: f64) -> Aabb {
    let base = match &model.mutation {
        Some(m) => model.support_v0.hull(&m.support_x),
        None => model.support_v0.clone(),
    };
    base.dilate(2.0 * model.a_sup * horizon)
}

/// Default step `min(1e-3, h / (2 a_sup))`.
pub fn default_dt(h: f64, a_sup: f64) -> f64 {
    if a_sup > 0.0 {
        (h / (2.0 * a_sup)).min(1e-3)
    } else {
        1e-3
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub t_final: f64,
    /// Nominal step; shrunk so that an integer number of steps reaches `t_final`.
    pub dt: f64,
    /// Keep a snapshot every this many steps (the first and last are always kept).
    pub snapshot_every: usize,
    /// Abort when `min nu < -negative_alarm * max nu`.
    pub negative_alarm: f64,
}

impl RunConfig {
    pub fn new(t_final: f64, dt: f64) -> Self {
        Self {
            t_final,
            dt,
            snapshot_every: usize::MAX,
            negative_alarm: 1e-10,
        }
    }

    pub fn with_snapshot_every(mut self, every: usize) -> Self {
        self.snapshot_every = every.max(1);
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(Error::InvalidArgument(format!("t_final = {}", self.t_final)));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidArgument(format!("dt = {}", self.dt)));
        }
        Ok(())
    }
}

/// Time derivatives of the particle state.
#[derive(Debug, Clone, PartialEq)]
pub struct Rates {
    /// Flattened with stride `dim`.
    pub dx: Vec<f64>,
    pub dw: Vec<f64>,
    pub dnu: Vec<f64>,
}

/// Scalar monitors after one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepStats {
    pub time: f64,
    pub mass: f64,
    pub min_nu: f64,
    pub max_nu: f64,
    pub min_w: f64,
    pub max_w: f64,
    /// `max_i |x_i(t) - x_i(0)|`.
    pub max_displacement: f64,
}

/// Worst values of the invariant monitors over a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonitorReport {
    /// `max{initial mass, I* / psi_g_min}`.
    pub mass_bound: f64,
    /// `max_t (mass(t) - mass_bound)`.
    pub max_mass_excess: f64,
    /// `max_t (max_i |x_i(t) - x_i(0)| - a_sup t)`.
    pub max_support_excess: f64,
    pub min_volume: f64,
    /// `min_t min_i nu_i / max_i nu_i`.
    pub min_intensity_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub snapshots: Vec<ParticleEnsemble>,
    pub series: Vec<StepStats>,
    pub monitors: MonitorReport,
    /// Step actually used.
    pub dt: f64,
}

impl Trajectory {
    pub fn initial(&self) -> &ParticleEnsemble {
        &self.snapshots[0]
    }

    pub fn final_state(&self) -> &ParticleEnsemble {
        self.snapshots.last().expect("trajectory has at least one snapshot")
    }

    /// Latest snapshot with `time <= t` (up to rounding).
    pub fn snapshot_at_or_before(&self, t: f64) -> Option<&ParticleEnsemble> {
        self.snapshots
            .iter()
            .rev()
            .find(|s| s.time <= t + 1e-9 * t.abs().max(1.0))
    }

    /// Total mass at the last recorded step with `time <= t`.
    pub fn mass_at(&self, t: f64) -> Option<f64> {
        self.series
            .iter()
            .rev()
            .find(|s| s.time <= t + 1e-9 * t.abs().max(1.0))
            .map(|s| s.mass)
    }
}

/// RHS evaluator with the mutation-receiving index set fixed at construction.
pub struct Dynamics<'m> {
    model: &'m ModelSpec,
    receivers: Option<Vec<bool>>,
}

impl<'m> Dynamics<'m> {
    /// Receivers are the particles starting within `a_sup * horizon` of the
    /// mutation x-support; every other mutation term is exactly zero.
    pub fn new(model: &'m ModelSpec, ens0: &ParticleEnsemble, horizon: f64) -> Self {
        let receivers = model.mutation.as_ref().map(|m| {
            let reach = model.a_sup * horizon;
            (0..ens0.len())
                .map(|i| m.support_x.distance(ens0.position(i)) <= reach)
                .collect()
        });
        Self { model, receivers }
    }

    pub fn receiver_count(&self) -> usize {
        self.receivers.as_ref().map_or(0, |r| r.iter().filter(|&&b| b).count())
    }

    pub fn rhs(&self, ens: &ParticleEnsemble) -> Result<Rates> {
        let model = self.model;
        let d = model.dim;
        let t = ens.time;
        let n = ens.len();
        if let Some(r) = &self.receivers {
            if r.len() != n {
                return Err(Error::SizeMismatch {
                    expected: r.len(),
                    got: n,
                });
            }
        }
        // Sums run over particles with nonzero intensity only, so padding an
        // ensemble with empty cells leaves every reduction tree unchanged.
        let carriers: Vec<usize> = (0..n).filter(|&j| ens.intensities[j] != 0.0).collect();
        let compact;
        let emitters = if carriers.len() == n {
            ens
        } else {
            compact = ens.select(&carriers);
            &compact
        };
        let shared = SharedSums::compute(model, t, emitters)?;
        let sources: Vec<usize> = match &model.mutation {
            Some(m) => (0..emitters.len())
                .filter(|&j| m.support_y.contains(emitters.position(j)))
                .collect(),
            None => Vec::new(),
        };

        let particle = |i: usize, vel: &mut [f64], dw: &mut f64, dnu: &mut f64| -> Result<()> {
            let x = ens.position(i);
            let receives = self.receivers.as_ref().is_some_and(|r| r[i]);
            let fields = model.point_fields(t, x, emitters, &shared, receives)?;
            model.advection.velocity(t, x, &fields.args, vel);
            if vel.iter().any(|v| !v.is_finite()) {
                return Err(integration_error(t, i, "velocity"));
            }
            let div = model.divergence_from(t, x, &fields)?;
            if !div.is_finite() {
                return Err(integration_error(t, i, "divergence"));
            }
            let growth = model.growth.rate(t, x, fields.i_g);
            if !growth.is_finite() {
                return Err(integration_error(t, i, "growth"));
            }
            let mut rate = (growth - div) * ens.intensities[i];
            if receives {
                let m = model.mutation.as_ref().expect("receivers imply a mutation kernel");
                let influx = pairwise_sum_by(sources.len(), |s| {
                    let j = sources[s];
                    emitters.volumes[j] * emitters.intensities[j] * m.density(t, x, emitters.position(j), fields.i_d)
                });
                if !influx.is_finite() {
                    return Err(integration_error(t, i, "mutation"));
                }
                rate += influx;
            }
            if !rate.is_finite() {
                return Err(integration_error(t, i, "intensity"));
            }
            *dw = div * ens.volumes[i];
            *dnu = rate;
            Ok(())
        };

        let mut rates = Rates {
            dx: vec![0.0; n * d],
            dw: vec![0.0; n],
            dnu: vec![0.0; n],
        };
        let parallel = rates
            .dx
            .par_chunks_mut(d)
            .zip(rates.dw.par_iter_mut())
            .zip(rates.dnu.par_iter_mut())
            .enumerate()
            .with_min_len(PARTICLES_PER_TASK)
            .try_for_each(|(i, ((vel, dw), dnu))| particle(i, vel, dw, dnu));
        if parallel.is_err() {
            // Report the lowest failing index whatever the scheduling was.
            let (mut vel, mut dw, mut dnu) = (vec![0.0; d], 0.0, 0.0);
            for i in 0..n {
                particle(i, &mut vel, &mut dw, &mut dnu)?;
            }
        }
        Ok(rates)
    }
}

fn integration_error(time: f64, particle: usize, term: &'static str) -> Error {
    Error::Integration { time, particle, term }
}

/// RHS with the mutation receivers taken from the current positions.
pub fn rhs(model: &ModelSpec, ens: &ParticleEnsemble) -> Result<Rates> {
    Dynamics::new(model, ens, 0.0).rhs(ens)
}

fn axpy_state(base: &ParticleEnsemble, rates: &Rates, scale: f64, time: f64, out: &mut ParticleEnsemble) {
    out.time = time;
    for (o, (b, r)) in out.positions.iter_mut().zip(base.positions.iter().zip(&rates.dx)) {
        *o = b + scale * r;
    }
    for (o, (b, r)) in out.volumes.iter_mut().zip(base.volumes.iter().zip(&rates.dw)) {
        *o = b + scale * r;
    }
    for (o, (b, r)) in out.intensities.iter_mut().zip(base.intensities.iter().zip(&rates.dnu)) {
        *o = b + scale * r;
    }
}

fn combine(a: &[f64], k: [&[f64]; 4], dt: f64, out: &mut [f64]) {
    let c = dt / 6.0;
    for (i, o) in out.iter_mut().enumerate() {
        *o = a[i] + c * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
    }
}

fn stats(ens: &ParticleEnsemble, initial: &ParticleEnsemble) -> StepStats {
    let d = ens.dim;
    let mut max_displacement: f64 = 0.0;
    for i in 0..ens.len() {
        let (a, b) = (ens.position(i), initial.position(i));
        let dist = (0..d).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>().sqrt();
        max_displacement = max_displacement.max(dist);
    }
    StepStats {
        time: ens.time,
        mass: ens.mass(),
        min_nu: ens.intensities.iter().copied().fold(f64::INFINITY, f64::min),
        max_nu: ens.intensities.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        min_w: ens.volumes.iter().copied().fold(f64::INFINITY, f64::min),
        max_w: ens.volumes.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        max_displacement,
    }
}

/// Classical RK4 with a fixed step from `ens0.time` to `ens0.time + t_final`.
///
/// Monitors the mass bound, the support bound and volume positivity at every
/// step; aborts on non-positive volumes or when an intensity drops below
/// `-negative_alarm * max nu`.
pub fn integrate(model: &ModelSpec, ens0: &ParticleEnsemble, cfg: &RunConfig) -> Result<Trajectory> {
    cfg.validate()?;
    if ens0.is_empty() {
        return Err(Error::InvalidArgument("empty ensemble".into()));
    }
    let steps = ((cfg.t_final / cfg.dt) - 1e-9).ceil().max(0.0) as usize;
    let dt = if steps == 0 { 0.0 } else { cfg.t_final / steps as f64 };
    let dynamics = Dynamics::new(model, ens0, cfg.t_final);
    let t0 = ens0.time;

    let mass0 = ens0.mass();
    let mass_bound = mass0.max(model.constants.i_star / model.psi_g_min);
    let first = stats(ens0, ens0);
    let mut monitors = MonitorReport {
        mass_bound,
        max_mass_excess: mass0 - mass_bound,
        max_support_excess: 0.0,
        min_volume: first.min_w,
        min_intensity_ratio: ratio(&first),
    };
    let mut series = Vec::with_capacity(steps + 1);
    series.push(first);
    let mut snapshots = vec![ens0.clone()];

    let mut state = ens0.clone();
    let mut stage = ens0.clone();
    let mut next = ens0.clone();
    for step in 1..=steps {
        let t = t0 + (step - 1) as f64 * dt;
        let t_next = t0 + step as f64 * dt;
        state.time = t;
        let k1 = dynamics.rhs(&state)?;
        axpy_state(&state, &k1, 0.5 * dt, t + 0.5 * dt, &mut stage);
        let k2 = dynamics.rhs(&stage)?;
        axpy_state(&state, &k2, 0.5 * dt, t + 0.5 * dt, &mut stage);
        let k3 = dynamics.rhs(&stage)?;
        axpy_state(&state, &k3, dt, t_next, &mut stage);
        let k4 = dynamics.rhs(&stage)?;
        next.time = t_next;
        combine(
            &state.positions,
            [&k1.dx, &k2.dx, &k3.dx, &k4.dx],
            dt,
            &mut next.positions,
        );
        combine(&state.volumes, [&k1.dw, &k2.dw, &k3.dw, &k4.dw], dt, &mut next.volumes);
        combine(
            &state.intensities,
            [&k1.dnu, &k2.dnu, &k3.dnu, &k4.dnu],
            dt,
            &mut next.intensities,
        );
        std::mem::swap(&mut state, &mut next);

        let s = stats(&state, ens0);
        if !s.mass.is_finite() || state.positions.iter().any(|v| !v.is_finite()) {
            return Err(Error::MonitorAbort {
                time: t_next,
                reason: "non-finite state".into(),
            });
        }
        if !(s.min_w > 0.0) {
            return Err(Error::MonitorAbort {
                time: t_next,
                reason: format!("non-positive volume {:e}", s.min_w),
            });
        }
        if s.min_nu < -cfg.negative_alarm * s.max_nu.max(0.0) {
            return Err(Error::MonitorAbort {
                time: t_next,
                reason: format!("negative intensity {:e} (max {:e})", s.min_nu, s.max_nu),
            });
        }
        monitors.max_mass_excess = monitors.max_mass_excess.max(s.mass - mass_bound);
        monitors.max_support_excess = monitors
            .max_support_excess
            .max(s.max_displacement - model.a_sup * (t_next - t0));
        monitors.min_volume = monitors.min_volume.min(s.min_w);
        monitors.min_intensity_ratio = monitors.min_intensity_ratio.min(ratio(&s));
        series.push(s);
        if step % cfg.snapshot_every.max(1) == 0 || step == steps {
            snapshots.push(state.clone());
        }
    }
    Ok(Trajectory {
        snapshots,
        series,
        monitors,
        dt,
    })
}

fn ratio(s: &StepStats) -> f64 {
    if s.max_nu > 0.0 {
        s.min_nu / s.max_nu
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{library, Advection, Growth, Kernel, ModelBuilder};

    fn exponential_model(r0: f64) -> ModelSpec {
        ModelBuilder::new("exp", Advection::zero(1), Aabb::interval(0.0, 1.0))
            .growth(Growth::new(move |_, _, _| r0), Kernel::constant(1.0), 1.0)
            .build()
            .unwrap()
    }

    #[test]
    fn decoupled_exponential_rates() {
        let m = exponential_model(0.7);
        let ens = ParticleEnsemble::from_particles(1, 0.1, &[(vec![0.2], 0.1, 3.0), (vec![0.4], 0.1, 2.0)]).unwrap();
        let r = rhs(&m, &ens).unwrap();
        assert_eq!(r.dx, vec![0.0, 0.0]);
        assert_eq!(r.dw, vec![0.0, 0.0]);
        assert_eq!(r.dnu, vec![0.7 * 3.0, 0.7 * 2.0]);
    }

    #[test]
    fn contracting_field_rates() {
        let adv = Advection::local(1, |_, x, out| out[0] = -x[0]).with_divergence(|_, _, _| -1.0);
        let m = ModelBuilder::new("contract", adv, Aabb::interval(0.0, 3.0))
            .a_sup(3.0)
            .build()
            .unwrap();
        let ens = ParticleEnsemble::from_particles(1, 0.1, &[(vec![2.0], 0.3, 1.5)]).unwrap();
        let r = rhs(&m, &ens).unwrap();
        assert_eq!(r.dx, vec![-2.0]);
        assert!((r.dw[0] + 0.3).abs() < 1e-15);
        assert_eq!(r.dnu, vec![1.5]);
    }

    #[test]
    fn logistic_mass_rate_is_exact() {
        let m = library::logistic(Aabb::interval(0.0, 1.0)).unwrap();
        let parts: Vec<_> = (0..50)
            .map(|i| {
                (
                    vec![(i as f64 + 0.5) / 50.0],
                    0.02,
                    0.3 + 0.4 * ((i * 7 % 11) as f64 / 11.0),
                )
            })
            .collect();
        let ens = ParticleEnsemble::from_particles(1, 0.02, &parts).unwrap();
        let r = rhs(&m, &ens).unwrap();
        let rho = ens.mass();
        let rate = pairwise_sum_by(ens.len(), |i| r.dnu[i] * ens.volumes[i]);
        assert!((rate - (1.0 - rho) * rho).abs() < 1e-12);
    }

    #[test]
    fn active_box_dilation() {
        let mut m = library::logistic(Aabb::interval(0.0, 1.0)).unwrap();
        m.a_sup = 1.0;
        assert_eq!(active_box(&m, 2.0), Aabb::interval(-4.0, 5.0));
        assert_eq!(active_box(&m, 0.0), Aabb::interval(0.0, 1.0));
    }

    #[test]
    fn zero_dynamics_leave_state_unchanged() {
        let m = exponential_model(0.0);
        let ens = ParticleEnsemble::from_particles(1, 0.1, &[(vec![0.2], 0.1, 3.0), (vec![0.4], 0.2, 2.0)]).unwrap();
        let traj = integrate(&m, &ens, &RunConfig::new(10.0, 1e-2)).unwrap();
        let last = traj.final_state();
        assert!((last.time - 10.0).abs() < 1e-12);
        assert_eq!(last.positions, ens.positions);
        assert_eq!(last.volumes, ens.volumes);
        assert_eq!(last.intensities, ens.intensities);
    }

    #[test]
    fn negative_intensity_triggers_alarm() {
        let m = exponential_model(1.0);
        let ens = ParticleEnsemble::from_particles(1, 0.1, &[(vec![0.2], 0.1, -1.0), (vec![0.4], 0.2, 2.0)]).unwrap();
        let err = integrate(&m, &ens, &RunConfig::new(0.1, 1e-2)).unwrap_err();
        assert!(matches!(err, Error::MonitorAbort { .. }));
    }

    #[test]
    fn non_finite_growth_is_reported() {
        let m = ModelBuilder::new("bad", Advection::zero(1), Aabb::interval(0.0, 1.0))
            .growth(
                Growth::new(|_, x, _| if x[0] > 0.3 { f64::NAN } else { 0.0 }),
                Kernel::constant(1.0),
                1.0,
            )
            .build()
            .unwrap();
        let ens = ParticleEnsemble::from_particles(1, 0.1, &[(vec![0.2], 0.1, 1.0), (vec![0.4], 0.1, 1.0)]).unwrap();
        let err = rhs(&m, &ens).unwrap_err();
        assert_eq!(
            err,
            Error::Integration {
                time: 0.0,
                particle: 1,
                term: "growth"
            }
        );
    }

    #[test]
    fn snapshot_cadence() {
        let m = exponential_model(0.1);
        let ens = ParticleEnsemble::from_particles(1, 0.1, &[(vec![0.2], 0.1, 1.0)]).unwrap();
        let traj = integrate(&m, &ens, &RunConfig::new(1.0, 0.1).with_snapshot_every(3)).unwrap();
        let times: Vec<f64> = traj.snapshots.iter().map(|s| s.time).collect();
        assert_eq!(times.len(), 5);
        assert!((times[1] - 0.3).abs() < 1e-12 && (times[4] - 1.0).abs() < 1e-12);
        assert_eq!(traj.series.len(), 11);
    }
}
