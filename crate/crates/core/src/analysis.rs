//! Error measurement, convergence-order fits and long-time diagnostics.

use rayon::prelude::*;
use serde::Serialize;

use crate::discretize::{partition_support, InitialDensity};
use crate::dynamics::{active_box, default_dt, integrate, RunConfig, Trajectory};
use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::geometry::Aabb;
use crate::model::{KernelId, ModelSpec};
use crate::reference::ReferenceGrid;
use crate::regularize::{reconstruct, Cutoff, EpsilonRule, SampledFunction, UniformGrid};
use crate::sum::pairwise_sum_by;

/// `sum_i |v(t, x_i) - nu_i| w_i` with the oracle interpolated at the particles.
pub fn weighted_pointwise_error(ens: &ParticleEnsemble, oracle: &ReferenceGrid) -> Result<f64> {
    if ens.dim != 1 {
        return Err(Error::GridMismatch("oracle comparisons need d = 1".into()));
    }
    if (ens.time - oracle.time).abs() > 1e-9 * oracle.time.abs().max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "ensemble at t = {} but oracle at t = {}",
            ens.time, oracle.time
        )));
    }
    let v = oracle.values_at(&ens.positions)?;
    Ok(pairwise_sum_by(ens.len(), |i| {
        (v[i] - ens.intensities[i]).abs() * ens.volumes[i]
    }))
}

/// Least-squares line through `(log h, log error)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute deviation of a `log error` from the line.
    pub residual: f64,
    /// Standard error of the slope (zero for two points or an exact fit).
    pub slope_stderr: f64,
    pub points: Vec<(f64, f64)>,
}

pub fn fit_convergence_order(pairs: &[(f64, f64)]) -> Result<ConvergenceFit> {
    if pairs.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "order fit needs at least 3 (h, error) pairs, got {}",
            pairs.len()
        )));
    }
    if pairs.windows(2).any(|w| !(w[1].0 < w[0].0)) || pairs.iter().any(|p| !(p.0 > 0.0)) {
        return Err(Error::InvalidArgument(
            "h values must be positive and strictly decreasing".into(),
        ));
    }
    if let Some(p) = pairs.iter().find(|p| !(p.1 > 0.0) || !p.1.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "non-positive error {} at h = {}",
            p.1, p.0
        )));
    }
    let n = pairs.len() as f64;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let deviations: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y - (intercept + slope * x)).collect();
    let residual = deviations.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let sse: f64 = deviations.iter().map(|d| d * d).sum();
    let slope_stderr = if pairs.len() > 2 {
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(ConvergenceFit {
        slope,
        intercept,
        residual,
        slope_stderr,
        points: pairs.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cluster {
    /// Mass-weighted centroid.
    pub position: Vec<f64>,
    pub mass: f64,
    pub particles: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterDetection {
    /// Empty unless `stationary`.
    pub clusters: Vec<Cluster>,
    pub stationary: bool,
    pub total_mass: f64,
    /// `|rho_h(T) - rho_h(T - window)|`.
    pub mass_drift: f64,
    /// `max_i |x_i(T) - x_i(T - window)|`.
    pub max_displacement: f64,
    /// Mass in clusters dropped as negligible.
    pub dropped_mass: f64,
}

/// Single-linkage clusters of `ens` with linking radius `link`, weighted by
/// `nu_i w_i`; clusters lighter than `min_mass` are dropped.
pub fn cluster_particles(ens: &ParticleEnsemble, link: f64, min_mass: f64) -> (Vec<Cluster>, f64) {
    let n = ens.len();
    let d = ens.dim;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| ens.position(a)[0].total_cmp(&ens.position(b)[0]).then(a.cmp(&b)));

    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for (s, &i) in order.iter().enumerate() {
        let xi = ens.position(i);
        for &j in &order[s + 1..] {
            let xj = ens.position(j);
            if xj[0] - xi[0] > link {
                break;
            }
            let dist = (0..d).map(|k| (xi[k] - xj[k]).powi(2)).sum::<f64>().sqrt();
            if dist <= link {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }

    let alphas = ens.alphas();
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for &i in &order {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }
    let mut clusters = Vec::new();
    let mut dropped = 0.0;
    for members in groups.values() {
        let mass = pairwise_sum_by(members.len(), |s| alphas[members[s]]);
        if mass < min_mass || mass <= 0.0 {
            dropped += mass;
            continue;
        }
        let mut position = vec![0.0; d];
        for (k, p) in position.iter_mut().enumerate() {
            *p = pairwise_sum_by(members.len(), |s| alphas[members[s]] * ens.position(members[s])[k]) / mass;
        }
        clusters.push(Cluster {
            position,
            mass,
            particles: members.len(),
        });
    }
    clusters.sort_by(|a, b| a.position[0].total_cmp(&b.position[0]));
    (clusters, dropped)
}

/// Clusters of the final state, reported only when the run is stationary
/// over the last `window`: positions moved less than `pos_tol` and the mass
/// changed by less than `mass_tol * rho_h(T)`.
pub fn detect_limit_clusters(traj: &Trajectory, window: f64, pos_tol: f64, mass_tol: f64) -> Result<ClusterDetection> {
    if !(window > 0.0 && pos_tol > 0.0 && mass_tol > 0.0) {
        return Err(Error::InvalidArgument(
            "window, pos_tol and mass_tol must be positive".into(),
        ));
    }
    let last = traj.final_state();
    let earlier = traj
        .snapshot_at_or_before(last.time - window)
        .filter(|s| s.time < last.time)
        .ok_or_else(|| Error::InvalidArgument(format!("no snapshot at or before t = {}", last.time - window)))?;
    let total_mass = last.mass();
    let mass_drift = (total_mass - earlier.mass()).abs();
    let d = last.dim;
    let max_displacement = (0..last.len())
        .map(|i| {
            let (a, b) = (last.position(i), earlier.position(i));
            (0..d).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>().sqrt()
        })
        .fold(0.0f64, f64::max);
    let stationary = max_displacement < pos_tol && mass_drift < mass_tol * total_mass;
    let (clusters, dropped_mass) = if stationary {
        cluster_particles(last, pos_tol, mass_tol * total_mass)
    } else {
        (Vec::new(), 0.0)
    };
    Ok(ClusterDetection {
        clusters,
        stationary,
        total_mass,
        mass_drift,
        max_displacement,
        dropped_mass,
    })
}

/// Root of `I -> R(t, x_hat, psi_g(t, x_hat, x_hat) I)` by bisection on
/// `[0, I* / psi_g_min + 1]`.
pub fn predict_limit_mass(model: &ModelSpec, x_hat: &[f64], t: f64) -> Result<f64> {
    if x_hat.len() != model.dim {
        return Err(Error::InvalidArgument("x_hat has the wrong dimension".into()));
    }
    let psi = model.kernel_g.value(t, x_hat, x_hat);
    let f = |i: f64| model.growth.rate(t, x_hat, psi * i);
    let (mut a, mut b) = (0.0, model.constants.i_star / model.psi_g_min + 1.0);
    let (fa, fb) = (f(a), f(b));
    if !(fa.is_finite() && fb.is_finite()) || fa * fb > 0.0 {
        return Err(Error::PredictionUnavailable(format!(
            "R(x_hat, .) has no sign change on [{a}, {b}] (values {fa}, {fb})"
        )));
    }
    if fa == 0.0 && fb == 0.0 {
        return Err(Error::PredictionUnavailable(format!(
            "R(x_hat, .) vanishes at both ends of [{a}, {b}]; no isolated root"
        )));
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    let sa = fa.signum();
    while b - a > 1e-13 {
        let mid = 0.5 * (a + b);
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == sa {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiracResidual {
    pub position: Vec<f64>,
    /// `|a(x_c, I_a)|`.
    pub advection: f64,
    /// `|R(x_c, sum_c' mass_c' psi_g(x_c, x_c'))|`.
    pub growth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiracCheck {
    pub clusters: Vec<DiracResidual>,
    /// `max_x sum_c mass_c m(x, x_c, I_d(x))` over the sample points.
    pub mutation: f64,
}

/// Residuals of the conditions a limit `sum_c mass_c delta_{x_c}` must satisfy.
pub fn check_dirac_necessary_conditions(
    model: &ModelSpec,
    clusters: &[Cluster],
    samples: &[Vec<f64>],
    t: f64,
) -> Result<DiracCheck> {
    let limit = ParticleEnsemble::from_particles(
        model.dim,
        0.0,
        &clusters
            .iter()
            .map(|c| (c.position.clone(), 1.0, c.mass))
            .collect::<Vec<_>>(),
    )?;
    let mut residuals = Vec::with_capacity(clusters.len());
    for c in clusters {
        let vel = model.eval_velocity(t, &c.position, &limit)?;
        let i_g = model.eval_nonlocal(KernelId::Growth, t, &c.position, &limit)?;
        residuals.push(DiracResidual {
            position: c.position.clone(),
            advection: vel.iter().map(|v| v * v).sum::<f64>().sqrt(),
            growth: model.growth.rate(t, &c.position, i_g).abs(),
        });
    }
    let mut mutation: f64 = 0.0;
    if let Some(m) = &model.mutation {
        for x in samples {
            if !m.support_x.contains(x) {
                continue;
            }
            let i_d = model.eval_nonlocal(KernelId::Mutation, t, x, &limit)?;
            let total: f64 = clusters
                .iter()
                .filter(|c| m.support_y.contains(&c.position))
                .map(|c| c.mass * m.density(t, x, &c.position, i_d))
                .sum();
            mutation = mutation.max(total.abs());
        }
    }
    Ok(DiracCheck {
        clusters: residuals,
        mutation,
    })
}

/// Smooth bump `exp(1 - 1 / (1 - ((x - center) / width)^2))` on `|x - center| < width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bump {
    pub center: f64,
    pub width: f64,
}

impl Bump {
    pub fn eval(&self, x: f64) -> f64 {
        let u = (x - self.center) / self.width;
        if u.abs() < 1.0 {
            (1.0 - 1.0 / (1.0 - u * u)).exp()
        } else {
            0.0
        }
    }
}

/// Seven bumps of width `s = (hi - lo) / 8` centered at `lo + k s`, `k = 1..=7`.
pub fn default_test_family(lo: f64, hi: f64) -> Vec<Bump> {
    let s = (hi - lo) / 8.0;
    (1..=7)
        .map(|k| Bump {
            center: lo + k as f64 * s,
            width: s,
        })
        .collect()
}

/// `max_phi |sum_i nu_i w_i phi(x_i) - int phi v_oracle|`.
pub fn weak_measure_gap(ens: &ParticleEnsemble, oracle: &ReferenceGrid, tests: &[Bump]) -> Result<f64> {
    if !ens.is_empty() && ens.dim != 1 {
        return Err(Error::GridMismatch("oracle comparisons need d = 1".into()));
    }
    let alphas = ens.alphas();
    Ok(tests
        .iter()
        .map(|phi| {
            let particles = pairwise_sum_by(ens.len(), |i| alphas[i] * phi.eval(ens.positions[i]));
            let exact = oracle.integrate_against(|x| phi.eval(x));
            (particles - exact).abs()
        })
        .fold(0.0, f64::max))
}

/// Gap between two particle measures over the same test family.
pub fn weak_gap_between(a: &ParticleEnsemble, b: &ParticleEnsemble, tests: &[Bump]) -> f64 {
    let (aa, ab) = (a.alphas(), b.alphas());
    tests
        .iter()
        .map(|phi| {
            let x = pairwise_sum_by(a.len(), |i| aa[i] * phi.eval(a.positions[i * a.dim]));
            let y = pairwise_sum_by(b.len(), |i| ab[i] * phi.eval(b.positions[i * b.dim]));
            (x - y).abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ApVerdict {
    Preserving,
    NonPreserving,
    Inconclusive,
}

/// Verdict from `(h, gap)` pairs: preserving iff the gap at the coarsest `h`
/// is at least twice the gap at `h / 4`; non-preserving iff it is not and
/// every gap stays above `floor`.
pub fn ap_verdict(gaps: &[(f64, f64)], floor: f64) -> ApVerdict {
    let Some(&(h0, g0)) = gaps.iter().max_by(|a, b| a.0.total_cmp(&b.0)) else {
        return ApVerdict::Inconclusive;
    };
    let Some(&(_, g4)) = gaps.iter().find(|(h, _)| ((h * 4.0) / h0 - 1.0).abs() < 1e-6) else {
        return ApVerdict::Inconclusive;
    };
    if g0 >= 2.0 * g4 {
        ApVerdict::Preserving
    } else if gaps.iter().all(|&(_, g)| g > floor) {
        ApVerdict::NonPreserving
    } else {
        ApVerdict::Inconclusive
    }
}

/// Settings shared by the members of an h-sweep.
#[derive(Debug, Clone)]
pub struct SweepSettings {
    pub horizon: f64,
    pub eps_rule: EpsilonRule,
    pub cutoff: Cutoff,
    /// Common time step; defaults to the finest member's default step.
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelfConvergence {
    /// `(h, L1 distance to the finest reconstruction)` for all but the finest run.
    pub distances: Vec<(f64, f64)>,
    pub fit: ConvergenceFit,
    pub grid_spacing: f64,
}

/// Runs one sweep member to the horizon.
pub fn run_member(model: &ModelSpec, v0: &InitialDensity, h: f64, horizon: f64, dt: f64) -> Result<Trajectory> {
    let ens = partition_support(v0, model, h, horizon)?;
    integrate(model, &ens, &RunConfig::new(horizon, dt))
}

fn check_self_sweep(h_list: &[f64]) -> Result<()> {
    if h_list.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "self-convergence needs at least 4 h values (3 distances), got {}",
            h_list.len()
        )));
    }
    if h_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument("h values must be strictly decreasing".into()));
    }
    Ok(())
}

/// Order of `h -> ||v_eps^h(T) - v_eps^{h_min}(T)||_1`, with the finest run
/// as surrogate truth; needs at least four `h` values.
pub fn particle_self_convergence(
    model: &ModelSpec,
    v0: &InitialDensity,
    h_list: &[f64],
    settings: &SweepSettings,
) -> Result<SelfConvergence> {
    check_self_sweep(h_list)?;
    let h_min = *h_list.last().expect("non-empty");
    let dt = settings.dt.unwrap_or_else(|| default_dt(h_min, model.a_sup));
    let finals: Vec<ParticleEnsemble> = h_list
        .par_iter()
        .map(|&h| {
            let traj = run_member(model, v0, h, settings.horizon, dt)?;
            Ok(traj.final_state().clone())
        })
        .collect::<Result<_>>()?;
    self_convergence_of(model, h_list, &finals, settings)
}

/// Self-convergence of already computed final states, `finals[k]` run at
/// `h_list[k]`.
pub fn self_convergence_of(
    model: &ModelSpec,
    h_list: &[f64],
    finals: &[ParticleEnsemble],
    settings: &SweepSettings,
) -> Result<SelfConvergence> {
    check_self_sweep(h_list)?;
    if finals.len() != h_list.len() {
        return Err(Error::SizeMismatch {
            expected: h_list.len(),
            got: finals.len(),
        });
    }
    let eps: Vec<f64> = h_list
        .iter()
        .map(|&h| settings.eps_rule.apply(h))
        .collect::<Result<_>>()?;
    let eps_min = eps.iter().copied().fold(f64::INFINITY, f64::min);
    let radius = settings
        .cutoff
        .radius()
        .unwrap_or(crate::regularize::GAUSSIAN_TRUNCATION);
    let eps_max = eps.iter().copied().fold(0.0, f64::max);
    let bbox: Aabb = active_box(model, settings.horizon).dilate(radius * eps_max);
    let grid = UniformGrid::covering(&bbox, eps_min / 4.0)?;

    let recs: Vec<SampledFunction> = finals
        .par_iter()
        .zip(&eps)
        .map(|(ens, &e)| reconstruct(ens, &settings.cutoff, e, &grid))
        .collect::<Result<_>>()?;
    let truth = recs.last().expect("non-empty");
    let distances: Vec<(f64, f64)> = h_list[..h_list.len() - 1]
        .iter()
        .zip(&recs)
        .map(|(&h, r)| Ok((h, r.l1_distance(truth)?)))
        .collect::<Result<_>>()?;
    let fit = fit_convergence_order(&distances)?;
    Ok(SelfConvergence {
        distances,
        fit,
        grid_spacing: grid.spacing[0],
    })
}

/// Heuristic check that the region swept from `supp v0 U supp_x m` by the
/// flow of a local advection stays away from `supp_y m`. Support-box corners
/// are traced with RK4; `None` without mutation or with non-local advection.
pub fn support_disjointness(model: &ModelSpec, v0: &InitialDensity, horizon: f64, dt: f64) -> Option<bool> {
    let m = model.mutation.as_ref()?;
    if !model.is_local() {
        return None;
    }
    let base = v0.support.hull(&m.support_x);
    let mut corners = base.corners();
    let mut swept = base.clone();
    let steps = ((horizon / dt) - 1e-9).ceil().max(0.0) as usize;
    let d = model.dim;
    let vel = |t: f64, x: &[f64]| {
        let mut out = vec![0.0; d];
        model.advection.velocity(t, x, &[], &mut out);
        out
    };
    for s in 0..steps {
        let t = s as f64 * dt;
        for c in corners.iter_mut() {
            let k1 = vel(t, c);
            let y: Vec<f64> = (0..d).map(|k| c[k] + 0.5 * dt * k1[k]).collect();
            let k2 = vel(t + 0.5 * dt, &y);
            let y: Vec<f64> = (0..d).map(|k| c[k] + 0.5 * dt * k2[k]).collect();
            let k3 = vel(t + 0.5 * dt, &y);
            let y: Vec<f64> = (0..d).map(|k| c[k] + dt * k3[k]).collect();
            let k4 = vel(t + dt, &y);
            for k in 0..d {
                c[k] += dt / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
            }
            swept = swept.hull(&Aabb::new(c.clone(), c.clone()));
        }
    }
    Some(!swept.intersects(&m.support_y))
}

/// Everything the `converge` and `asymptote` modes report.
#[derive(Debug, Clone, Default, Serialize)]
pub struct DiagnosticsReport {
    pub model: String,
    /// `(t, rho_h(t))` of the (finest) run.
    pub mass_series: Vec<(f64, f64)>,
    pub l1_errors: Vec<(f64, f64)>,
    pub weighted_errors: Vec<(f64, f64)>,
    pub l1_fit: Option<ConvergenceFit>,
    pub weighted_fit: Option<ConvergenceFit>,
    pub clusters: Vec<Cluster>,
    pub stationary: Option<bool>,
    pub predicted_mass: Option<f64>,
    pub residuals: Option<DiracCheck>,
    pub oracle_mass: Option<f64>,
    pub weak_gaps: Vec<(f64, f64)>,
    pub ap_verdict: Option<ApVerdict>,
    pub notes: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::library;

    #[test]
    fn exact_power_laws() {
        let hs = [0.1, 0.05, 0.025, 0.0125];
        for p in [2.0, 0.5] {
            let pairs: Vec<_> = hs.iter().map(|&h| (h, 3.0 * f64::powf(h, p))).collect();
            let fit = fit_convergence_order(&pairs).unwrap();
            assert!((fit.slope - p).abs() < 1e-12);
            assert!(fit.residual < 1e-12);
        }
    }

    #[test]
    fn fit_preconditions() {
        assert!(fit_convergence_order(&[(0.1, 1.0), (0.05, 0.5)]).is_err());
        assert!(fit_convergence_order(&[(0.1, 1.0), (0.05, 0.0), (0.025, 0.1)]).is_err());
        assert!(fit_convergence_order(&[(0.1, 1.0), (0.2, 0.5), (0.025, 0.1)]).is_err());
    }

    #[test]
    fn predicted_masses() {
        let d = library::advsel1d(6.0, 0.5).unwrap();
        assert!((predict_limit_mass(&d, &[1.0], 0.0).unwrap() - 5.5).abs() < 1e-12);
        let a = library::advsel1d(6.0, 4.0).unwrap();
        assert!((predict_limit_mass(&a, &[1.0], 0.0).unwrap() - 2.0).abs() < 1e-12);
        let dead = library::advsel1d(-1.0, 0.0).unwrap();
        assert!(matches!(
            predict_limit_mass(&dead, &[0.5], 0.0),
            Err(Error::PredictionUnavailable(_))
        ));
    }

    #[test]
    fn single_point_cluster() {
        let parts: Vec<_> = (0..10).map(|_| (vec![0.7], 0.1, 2.0)).collect();
        let ens = ParticleEnsemble::from_particles(1, 0.1, &parts).unwrap();
        let (clusters, dropped) = cluster_particles(&ens, 1e-3, 1e-3);
        assert_eq!(clusters.len(), 1);
        assert!((clusters[0].mass - 2.0).abs() < 1e-14);
        assert_eq!(clusters[0].position, vec![0.7]);
        assert_eq!(dropped, 0.0);
    }

    #[test]
    fn false_limit_is_flagged() {
        let model = library::advsel1d(6.0, 4.0).unwrap();
        let c = Cluster {
            position: vec![0.5],
            mass: 1.0,
            particles: 1,
        };
        let check = check_dirac_necessary_conditions(&model, &[c], &[], 0.0).unwrap();
        assert!((check.clusters[0].advection - 0.25).abs() < 1e-15);
        assert_eq!(check.mutation, 0.0);
        let d = library::advsel1d(6.0, 0.5).unwrap();
        let c = Cluster {
            position: vec![1.0],
            mass: 5.5,
            particles: 1,
        };
        let check = check_dirac_necessary_conditions(&d, &[c], &[], 0.0).unwrap();
        assert_eq!(check.clusters[0].advection, 0.0);
        assert!(check.clusters[0].growth < 1e-14);
    }

    #[test]
    fn verdicts() {
        assert_eq!(
            ap_verdict(&[(4e-3, 1.0), (2e-3, 0.6), (1e-3, 0.4)], 0.1),
            ApVerdict::Preserving
        );
        assert_eq!(
            ap_verdict(&[(4e-3, 1.0), (2e-3, 0.9), (1e-3, 0.8)], 0.1),
            ApVerdict::NonPreserving
        );
        assert_eq!(
            ap_verdict(&[(4e-3, 0.1), (2e-3, 0.09), (1e-3, 0.06)], 0.08),
            ApVerdict::Inconclusive
        );
        assert_eq!(ap_verdict(&[(4e-3, 1.0), (2e-3, 0.9)], 0.1), ApVerdict::Inconclusive);
    }

    #[test]
    fn test_family_layout() {
        let f = default_test_family(0.0, 1.0);
        assert_eq!(f.len(), 7);
        assert!((f[0].center - 0.125).abs() < 1e-15 && (f[6].center - 0.875).abs() < 1e-15);
        assert_eq!(f[0].eval(0.125), 1.0);
        assert_eq!(f[0].eval(0.25), 0.0);
    }
}
