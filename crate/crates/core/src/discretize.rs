//! Particle approximation of the initial density on a cubic lattice.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::dynamics::active_box;
use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::geometry::Aabb;
use crate::model::{KernelId, ModelSpec};

/// Non-negative initial density with a compact support box.
#[derive(Clone)]
pub struct InitialDensity {
    pub name: String,
    f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    pub support: Aabb,
    /// Declared Sobolev smoothness index used in rate predictions.
    pub sobolev_k: u32,
}

impl fmt::Debug for InitialDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InitialDensity")
            .field("name", &self.name)
            .field("support", &self.support)
            .field("sobolev_k", &self.sobolev_k)
            .finish()
    }
}

/// Names accepted by [`InitialDensity::by_name`].
pub const PROFILES: &[&str] = &[
    "one-minus-x",
    "x-one-minus-x",
    "x-squared",
    "const6",
    "constant",
    "gaussian",
];

impl InitialDensity {
    pub fn new<F>(name: impl Into<String>, support: Aabb, sobolev_k: u32, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            f: Arc::new(f),
            support,
            sobolev_k,
        }
    }

    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    /// Density value; zero outside the support box.
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        if self.support.contains(x) {
            (self.f)(x)
        } else {
            0.0
        }
    }

    /// Named profile on `support`. Profiles of one variable use the first coordinate.
    ///
    /// * `one-minus-x`, `x-one-minus-x`, `x-squared`, `const6`
    /// * `constant` with `value`
    /// * `gaussian` with `center` and `width`: `exp(-|x - center|^2 / width^2)`
    pub fn by_name(name: &str, params: &BTreeMap<String, f64>, support: Aabb) -> Result<Self> {
        let p = |k: &str, d: f64| params.get(k).copied().unwrap_or(d);
        let density = match name {
            "one-minus-x" => Self::new(name, support, 2, |x| 1.0 - x[0]),
            "x-one-minus-x" => Self::new(name, support, 2, |x| x[0] * (1.0 - x[0])),
            "x-squared" => Self::new(name, support, 2, |x| x[0] * x[0]),
            "const6" => Self::new(name, support, 2, |_| 6.0),
            "constant" => {
                let c = p("value", 1.0);
                Self::new(name, support, 2, move |_| c)
            }
            "gaussian" => {
                let c = p("center", 0.0);
                let w = p("width", 1.0);
                Self::new(name, support, 4, move |x| {
                    (-x.iter().map(|v| (v - c) * (v - c)).sum::<f64>() / (w * w)).exp()
                })
            }
            other => {
                return Err(Error::Configuration(format!(
                    "unknown initial profile '{other}' (known: {})",
                    PROFILES.join(", ")
                )))
            }
        };
        Ok(density)
    }
}

/// Seeds one particle per lattice cube `h (i + [0, 1)^d)` of the active box
/// `O_T`, at the cube center, with `w = h^d` and `nu = v0(center)`.
///
/// Cubes with `v0(center) = 0` that miss the mutation x-support are dropped:
/// their intensity stays zero for all time.
pub fn partition_support(v0: &InitialDensity, model: &ModelSpec, h: f64, horizon: f64) -> Result<ParticleEnsemble> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("spacing h must be positive, got {h}")));
    }
    if !(horizon >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "horizon must be non-negative, got {horizon}"
        )));
    }
    let d = model.dim;
    if v0.dim() != d {
        return Err(Error::Configuration(
            "initial density dimension differs from the model".into(),
        ));
    }
    let o_t = active_box(model, horizon);
    let mutation_x = model.mutation.as_ref().map(|m| &m.support_x);
    // Cells outside the hull of the two supports are always dropped.
    let seeds = match mutation_x {
        Some(mx) => v0.support.hull(mx),
        None => v0.support.clone(),
    };
    let mut lo_idx = Vec::with_capacity(d);
    let mut counts = Vec::with_capacity(d);
    for k in 0..d {
        let lo = seeds.lo[k].max(o_t.lo[k]);
        let hi = seeds.hi[k].min(o_t.hi[k]);
        let a = (lo / h + 1e-9).floor() as i64;
        let b = (hi / h - 1e-9).ceil() as i64;
        lo_idx.push(a);
        counts.push((b - a).max(0) as usize);
    }
    let total: usize = counts.iter().product();
    let vol = h.powi(d as i32);
    let mut labels = Vec::new();
    let mut positions = Vec::new();
    let mut volumes = Vec::new();
    let mut intensities = Vec::new();
    let mut idx = vec![0i64; d];
    let mut center = vec![0.0; d];
    let mut cell = Aabb::cube(d, 0.0, 0.0);
    for flat in 0..total {
        let mut rem = flat;
        for k in (0..d).rev() {
            idx[k] = lo_idx[k] + (rem % counts[k]) as i64;
            rem /= counts[k];
        }
        for k in 0..d {
            center[k] = h * (idx[k] as f64 + 0.5);
            cell.lo[k] = h * idx[k] as f64;
            cell.hi[k] = h * (idx[k] + 1) as f64;
        }
        let nu = v0.eval(&center);
        if !(nu >= 0.0) || !nu.is_finite() {
            return Err(Error::Discretization(format!(
                "initial density is {nu} at {center:?}; it must be finite and non-negative"
            )));
        }
        let keep =
            nu > 0.0 || mutation_x.is_some_and(|mx| (0..d).all(|k| cell.lo[k] < mx.hi[k] && cell.hi[k] > mx.lo[k]));
        if keep {
            labels.extend_from_slice(&idx);
            positions.extend_from_slice(&center);
            volumes.push(vol);
            intensities.push(nu);
        }
    }
    if volumes.is_empty() {
        return Err(Error::Discretization(format!(
            "no lattice cell of side {h} carries mass inside the active box"
        )));
    }
    ParticleEnsemble::new(0.0, d, h, labels, positions, volumes, intensities)
}

/// Measured spacing constants of an ensemble relative to its lattice size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpacingReport {
    /// Smallest / largest nearest-neighbour distance over `h`.
    pub position_min: f64,
    pub position_max: f64,
    /// Smallest / largest volume over `h^d`.
    pub volume_min: f64,
    pub volume_max: f64,
    pub c_hat: f64,
    pub c_big_hat: f64,
}

/// Nearest-neighbour and volume ratios; duplicates are an error.
pub fn check_spacing(ens: &ParticleEnsemble) -> Result<SpacingReport> {
    let n = ens.len();
    if n < 2 {
        return Err(Error::Spacing("need at least two particles".into()));
    }
    let d = ens.dim;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| ens.position(a)[0].total_cmp(&ens.position(b)[0]));
    let mut nearest = vec![f64::INFINITY; n];
    for (p, &i) in order.iter().enumerate() {
        let xi = ens.position(i);
        let mut best = f64::INFINITY;
        let visit = |j: usize, best: &mut f64| -> Result<bool> {
            let xj = ens.position(j);
            if (xj[0] - xi[0]).abs() >= *best {
                return Ok(false);
            }
            let dist = (0..d).map(|k| (xi[k] - xj[k]).powi(2)).sum::<f64>().sqrt();
            if dist == 0.0 {
                return Err(Error::Spacing(format!("particles {i} and {j} share a position")));
            }
            *best = best.min(dist);
            Ok(true)
        };
        for &j in &order[p + 1..] {
            if !visit(j, &mut best)? {
                break;
            }
        }
        for &j in order[..p].iter().rev() {
            if !visit(j, &mut best)? {
                break;
            }
        }
        nearest[i] = best;
    }
    let h = ens.h;
    let hd = h.powi(d as i32);
    let position_min = nearest.iter().copied().fold(f64::INFINITY, f64::min) / h;
    let position_max = nearest.iter().copied().fold(0.0, f64::max) / h;
    let volume_min = ens.volumes.iter().copied().fold(f64::INFINITY, f64::min) / hd;
    let volume_max = ens.volumes.iter().copied().fold(0.0, f64::max) / hd;
    Ok(SpacingReport {
        position_min,
        position_max,
        volume_min,
        volume_max,
        c_hat: position_min.min(volume_min),
        c_big_hat: position_max.max(volume_max),
    })
}

/// Outcome of [`check_mutation_discretization`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MutationCheck {
    pub ok: bool,
    /// Largest observed `sum_i w_i m(t, x_i, y, I_d)`.
    pub max_sum: f64,
    pub bound: f64,
    /// `(t, y)` where the bound fails.
    pub witness: Option<(f64, Vec<f64>)>,
}

/// Checks `sum_i w_i m(t, x_i, y, I_d(t, x_i)) < K + r*/2` at every sampled `(t, y)`.
pub fn check_mutation_discretization(
    ens: &ParticleEnsemble,
    model: &ModelSpec,
    t_samples: &[f64],
    y_samples: &[Vec<f64>],
) -> Result<MutationCheck> {
    let bound = model.constants.k_const + 0.5 * model.constants.r_star;
    let Some(m) = &model.mutation else {
        return Ok(MutationCheck {
            ok: true,
            max_sum: 0.0,
            bound,
            witness: None,
        });
    };
    let mut out = MutationCheck {
        ok: true,
        max_sum: 0.0,
        bound,
        witness: None,
    };
    for &t in t_samples {
        let i_d: Vec<f64> = (0..ens.len())
            .map(|i| model.eval_nonlocal(KernelId::Mutation, t, ens.position(i), ens))
            .collect::<Result<_>>()?;
        for y in y_samples {
            let s =
                crate::sum::pairwise_sum_by(ens.len(), |i| ens.volumes[i] * m.density(t, ens.position(i), y, i_d[i]));
            if s > out.max_sum {
                out.max_sum = s;
            }
            if !(s < bound) && out.witness.is_none() {
                out.ok = false;
                out.witness = Some((t, y.clone()));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{library, Mutation};

    fn unit_interval_model() -> ModelSpec {
        library::logistic(Aabb::interval(0.0, 1.0)).unwrap()
    }

    #[test]
    fn uniform_tiling_of_unit_interval() {
        let v0 = InitialDensity::by_name("constant", &BTreeMap::new(), Aabb::interval(0.0, 1.0)).unwrap();
        let ens = partition_support(&v0, &unit_interval_model(), 0.25, 0.0).unwrap();
        assert_eq!(ens.len(), 4);
        assert!(ens.volumes.iter().all(|&w| w == 0.25));
        assert!(ens.intensities.iter().all(|&nu| nu == 1.0));
        assert_eq!(ens.mass(), 1.0);
        assert_eq!(ens.positions, vec![0.125, 0.375, 0.625, 0.875]);
    }

    #[test]
    fn figure_resolution_has_n_particles() {
        let m = library::advsel1d(6.0, 4.0).unwrap();
        let v0 = InitialDensity::by_name("one-minus-x", &BTreeMap::new(), Aabb::interval(0.0, 1.0)).unwrap();
        let ens = partition_support(&v0, &m, 1.0 / 5000.0, 1.0).unwrap();
        assert_eq!(ens.len(), 5000);
    }

    #[test]
    fn coarse_spacing_is_an_error() {
        let v0 = InitialDensity::new("spike", Aabb::interval(0.4, 0.45), 2, |_| 1.0);
        let err = partition_support(&v0, &unit_interval_model(), 2.0, 0.0).unwrap_err();
        assert!(matches!(err, Error::Discretization(_)));
    }

    #[test]
    fn idempotent_in_h() {
        let m = library::advsel1d(6.0, 4.0).unwrap();
        let v0 = InitialDensity::by_name("x-one-minus-x", &BTreeMap::new(), Aabb::interval(0.0, 1.0)).unwrap();
        let a = partition_support(&v0, &m, 0.01, 2.0).unwrap();
        let b = partition_support(&v0, &m, 0.01, 2.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mutation_support_cells_kept_with_zero_intensity() {
        let mut m = unit_interval_model();
        m.mutation = Some(Mutation::new(
            Aabb::interval(1.5, 2.0),
            Aabb::interval(0.0, 1.0),
            |_, _, _, _| 0.0,
        ));
        let v0 = InitialDensity::by_name("constant", &BTreeMap::new(), Aabb::interval(0.0, 1.0)).unwrap();
        let ens = partition_support(&v0, &m, 0.25, 0.0).unwrap();
        assert_eq!(ens.len(), 6);
        assert_eq!(&ens.intensities[4..], &[0.0, 0.0]);
    }

    #[test]
    fn fresh_lattice_spacing_constants() {
        let v0 = InitialDensity::by_name("constant", &BTreeMap::new(), Aabb::interval(0.0, 1.0)).unwrap();
        let ens = partition_support(&v0, &unit_interval_model(), 0.1, 0.0).unwrap();
        let rep = check_spacing(&ens).unwrap();
        assert!((rep.volume_min - 1.0).abs() < 1e-12 && (rep.volume_max - 1.0).abs() < 1e-12);
        assert!((rep.position_min - 1.0).abs() < 1e-9);
        assert!((rep.position_max - 1.0).abs() < 1e-9);
    }

    #[test]
    fn two_dimensional_lattice_spacing() {
        let m = library::logistic(Aabb::cube(2, 0.0, 1.0)).unwrap();
        let v0 = InitialDensity::by_name("constant", &BTreeMap::new(), Aabb::cube(2, 0.0, 1.0)).unwrap();
        let ens = partition_support(&v0, &m, 0.1, 0.0).unwrap();
        assert_eq!(ens.len(), 100);
        let rep = check_spacing(&ens).unwrap();
        assert!((rep.c_hat - 1.0).abs() < 1e-9 && (rep.c_big_hat - 1.0).abs() < 1e-9);
    }

    #[test]
    fn duplicate_positions_rejected() {
        let ens = ParticleEnsemble::from_particles(1, 0.1, &[(vec![0.5], 0.1, 1.0), (vec![0.5], 0.1, 1.0)]).unwrap();
        assert!(matches!(check_spacing(&ens), Err(Error::Spacing(_))));
    }

    #[test]
    fn zero_mutation_passes_discretization_check() {
        let m = unit_interval_model();
        let v0 = InitialDensity::by_name("constant", &BTreeMap::new(), Aabb::interval(0.0, 1.0)).unwrap();
        let ens = partition_support(&v0, &m, 0.1, 0.0).unwrap();
        let c = check_mutation_discretization(&ens, &m, &[0.0], &[vec![0.5]]).unwrap();
        assert!(c.ok);
    }
}
