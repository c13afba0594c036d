//! Cut-off functions and the smooth reconstructions
//! `v_eps^h(x) = sum_i nu_i w_i eps^{-d} phi((x - x_i) / eps)` and
//! `(Pi_eps^h f)(x) = sum_i w_i f(x_i) eps^{-d} phi((x - x_i) / eps)`.
//!
//! Reconstructions are sampled on uniform grids only; integrals and L1
//! norms are trapezoid sums on the grid.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::geometry::Aabb;
use crate::sum::pairwise_sum_by;

/// Radius beyond which the Gaussian tail is below 1e-16 of its peak mass.
pub const GAUSSIAN_TRUNCATION: f64 = 9.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CutoffKind {
    /// Standard normal density, order 2, not compactly supported.
    Gaussian,
    /// Standard normal density cut at radius 9, order 2.
    TruncatedGaussian,
    /// Tensor product of centered cubic B-splines, support `[-2, 2]^d`, order 2.
    CubicBSpline,
    /// `((d + 2) / 2 - |x|^2 / 2)` times the Gaussian, order 4.
    Gaussian4,
}

pub const CUTOFF_NAMES: [&str; 4] = ["gaussian", "truncated-gaussian", "cubic-bspline", "gaussian4"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cutoff {
    pub kind: CutoffKind,
    pub dim: usize,
}

impl Cutoff {
    pub fn new(kind: CutoffKind, dim: usize) -> Self {
        Self { kind, dim }
    }

    pub fn gaussian(dim: usize) -> Self {
        Self::new(CutoffKind::Gaussian, dim)
    }

    pub fn by_name(name: &str, dim: usize) -> Result<Self> {
        let kind = match name {
            "gaussian" => CutoffKind::Gaussian,
            "truncated-gaussian" => CutoffKind::TruncatedGaussian,
            "cubic-bspline" | "bspline3" => CutoffKind::CubicBSpline,
            "gaussian4" => CutoffKind::Gaussian4,
            other => {
                return Err(Error::Configuration(format!(
                    "unknown cut-off '{other}' (known: {})",
                    CUTOFF_NAMES.join(", ")
                )))
            }
        };
        if dim == 0 {
            return Err(Error::Configuration("cut-off dimension must be positive".into()));
        }
        Ok(Self::new(kind, dim))
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            CutoffKind::Gaussian => "gaussian",
            CutoffKind::TruncatedGaussian => "truncated-gaussian",
            CutoffKind::CubicBSpline => "cubic-bspline",
            CutoffKind::Gaussian4 => "gaussian4",
        }
    }

    /// Declared moment order `r`.
    pub fn order(&self) -> u32 {
        match self.kind {
            CutoffKind::Gaussian4 => 4,
            _ => 2,
        }
    }

    /// Support radius in the sup norm (`None` when not compactly supported).
    pub fn radius(&self) -> Option<f64> {
        match self.kind {
            CutoffKind::Gaussian | CutoffKind::Gaussian4 => None,
            CutoffKind::TruncatedGaussian => Some(GAUSSIAN_TRUNCATION),
            CutoffKind::CubicBSpline => Some(2.0),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let gauss = || (2.0 * PI).powf(-(self.dim as f64) / 2.0) * (-0.5 * r2).exp();
        match self.kind {
            CutoffKind::Gaussian => gauss(),
            CutoffKind::TruncatedGaussian => {
                if r2 <= GAUSSIAN_TRUNCATION * GAUSSIAN_TRUNCATION {
                    gauss()
                } else {
                    0.0
                }
            }
            CutoffKind::CubicBSpline => x.iter().map(|&v| bspline3(v)).product(),
            CutoffKind::Gaussian4 => ((self.dim as f64 + 2.0) / 2.0 - 0.5 * r2) * gauss(),
        }
    }

    /// `eps^{-d} phi(x / eps)`.
    pub fn eval_scaled(&self, x: &[f64], eps: f64) -> f64 {
        let y: Vec<f64> = x.iter().map(|v| v / eps).collect();
        self.eval(&y) / eps.powi(self.dim as i32)
    }

    /// Half-width of the box used for moment quadrature.
    fn quadrature_radius(&self) -> f64 {
        self.radius().unwrap_or(12.0)
    }
}

fn bspline3(x: f64) -> f64 {
    let a = x.abs();
    if a < 1.0 {
        2.0 / 3.0 - a * a + 0.5 * a * a * a
    } else if a < 2.0 {
        (2.0 - a).powi(3) / 6.0
    } else {
        0.0
    }
}

/// One computed moment `int x^alpha phi(x) dx`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Moment {
    pub alpha: Vec<u32>,
    pub value: f64,
    pub expected: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub cutoff: String,
    pub requested_order: u32,
    pub moments: Vec<Moment>,
    pub passed: bool,
    /// Smallest degree `n >= 1` with a non-vanishing moment (the order `r`),
    /// `None` if all moments up to degree 6 vanish.
    pub detected_order: Option<u32>,
}

const MAX_DIM: usize = 8;

pub const MOMENT_TOL: f64 = 1e-8;

const GL5_NODES: [f64; 5] = [
    0.0,
    -0.538_469_310_105_683_1,
    0.538_469_310_105_683_1,
    -0.906_179_845_938_664,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

/// Composite 5-point Gauss-Legendre rule on `[-radius, radius]` with panels
/// of width `panel` (panel edges on multiples of `panel`, so spline knots are
/// never inside a panel).
fn gauss_legendre_1d(radius: f64, panel: f64) -> (Vec<f64>, Vec<f64>) {
    let panels = (2.0 * radius / panel).round() as usize;
    let mut nodes = Vec::with_capacity(panels * 5);
    let mut weights = Vec::with_capacity(panels * 5);
    for p in 0..panels {
        let a = -radius + p as f64 * panel;
        let mid = a + 0.5 * panel;
        for (z, w) in GL5_NODES.iter().zip(GL5_WEIGHTS) {
            nodes.push(mid + 0.5 * panel * z);
            weights.push(0.5 * panel * w);
        }
    }
    (nodes, weights)
}

fn multi_indices(dim: usize, degree: u32) -> Vec<Vec<u32>> {
    fn rec(dim: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() + 1 == dim {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in (0..=left).rev() {
            prefix.push(k);
            rec(dim, left - k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(dim, degree, &mut Vec::new(), &mut out);
    out
}

/// Numerically integrates `x^alpha phi` for all `|alpha| <= r - 1` (and a few
/// higher degrees to detect the actual order). The tensor Gauss-Legendre
/// rule is exact for the spline pieces and spectrally accurate for the
/// Gaussian family.
pub fn verify_moments(phi: &Cutoff, r: u32) -> Result<MomentReport> {
    if r < 1 {
        return Err(Error::InvalidArgument("moment order must be >= 1".into()));
    }
    let d = phi.dim;
    if d > 3 {
        return Err(Error::InvalidArgument("moment verification supports d <= 3".into()));
    }
    let panel = match d {
        1 => 0.25,
        2 => 0.5,
        _ => 1.0,
    };
    let (nodes, weights) = gauss_legendre_1d(phi.quadrature_radius(), panel);
    let m = nodes.len();
    let total = m.pow(d as u32);
    let max_degree = r.max(6);
    let indices: Vec<Vec<u32>> = (0..=max_degree).flat_map(|deg| multi_indices(d, deg)).collect();

    let mut point = vec![0.0; d];
    let mut acc = vec![0.0; indices.len()];
    for flat in 0..total {
        let mut rem = flat;
        let mut w = 1.0;
        for k in (0..d).rev() {
            let idx = rem % m;
            rem /= m;
            point[k] = nodes[idx];
            w *= weights[idx];
        }
        let f = phi.eval(&point) * w;
        if f == 0.0 {
            continue;
        }
        for (a, alpha) in acc.iter_mut().zip(&indices) {
            let mono: f64 = alpha.iter().zip(&point).map(|(&p, &x)| x.powi(p as i32)).product();
            *a += mono * f;
        }
    }

    let mut moments = Vec::new();
    let mut detected_order = None;
    for (value, alpha) in acc.iter().zip(&indices) {
        let deg: u32 = alpha.iter().sum();
        let expected = if deg == 0 { 1.0 } else { 0.0 };
        let pass = (value - expected).abs() <= MOMENT_TOL;
        if deg >= 1 && !pass && detected_order.is_none_or(|o| deg < o) {
            detected_order = Some(deg);
        }
        if deg < r {
            moments.push(Moment {
                alpha: alpha.clone(),
                value: *value,
                expected,
                pass,
            });
        }
    }
    let passed = moments.iter().all(|m| m.pass);
    Ok(MomentReport {
        cutoff: phi.name().to_string(),
        requested_order: r,
        moments,
        passed,
        detected_order,
    })
}

/// Rule choosing the regularization scale from the particle spacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum EpsilonRule {
    /// `eps = h^q`, `0 < q < 1`.
    Power { q: f64 },
    /// `eps = h^{kappa / (kappa + r)}`.
    Optimal { kappa: f64, r: f64 },
}

impl EpsilonRule {
    pub fn exponent(&self) -> Result<f64> {
        let q = match *self {
            EpsilonRule::Power { q } => q,
            EpsilonRule::Optimal { kappa, r } => {
                if !(kappa > 0.0 && r > 0.0) {
                    return Err(Error::InvalidArgument(format!("kappa = {kappa}, r = {r}")));
                }
                kappa / (kappa + r)
            }
        };
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::InvalidArgument(format!("epsilon exponent {q} outside (0, 1)")));
        }
        Ok(q)
    }

    pub fn apply(&self, h: f64) -> Result<f64> {
        if !(h > 0.0) {
            return Err(Error::InvalidArgument(format!("h = {h}")));
        }
        Ok(h.powf(self.exponent()?))
    }
}

pub fn epsilon_rule(h: f64, rule: EpsilonRule) -> Result<f64> {
    rule.apply(h)
}

/// Tensor grid of `counts[k]` nodes `origin[k] + j * spacing[k]` per axis,
/// axis 0 slowest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformGrid {
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
    pub counts: Vec<usize>,
}

impl UniformGrid {
    pub fn new(origin: Vec<f64>, spacing: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        if origin.len() != spacing.len() || origin.len() != counts.len() || origin.is_empty() {
            return Err(Error::InvalidArgument("grid axes disagree".into()));
        }
        if spacing.iter().any(|&s| !(s > 0.0)) || counts.contains(&0) {
            return Err(Error::InvalidArgument(
                "grid spacing and counts must be positive".into(),
            ));
        }
        Ok(Self {
            origin,
            spacing,
            counts,
        })
    }

    /// `n` equispaced nodes from `lo` to `hi` inclusive.
    pub fn interval(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 || !(hi > lo) {
            return Err(Error::InvalidArgument(format!("grid [{lo}, {hi}] with {n} nodes")));
        }
        Self::new(vec![lo], vec![(hi - lo) / (n - 1) as f64], vec![n])
    }

    /// Nodes covering `bbox` with spacing at most `max_spacing` on every axis.
    pub fn covering(bbox: &Aabb, max_spacing: f64) -> Result<Self> {
        if !(max_spacing > 0.0) {
            return Err(Error::InvalidArgument(format!("spacing {max_spacing}")));
        }
        let d = bbox.dim();
        let mut counts = Vec::with_capacity(d);
        let mut spacing = Vec::with_capacity(d);
        for k in 0..d {
            let width = bbox.width(k);
            let cells = ((width / max_spacing) - 1e-9).ceil().max(1.0) as usize;
            counts.push(cells + 1);
            spacing.push(if width > 0.0 { width / cells as f64 } else { max_spacing });
        }
        Self::new(bbox.lo.clone(), spacing, counts)
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, flat: usize, out: &mut [f64]) {
        let mut rem = flat;
        for k in (0..self.dim()).rev() {
            let j = rem % self.counts[k];
            rem /= self.counts[k];
            out[k] = self.origin[k] + j as f64 * self.spacing[k];
        }
    }

    /// All nodes, flattened with stride `dim`.
    pub fn points(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; self.len() * d];
        for (i, chunk) in out.chunks_mut(d).enumerate() {
            self.point(i, chunk);
        }
        out
    }

    /// Trapezoid weight of node `flat`.
    pub fn weight(&self, flat: usize) -> f64 {
        let mut rem = flat;
        let mut w = 1.0;
        for k in (0..self.dim()).rev() {
            let j = rem % self.counts[k];
            rem /= self.counts[k];
            let edge = self.counts[k] > 1 && (j == 0 || j + 1 == self.counts[k]);
            w *= if self.counts[k] == 1 {
                1.0
            } else if edge {
                0.5 * self.spacing[k]
            } else {
                self.spacing[k]
            };
        }
        w
    }

    pub fn bbox(&self) -> Aabb {
        let hi = (0..self.dim())
            .map(|k| self.origin[k] + (self.counts[k] - 1) as f64 * self.spacing[k])
            .collect();
        Aabb::new(self.origin.clone(), hi)
    }

    pub fn same_as(&self, other: &UniformGrid) -> bool {
        self.counts == other.counts
            && self
                .origin
                .iter()
                .chain(&self.spacing)
                .zip(other.origin.iter().chain(&other.spacing))
                .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0))
    }
}

/// Values of a function at the nodes of a [`UniformGrid`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledFunction {
    pub grid: UniformGrid,
    pub values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(grid: UniformGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::SizeMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64 + Sync>(grid: UniformGrid, f: F) -> Self {
        let d = grid.dim();
        let values = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let mut x = vec![0.0; d];
                grid.point(i, &mut x);
                f(&x)
            })
            .collect();
        Self { grid, values }
    }

    pub fn integral(&self) -> f64 {
        pairwise_sum_by(self.values.len(), |i| self.grid.weight(i) * self.values[i])
    }

    pub fn l1_norm(&self) -> f64 {
        pairwise_sum_by(self.values.len(), |i| self.grid.weight(i) * self.values[i].abs())
    }

    pub fn l1_distance(&self, other: &SampledFunction) -> Result<f64> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch("sampled functions live on different grids".into()));
        }
        Ok(pairwise_sum_by(self.values.len(), |i| {
            self.grid.weight(i) * (self.values[i] - other.values[i]).abs()
        }))
    }
}

/// `sum_i c_i eps^{-d} phi((x - x_i) / eps)` at each of `points`.
///
/// Particles are visited in order of their first coordinate; for compactly
/// supported cut-offs only those within the support window on that axis.
pub fn convolve_at(
    positions: &[f64],
    coefficients: &[f64],
    dim: usize,
    phi: &Cutoff,
    eps: f64,
    points: &[f64],
) -> Result<Vec<f64>> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidArgument(format!("eps = {eps}")));
    }
    if phi.dim != dim {
        return Err(Error::InvalidArgument(format!(
            "cut-off dimension {} for {dim}-dimensional particles",
            phi.dim
        )));
    }
    if dim > MAX_DIM {
        return Err(Error::InvalidArgument(format!(
            "reconstruction supports d <= {MAX_DIM}"
        )));
    }
    let n = coefficients.len();
    if positions.len() != n * dim {
        return Err(Error::SizeMismatch {
            expected: n * dim,
            got: positions.len(),
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| positions[a * dim].total_cmp(&positions[b * dim]).then(a.cmp(&b)));
    let keys: Vec<f64> = order.iter().map(|&i| positions[i * dim]).collect();
    let reach = phi.radius().map(|r| r * eps);
    let scale = eps.powi(dim as i32).recip();

    Ok(points
        .par_chunks(dim)
        .map(|x| {
            let (start, end) = match reach {
                Some(r) => (
                    keys.partition_point(|&k| k < x[0] - r),
                    keys.partition_point(|&k| k <= x[0] + r),
                ),
                None => (0, n),
            };
            pairwise_sum_by(end - start, |s| {
                let i = order[start + s];
                let c = coefficients[i];
                if c == 0.0 {
                    return 0.0;
                }
                let mut y = [0.0; MAX_DIM];
                for k in 0..dim {
                    y[k] = (x[k] - positions[i * dim + k]) / eps;
                }
                c * phi.eval(&y[..dim])
            }) * scale
        })
        .collect())
}

/// Samples `v_eps^h` on `grid`.
pub fn reconstruct(ens: &ParticleEnsemble, phi: &Cutoff, eps: f64, grid: &UniformGrid) -> Result<SampledFunction> {
    if grid.dim() != ens.dim {
        return Err(Error::GridMismatch(format!(
            "{}-dimensional grid for {}-dimensional ensemble",
            grid.dim(),
            ens.dim
        )));
    }
    let values = convolve_at(&ens.positions, &ens.alphas(), ens.dim, phi, eps, &grid.points())?;
    SampledFunction::new(grid.clone(), values)
}

/// Samples `Pi_eps^h f` on `grid`, with `f` given at the particle positions.
pub fn project(
    values_at_particles: &[f64],
    ens: &ParticleEnsemble,
    phi: &Cutoff,
    eps: f64,
    grid: &UniformGrid,
) -> Result<SampledFunction> {
    if values_at_particles.len() != ens.len() {
        return Err(Error::SizeMismatch {
            expected: ens.len(),
            got: values_at_particles.len(),
        });
    }
    if grid.dim() != ens.dim {
        return Err(Error::GridMismatch("grid and ensemble dimensions differ".into()));
    }
    let coefficients: Vec<f64> = values_at_particles
        .iter()
        .zip(&ens.volumes)
        .map(|(f, w)| f * w)
        .collect();
    let values = convolve_at(&ens.positions, &coefficients, ens.dim, phi, eps, &grid.points())?;
    SampledFunction::new(grid.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_kernels_pass_declared_order() {
        for name in CUTOFF_NAMES {
            for dim in 1..=2 {
                let phi = Cutoff::by_name(name, dim).unwrap();
                let report = verify_moments(&phi, phi.order()).unwrap();
                assert!(report.passed, "{name} d={dim}: {report:?}");
                assert_eq!(report.detected_order, Some(phi.order()), "{name} d={dim}");
            }
        }
    }

    #[test]
    fn gaussian_second_moment_is_one() {
        let report = verify_moments(&Cutoff::gaussian(1), 3).unwrap();
        assert!(!report.passed);
        let second = report.moments.iter().find(|m| m.alpha == vec![2]).unwrap();
        assert!((second.value - 1.0).abs() < 1e-12);
        assert_eq!(report.detected_order, Some(2));
    }

    #[test]
    fn gaussian4_explicit_formula() {
        let phi = Cutoff::by_name("gaussian4", 1).unwrap();
        let x = 0.7f64;
        let expected = (1.5 - x * x / 2.0) * (-x * x / 2.0).exp() / (2.0 * PI).sqrt();
        assert!((phi.eval(&[x]) - expected).abs() < 1e-15);
    }

    #[test]
    fn unknown_cutoff() {
        assert!(matches!(Cutoff::by_name("tophat", 1), Err(Error::Configuration(_))));
        assert!(verify_moments(&Cutoff::gaussian(1), 0).is_err());
    }

    #[test]
    fn epsilon_rules() {
        let e = epsilon_rule(0.02, EpsilonRule::Power { q: 0.8 }).unwrap();
        assert!((e - 0.043_73).abs() < 1e-5);
        let e = epsilon_rule(1.0 / 5000.0, EpsilonRule::Power { q: 0.5 }).unwrap();
        assert!((e - 0.014_14).abs() < 1e-5);
        let q = EpsilonRule::Optimal { kappa: 2.0, r: 2.0 }.exponent().unwrap();
        assert_eq!(q, 0.5);
        assert!(epsilon_rule(0.1, EpsilonRule::Power { q: 1.0 }).is_err());
        assert!(epsilon_rule(0.1, EpsilonRule::Power { q: 0.0 }).is_err());
    }

    #[test]
    fn single_particle_reproduces_kernel() {
        let ens = ParticleEnsemble::from_particles(1, 1.0, &[(vec![0.0], 1.0, 1.0)]).unwrap();
        let grid = UniformGrid::interval(-3.0, 3.0, 61).unwrap();
        let phi = Cutoff::gaussian(1);
        let rec = reconstruct(&ens, &phi, 1.0, &grid).unwrap();
        for (i, v) in rec.values.iter().enumerate() {
            let x = -3.0 + 0.1 * i as f64;
            assert!((v - phi.eval(&[x])).abs() < 1e-15);
        }
    }

    #[test]
    fn project_zero_is_zero() {
        let ens = ParticleEnsemble::from_particles(1, 0.1, &[(vec![0.0], 0.1, 1.0), (vec![0.1], 0.1, 2.0)]).unwrap();
        let grid = UniformGrid::interval(-1.0, 1.0, 21).unwrap();
        let p = project(&[0.0, 0.0], &ens, &Cutoff::gaussian(1), 0.3, &grid).unwrap();
        assert!(p.values.iter().all(|&v| v == 0.0));
        assert!(matches!(
            project(&[0.0], &ens, &Cutoff::gaussian(1), 0.3, &grid),
            Err(Error::SizeMismatch { .. })
        ));
    }

    #[test]
    fn truncated_window_matches_full_sum() {
        let parts: Vec<_> = (0..200)
            .map(|i| (vec![i as f64 * 0.01], 0.01, 1.0 + (i % 7) as f64))
            .collect();
        let ens = ParticleEnsemble::from_particles(1, 0.01, &parts).unwrap();
        let grid = UniformGrid::interval(-0.5, 2.5, 301).unwrap();
        let a = reconstruct(&ens, &Cutoff::gaussian(1), 0.05, &grid).unwrap();
        let b = reconstruct(&ens, &Cutoff::by_name("truncated-gaussian", 1).unwrap(), 0.05, &grid).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() <= 1e-14 * x.abs().max(1.0));
        }
    }

    #[test]
    fn grid_weights_and_covering() {
        let g = UniformGrid::covering(&Aabb::cube(2, 0.0, 1.0), 0.3).unwrap();
        assert_eq!(g.counts, vec![5, 5]);
        let ones = SampledFunction::new(g.clone(), vec![1.0; g.len()]).unwrap();
        assert!((ones.integral() - 1.0).abs() < 1e-14);
        assert_eq!(g.bbox(), Aabb::cube(2, 0.0, 1.0));
        let other = UniformGrid::interval(0.0, 1.0, 5).unwrap();
        let f = SampledFunction::new(other, vec![0.0; 5]).unwrap();
        assert!(matches!(ones.l1_distance(&f), Err(Error::GridMismatch(_))));
    }
}
