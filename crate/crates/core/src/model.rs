//! Problem definition: coefficients, interaction kernels, hypothesis
//! constants, and evaluation of the non-local terms against a particle
//! ensemble.
//!
//! Coefficients are closures so that models can be assembled
//! programmatically (see [`library`] for the built-in presets). Derivatives
//! are supplied by the caller or, on request, approximated by central finite
//! differences with step `sqrt(eps) * max(1, |x|)`.

pub mod library;
mod validate;

use std::fmt;
use std::sync::Arc;

use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::geometry::Aabb;
use crate::sum::{pairwise_sum_by, pairwise_sum_vec_by};

pub use validate::{validate_model, Hypothesis, ValidationReport, Violation};

/// `(t, x, I, out)`: writes a vector field value into `out`.
pub type VelocityFn = dyn Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync;
/// `(t, x, I) -> scalar`.
pub type DivergenceFn = dyn Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync;
/// `(t, x, I, k, out)`: writes `da/dI_k` into `out`.
pub type ArgGradientFn = dyn Fn(f64, &[f64], &[f64], usize, &mut [f64]) + Send + Sync;
/// `(t, x, I) -> R`.
pub type GrowthFn = dyn Fn(f64, &[f64], f64) -> f64 + Send + Sync;
/// `(t, x, y, I) -> m`.
pub type MutationFn = dyn Fn(f64, &[f64], &[f64], f64) -> f64 + Send + Sync;
/// `(t, x, y) -> psi`.
pub type KernelFn = dyn Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync;
/// `(t, x, y, out)`: writes `grad_x psi` into `out`.
pub type KernelGradFn = dyn Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync;

/// How a derivative reaches the scheme.
pub enum Derivative<F: ?Sized> {
    Supplied(Arc<F>),
    FiniteDifference,
    /// Identically zero.
    Zero,
    Missing,
}

impl<F: ?Sized> Clone for Derivative<F> {
    fn clone(&self) -> Self {
        match self {
            Derivative::Supplied(f) => Derivative::Supplied(Arc::clone(f)),
            Derivative::FiniteDifference => Derivative::FiniteDifference,
            Derivative::Zero => Derivative::Zero,
            Derivative::Missing => Derivative::Missing,
        }
    }
}

impl<F: ?Sized> Derivative<F> {
    pub fn is_supplied(&self) -> bool {
        matches!(self, Derivative::Supplied(_))
    }
}

/// Central finite-difference step for coordinate value `v`.
#[inline]
pub fn fd_step(v: f64) -> f64 {
    f64::EPSILON.sqrt() * v.abs().max(1.0)
}

/// Advection field `a(t, x, I_1..I_n)`.
#[derive(Clone)]
pub struct Advection {
    dim: usize,
    n_args: usize,
    local: bool,
    velocity: Arc<VelocityFn>,
    divergence: Derivative<DivergenceFn>,
    arg_gradient: Derivative<ArgGradientFn>,
}

impl Advection {
    /// Local field `a(t, x)`; the divergence must be attached separately.
    pub fn local<F>(dim: usize, f: F) -> Self
    where
        F: Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            dim,
            n_args: 0,
            local: true,
            velocity: Arc::new(move |t, x, _args, out| f(t, x, out)),
            divergence: Derivative::Missing,
            arg_gradient: Derivative::Zero,
        }
    }

    /// Non-local field depending on `n_args` kernel integrals.
    pub fn nonlocal<F>(dim: usize, n_args: usize, f: F) -> Self
    where
        F: Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            dim,
            n_args,
            local: false,
            velocity: Arc::new(f),
            divergence: Derivative::Missing,
            arg_gradient: Derivative::Missing,
        }
    }

    /// The zero field (local).
    pub fn zero(dim: usize) -> Self {
        Self::local(dim, |_, _, out| out.iter_mut().for_each(|v| *v = 0.0)).with_divergence(|_, _, _| 0.0)
    }

    /// Attach `div_x a(t, x, I)` at frozen `I`.
    pub fn with_divergence<F>(mut self, f: F) -> Self
    where
        F: Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        self.divergence = Derivative::Supplied(Arc::new(f));
        self
    }

    pub fn with_fd_divergence(mut self) -> Self {
        self.divergence = Derivative::FiniteDifference;
        self
    }

    /// Attach `da/dI_k`.
    pub fn with_arg_gradient<F>(mut self, f: F) -> Self
    where
        F: Fn(f64, &[f64], &[f64], usize, &mut [f64]) + Send + Sync + 'static,
    {
        self.arg_gradient = Derivative::Supplied(Arc::new(f));
        self
    }

    pub fn with_fd_arg_gradient(mut self) -> Self {
        self.arg_gradient = Derivative::FiniteDifference;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_args(&self) -> usize {
        self.n_args
    }

    pub fn is_local(&self) -> bool {
        self.local
    }

    pub fn has_divergence(&self) -> bool {
        !matches!(self.divergence, Derivative::Missing)
    }

    pub(crate) fn divergence_kind(&self) -> &Derivative<DivergenceFn> {
        &self.divergence
    }

    pub(crate) fn arg_gradient_kind(&self) -> &Derivative<ArgGradientFn> {
        &self.arg_gradient
    }

    #[inline]
    pub fn velocity(&self, t: f64, x: &[f64], args: &[f64], out: &mut [f64]) {
        (self.velocity)(t, x, args, out)
    }

    /// `div_x a` at frozen arguments.
    pub fn divergence(&self, t: f64, x: &[f64], args: &[f64]) -> Result<f64> {
        match &self.divergence {
            Derivative::Supplied(f) => Ok(f(t, x, args)),
            Derivative::FiniteDifference => Ok(self.fd_divergence(t, x, args)),
            Derivative::Zero => Ok(0.0),
            Derivative::Missing => Err(Error::Configuration(
                "advection divergence is neither supplied nor set to finite differences".into(),
            )),
        }
    }

    /// Central finite-difference divergence at frozen arguments.
    pub fn fd_divergence(&self, t: f64, x: &[f64], args: &[f64]) -> f64 {
        let d = self.dim;
        let mut xp = x.to_vec();
        let mut fp = vec![0.0; d];
        let mut fm = vec![0.0; d];
        let mut div = 0.0;
        for k in 0..d {
            let step = fd_step(x[k]);
            xp[k] = x[k] + step;
            self.velocity(t, &xp, args, &mut fp);
            xp[k] = x[k] - step;
            self.velocity(t, &xp, args, &mut fm);
            xp[k] = x[k];
            div += (fp[k] - fm[k]) / (2.0 * step);
        }
        div
    }

    /// `da/dI_k` written into `out`.
    pub fn arg_gradient(&self, t: f64, x: &[f64], args: &[f64], k: usize, out: &mut [f64]) -> Result<()> {
        match &self.arg_gradient {
            Derivative::Supplied(f) => {
                f(t, x, args, k, out);
                Ok(())
            }
            Derivative::FiniteDifference => {
                self.fd_arg_gradient(t, x, args, k, out);
                Ok(())
            }
            Derivative::Zero => {
                out.iter_mut().for_each(|v| *v = 0.0);
                Ok(())
            }
            Derivative::Missing => Err(Error::Configuration(
                "non-local advection needs da/dI (supplied or finite differences)".into(),
            )),
        }
    }

    pub fn fd_arg_gradient(&self, t: f64, x: &[f64], args: &[f64], k: usize, out: &mut [f64]) {
        let d = self.dim;
        let mut ap = args.to_vec();
        let mut fm = vec![0.0; d];
        let step = fd_step(args[k]);
        ap[k] = args[k] + step;
        self.velocity(t, x, &ap, out);
        ap[k] = args[k] - step;
        self.velocity(t, x, &ap, &mut fm);
        for c in 0..d {
            out[c] = (out[c] - fm[c]) / (2.0 * step);
        }
    }
}

/// Growth rate `R(t, x, I)`.
#[derive(Clone)]
pub struct Growth {
    rate: Arc<GrowthFn>,
    d_rate: Derivative<GrowthFn>,
}

impl Growth {
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(f64, &[f64], f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            rate: Arc::new(f),
            d_rate: Derivative::FiniteDifference,
        }
    }

    pub fn zero() -> Self {
        Self::new(|_, _, _| 0.0).with_d_rate(|_, _, _| 0.0)
    }

    pub fn with_d_rate<F>(mut self, f: F) -> Self
    where
        F: Fn(f64, &[f64], f64) -> f64 + Send + Sync + 'static,
    {
        self.d_rate = Derivative::Supplied(Arc::new(f));
        self
    }

    #[inline]
    pub fn rate(&self, t: f64, x: &[f64], i: f64) -> f64 {
        (self.rate)(t, x, i)
    }

    /// `dR/dI`.
    pub fn d_rate(&self, t: f64, x: &[f64], i: f64) -> f64 {
        match &self.d_rate {
            Derivative::Supplied(f) => f(t, x, i),
            _ => {
                let s = fd_step(i);
                (self.rate(t, x, i + s) - self.rate(t, x, i - s)) / (2.0 * s)
            }
        }
    }
}

/// Mutation kernel `m(t, x, y, I)` with the boxes enclosing its x- and
/// y-supports. The density must vanish outside them.
#[derive(Clone)]
pub struct Mutation {
    density: Arc<MutationFn>,
    pub support_x: Aabb,
    pub support_y: Aabb,
}

impl Mutation {
    pub fn new<F>(support_x: Aabb, support_y: Aabb, f: F) -> Self
    where
        F: Fn(f64, &[f64], &[f64], f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            density: Arc::new(f),
            support_x,
            support_y,
        }
    }

    #[inline]
    pub fn density(&self, t: f64, x: &[f64], y: &[f64], i: f64) -> f64 {
        (self.density)(t, x, y, i)
    }
}

/// Interaction kernel `psi(t, x, y)`.
#[derive(Clone)]
pub struct Kernel {
    value: Arc<KernelFn>,
    grad_x: Derivative<KernelGradFn>,
    x_independent: bool,
}

impl Kernel {
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            value: Arc::new(f),
            grad_x: Derivative::Missing,
            x_independent: false,
        }
    }

    /// Kernel that ignores `x`; its x-gradient is zero and its particle sum
    /// is shared by every evaluation point.
    pub fn x_independent<F>(f: F) -> Self
    where
        F: Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            value: Arc::new(move |t, _x, y| f(t, y)),
            grad_x: Derivative::Zero,
            x_independent: true,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::x_independent(move |_, _| c)
    }

    pub fn with_grad_x<F>(mut self, f: F) -> Self
    where
        F: Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.grad_x = Derivative::Supplied(Arc::new(f));
        self
    }

    pub fn with_fd_grad_x(mut self) -> Self {
        if !self.x_independent {
            self.grad_x = Derivative::FiniteDifference;
        }
        self
    }

    pub fn is_x_independent(&self) -> bool {
        self.x_independent
    }

    pub fn has_grad_x(&self) -> bool {
        !matches!(self.grad_x, Derivative::Missing)
    }

    pub(crate) fn grad_kind(&self) -> &Derivative<KernelGradFn> {
        &self.grad_x
    }

    #[inline]
    pub fn value(&self, t: f64, x: &[f64], y: &[f64]) -> f64 {
        (self.value)(t, x, y)
    }

    /// `grad_x psi(t, x, y)` into `out`.
    pub fn grad_x(&self, t: f64, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.grad_x {
            Derivative::Supplied(f) => {
                f(t, x, y, out);
                Ok(())
            }
            Derivative::FiniteDifference => {
                self.fd_grad_x(t, x, y, out);
                Ok(())
            }
            Derivative::Zero => {
                out.iter_mut().for_each(|v| *v = 0.0);
                Ok(())
            }
            Derivative::Missing => Err(Error::Configuration(
                "kernel x-gradient is required for non-local advection".into(),
            )),
        }
    }

    pub fn fd_grad_x(&self, t: f64, x: &[f64], y: &[f64], out: &mut [f64]) {
        let mut xp = x.to_vec();
        for k in 0..x.len() {
            let s = fd_step(x[k]);
            xp[k] = x[k] + s;
            let fp = self.value(t, &xp, y);
            xp[k] = x[k] - s;
            let fm = self.value(t, &xp, y);
            xp[k] = x[k];
            out[k] = (fp - fm) / (2.0 * s);
        }
    }
}

/// Constants of the growth/mutation hypotheses; trusted inputs that
/// [`validate_model`] cross-checks by sampling.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HypothesisConstants {
    /// Population level above which growth is strictly negative.
    pub i_star: f64,
    pub r_star: f64,
    pub m_bar: f64,
    /// L1 bound of the mutation envelope.
    pub k_const: f64,
}

/// Regularity integers entering rate predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Regularity {
    pub kappa: u32,
    pub k_reg: u32,
    pub r_order: u32,
}

/// Selects one of the model's interaction kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelId {
    /// `k`-th advection kernel.
    Advection(usize),
    Growth,
    Mutation,
}

impl fmt::Display for KernelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelId::Advection(k) => write!(f, "psi_a[{k}]"),
            KernelId::Growth => write!(f, "psi_g"),
            KernelId::Mutation => write!(f, "psi_d"),
        }
    }
}

/// A complete problem instance.
#[derive(Clone)]
pub struct ModelSpec {
    pub name: String,
    pub dim: usize,
    pub advection: Advection,
    pub kernels_a: Vec<Kernel>,
    pub growth: Growth,
    pub kernel_g: Kernel,
    pub psi_g_min: f64,
    pub kernel_d: Kernel,
    /// `None` means `m = 0`.
    pub mutation: Option<Mutation>,
    pub support_v0: Aabb,
    /// Declared sup-norm bound on the advection field.
    pub a_sup: f64,
    pub constants: HypothesisConstants,
    pub regularity: Regularity,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("n_args", &self.advection.n_args())
            .field("local", &self.advection.is_local())
            .field("mutation", &self.mutation.is_some())
            .field("support_v0", &self.support_v0)
            .field("a_sup", &self.a_sup)
            .field("constants", &self.constants)
            .finish()
    }
}

/// Builder for [`ModelSpec`]; `build` checks structural consistency.
pub struct ModelBuilder {
    spec: ModelSpec,
}

impl ModelBuilder {
    pub fn new(name: impl Into<String>, advection: Advection, support_v0: Aabb) -> Self {
        let dim = advection.dim();
        Self {
            spec: ModelSpec {
                name: name.into(),
                dim,
                advection,
                kernels_a: Vec::new(),
                growth: Growth::zero(),
                kernel_g: Kernel::constant(1.0),
                psi_g_min: 1.0,
                kernel_d: Kernel::constant(0.0),
                mutation: None,
                support_v0,
                a_sup: 0.0,
                constants: HypothesisConstants {
                    i_star: 0.0,
                    r_star: 0.0,
                    m_bar: 0.0,
                    k_const: 0.0,
                },
                regularity: Regularity {
                    kappa: 2,
                    k_reg: 2,
                    r_order: 2,
                },
            },
        }
    }

    pub fn advection_kernels(mut self, kernels: Vec<Kernel>) -> Self {
        self.spec.kernels_a = kernels;
        self
    }

    pub fn growth(mut self, growth: Growth, kernel_g: Kernel, psi_g_min: f64) -> Self {
        self.spec.growth = growth;
        self.spec.kernel_g = kernel_g;
        self.spec.psi_g_min = psi_g_min;
        self
    }

    pub fn mutation(mut self, mutation: Mutation, kernel_d: Kernel) -> Self {
        self.spec.mutation = Some(mutation);
        self.spec.kernel_d = kernel_d;
        self
    }

    pub fn a_sup(mut self, a_sup: f64) -> Self {
        self.spec.a_sup = a_sup;
        self
    }

    pub fn constants(mut self, constants: HypothesisConstants) -> Self {
        self.spec.constants = constants;
        self
    }

    pub fn regularity(mut self, regularity: Regularity) -> Self {
        self.spec.regularity = regularity;
        self
    }

    pub fn build(self) -> Result<ModelSpec> {
        let s = self.spec;
        if s.dim == 0 {
            return Err(Error::Configuration("dimension must be positive".into()));
        }
        if s.support_v0.dim() != s.dim {
            return Err(Error::Configuration("support_v0 dimension mismatch".into()));
        }
        if s.kernels_a.len() != s.advection.n_args() {
            return Err(Error::Configuration(format!(
                "advection takes {} non-local arguments but {} kernels were given",
                s.advection.n_args(),
                s.kernels_a.len()
            )));
        }
        if !s.advection.has_divergence() {
            return Err(Error::Configuration(
                "advection divergence must be supplied or set to finite differences".into(),
            ));
        }
        if !(s.psi_g_min > 0.0) {
            return Err(Error::Configuration("psi_g_min must be positive".into()));
        }
        if !(s.a_sup >= 0.0) || !s.a_sup.is_finite() {
            return Err(Error::Configuration("a_sup must be finite and non-negative".into()));
        }
        if let Some(m) = &s.mutation {
            if m.support_x.dim() != s.dim || m.support_y.dim() != s.dim {
                return Err(Error::Configuration("mutation support dimension mismatch".into()));
            }
        }
        Ok(s)
    }
}

/// Non-local quantities at one evaluation point.
#[derive(Debug, Clone, Default)]
pub(crate) struct PointFields {
    pub args: Vec<f64>,
    /// `grad_x I_k`, flattened with stride `dim`; empty for local advection.
    pub grad_args: Vec<f64>,
    pub i_g: f64,
    pub i_d: f64,
}

/// Particle sums of x-independent kernels, shared by all evaluation points.
#[derive(Debug, Clone)]
pub(crate) struct SharedSums {
    args: Vec<Option<f64>>,
    i_g: Option<f64>,
    i_d: Option<f64>,
}

impl ModelSpec {
    pub fn is_local(&self) -> bool {
        self.advection.is_local()
    }

    pub fn kernel(&self, id: KernelId) -> Result<&Kernel> {
        match id {
            KernelId::Advection(k) => self
                .kernels_a
                .get(k)
                .ok_or_else(|| Error::InvalidArgument(format!("no advection kernel {k}"))),
            KernelId::Growth => Ok(&self.kernel_g),
            KernelId::Mutation => Ok(&self.kernel_d),
        }
    }

    /// `sum_j nu_j w_j psi(t, x, x_j)` over the ensemble.
    pub fn eval_nonlocal(&self, id: KernelId, t: f64, x: &[f64], ens: &ParticleEnsemble) -> Result<f64> {
        if ens.is_empty() {
            return Err(Error::InvalidArgument("empty ensemble".into()));
        }
        kernel_sum(self.kernel(id)?, id, t, x, ens)
    }

    /// Effective velocity `A(t, x) = a(t, x, I_a(t, x))`.
    pub fn eval_velocity(&self, t: f64, x: &[f64], ens: &ParticleEnsemble) -> Result<Vec<f64>> {
        let mut args = vec![0.0; self.advection.n_args()];
        for (k, arg) in args.iter_mut().enumerate() {
            *arg = self.eval_nonlocal(KernelId::Advection(k), t, x, ens)?;
        }
        let mut out = vec![0.0; self.dim];
        self.advection.velocity(t, x, &args, &mut out);
        Ok(out)
    }

    /// Divergence of the effective velocity including the chain-rule term
    /// `sum_k da/dI_k . grad_x I_k`.
    pub fn eval_divergence(&self, t: f64, x: &[f64], ens: &ParticleEnsemble) -> Result<f64> {
        if ens.is_empty() {
            return Err(Error::InvalidArgument("empty ensemble".into()));
        }
        let shared = SharedSums::empty(self);
        let fields = self.point_fields(t, x, ens, &shared, false)?;
        self.divergence_from(t, x, &fields)
    }

    pub(crate) fn divergence_from(&self, t: f64, x: &[f64], fields: &PointFields) -> Result<f64> {
        let mut div = self.advection.divergence(t, x, &fields.args)?;
        if !self.advection.is_local() {
            let d = self.dim;
            let mut da = vec![0.0; d];
            for k in 0..self.advection.n_args() {
                // grad_x I_k vanishes identically for x-independent kernels.
                if self.kernels_a[k].is_x_independent() {
                    continue;
                }
                self.advection.arg_gradient(t, x, &fields.args, k, &mut da)?;
                let g = &fields.grad_args[k * d..(k + 1) * d];
                div += da.iter().zip(g).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        Ok(div)
    }

    /// Non-local arguments, their x-gradients, and the growth/mutation
    /// integrals at `x`. `need_mutation` skips `I_d` when unused.
    pub(crate) fn point_fields(
        &self,
        t: f64,
        x: &[f64],
        ens: &ParticleEnsemble,
        shared: &SharedSums,
        need_mutation: bool,
    ) -> Result<PointFields> {
        let d = self.dim;
        let n_a = self.advection.n_args();
        let mut fields = PointFields {
            args: vec![0.0; n_a],
            grad_args: if self.advection.is_local() {
                Vec::new()
            } else {
                vec![0.0; n_a * d]
            },
            i_g: 0.0,
            i_d: 0.0,
        };
        for k in 0..n_a {
            let kernel = &self.kernels_a[k];
            let id = KernelId::Advection(k);
            fields.args[k] = match shared.args[k] {
                Some(v) => v,
                None => kernel_sum(kernel, id, t, x, ens)?,
            };
            if !self.advection.is_local() && !kernel.is_x_independent() {
                kernel_grad_sum(kernel, id, t, x, ens, &mut fields.grad_args[k * d..(k + 1) * d])?;
            }
        }
        fields.i_g = match shared.i_g {
            Some(v) => v,
            None => kernel_sum(&self.kernel_g, KernelId::Growth, t, x, ens)?,
        };
        if need_mutation {
            fields.i_d = match shared.i_d {
                Some(v) => v,
                None => kernel_sum(&self.kernel_d, KernelId::Mutation, t, x, ens)?,
            };
        }
        Ok(fields)
    }
}

impl SharedSums {
    pub(crate) fn empty(model: &ModelSpec) -> Self {
        Self {
            args: vec![None; model.advection.n_args()],
            i_g: None,
            i_d: None,
        }
    }

    /// Pre-sums every x-independent kernel once.
    pub(crate) fn compute(model: &ModelSpec, t: f64, ens: &ParticleEnsemble) -> Result<Self> {
        let origin = vec![0.0; model.dim];
        let sum_if = |kernel: &Kernel, id: KernelId| -> Result<Option<f64>> {
            if kernel.is_x_independent() {
                kernel_sum(kernel, id, t, &origin, ens).map(Some)
            } else {
                Ok(None)
            }
        };
        let mut args = Vec::with_capacity(model.advection.n_args());
        for (k, kernel) in model.kernels_a.iter().enumerate() {
            args.push(sum_if(kernel, KernelId::Advection(k))?);
        }
        let i_g = sum_if(&model.kernel_g, KernelId::Growth)?;
        let i_d = if model.mutation.is_some() {
            sum_if(&model.kernel_d, KernelId::Mutation)?
        } else {
            None
        };
        Ok(Self { args, i_g, i_d })
    }
}

fn kernel_sum(kernel: &Kernel, id: KernelId, t: f64, x: &[f64], ens: &ParticleEnsemble) -> Result<f64> {
    let term = |j: usize| ens.intensities[j] * ens.volumes[j] * kernel.value(t, x, ens.position(j));
    let s = pairwise_sum_by(ens.len(), term);
    if s.is_finite() {
        return Ok(s);
    }
    let index = (0..ens.len())
        .find(|&j| !kernel.value(t, x, ens.position(j)).is_finite())
        .or_else(|| (0..ens.len()).find(|&j| !term(j).is_finite()))
        .unwrap_or(0);
    Err(Error::Evaluation {
        what: id.to_string(),
        index,
    })
}

fn kernel_grad_sum(
    kernel: &Kernel,
    id: KernelId,
    t: f64,
    x: &[f64],
    ens: &ParticleEnsemble,
    out: &mut [f64],
) -> Result<()> {
    if !kernel.has_grad_x() {
        return Err(Error::Configuration(format!(
            "{id} has no x-gradient but the advection depends on it"
        )));
    }
    let d = ens.dim;
    pairwise_sum_vec_by(ens.len(), d, out, |j, s| {
        // Presence was checked above, so the call cannot fail.
        let _ = kernel.grad_x(t, x, ens.position(j), s);
        let alpha = ens.intensities[j] * ens.volumes[j];
        s.iter_mut().for_each(|v| *v *= alpha);
    });
    if out.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        let mut g = vec![0.0; d];
        let index = (0..ens.len())
            .find(|&j| {
                let _ = kernel.grad_x(t, x, ens.position(j), &mut g);
                g.iter().any(|v| !v.is_finite())
            })
            .unwrap_or(0);
        Err(Error::Evaluation {
            what: format!("grad_x {id}"),
            index,
        })
    }
}
