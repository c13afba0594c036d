//! Particle (weighted Dirac mass) method for non-local
//! advection-selection-mutation equations
//!
//! ```text
//! d_t v + div(a(t, x, I_a v) v) = R(t, x, I_g v) v + int m(t, x, y, I_d v) v(y) dy
//! ```
//!
//! The density is approximated by `sum_i nu_i w_i delta_{x_i}`, whose
//! positions, volumes and intensities solve a coupled ODE system
//! ([`dynamics`]). Smooth approximations are recovered by convolution with a
//! cut-off function ([`regularize`]). A characteristics-based grid solver in
//! one dimension ([`reference`]) serves as an independent oracle for the
//! error and long-time diagnostics in [`analysis`].

// `!(x > 0.0)` style guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod discretize;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod geometry;
pub mod interp;
pub mod model;
pub mod quadrature;
pub mod reference;
pub mod regularize;
pub mod sum;

pub use ensemble::ParticleEnsemble;
pub use error::{Error, Result};
pub use geometry::Aabb;
pub use model::{Advection, Growth, Kernel, KernelId, ModelBuilder, ModelSpec, Mutation};
