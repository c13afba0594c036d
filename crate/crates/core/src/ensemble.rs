use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::pairwise_sum_by;

/// Particle state at one instant: positions `x_i`, volumes `w_i` and
/// intensities `nu_i`, stored as flat arrays in lattice order.
///
/// Positions and lattice labels are flattened with stride `dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleEnsemble {
    pub time: f64,
    pub dim: usize,
    /// Spacing of the lattice the ensemble was seeded from.
    pub h: f64,
    pub labels: Vec<i64>,
    pub positions: Vec<f64>,
    pub volumes: Vec<f64>,
    pub intensities: Vec<f64>,
}

impl ParticleEnsemble {
    pub fn new(
        time: f64,
        dim: usize,
        h: f64,
        labels: Vec<i64>,
        positions: Vec<f64>,
        volumes: Vec<f64>,
        intensities: Vec<f64>,
    ) -> Result<Self> {
        let n = volumes.len();
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if positions.len() != n * dim {
            return Err(Error::SizeMismatch {
                expected: n * dim,
                got: positions.len(),
            });
        }
        if labels.len() != n * dim {
            return Err(Error::SizeMismatch {
                expected: n * dim,
                got: labels.len(),
            });
        }
        if intensities.len() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                got: intensities.len(),
            });
        }
        Ok(Self {
            time,
            dim,
            h,
            labels,
            positions,
            volumes,
            intensities,
        })
    }

    /// Ensemble from explicit particles with sequential labels; handy in tests.
    pub fn from_particles(dim: usize, h: f64, particles: &[(Vec<f64>, f64, f64)]) -> Result<Self> {
        let mut positions = Vec::with_capacity(particles.len() * dim);
        let mut labels = Vec::with_capacity(particles.len() * dim);
        let mut volumes = Vec::with_capacity(particles.len());
        let mut intensities = Vec::with_capacity(particles.len());
        for (i, (x, w, nu)) in particles.iter().enumerate() {
            if x.len() != dim {
                return Err(Error::SizeMismatch {
                    expected: dim,
                    got: x.len(),
                });
            }
            positions.extend_from_slice(x);
            labels.extend(std::iter::repeat_n(i as i64, dim));
            volumes.push(*w);
            intensities.push(*nu);
        }
        Self::new(0.0, dim, h, labels, positions, volumes, intensities)
    }

    pub fn len(&self) -> usize {
        self.volumes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.volumes.is_empty()
    }

    #[inline]
    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> &[i64] {
        &self.labels[i * self.dim..(i + 1) * self.dim]
    }

    /// Particle masses `alpha_i = nu_i w_i`.
    pub fn alphas(&self) -> Vec<f64> {
        self.intensities
            .iter()
            .zip(&self.volumes)
            .map(|(nu, w)| nu * w)
            .collect()
    }

    /// Total mass `sum_i nu_i w_i`.
    pub fn mass(&self) -> f64 {
        pairwise_sum_by(self.len(), |i| self.intensities[i] * self.volumes[i])
    }

    pub fn total_volume(&self) -> f64 {
        pairwise_sum_by(self.len(), |i| self.volumes[i])
    }

    /// Copy restricted to the given particle indices (kept in the given order).
    pub fn select(&self, indices: &[usize]) -> Self {
        let d = self.dim;
        let mut out = Self {
            time: self.time,
            dim: d,
            h: self.h,
            labels: Vec::with_capacity(indices.len() * d),
            positions: Vec::with_capacity(indices.len() * d),
            volumes: Vec::with_capacity(indices.len()),
            intensities: Vec::with_capacity(indices.len()),
        };
        for &i in indices {
            out.labels.extend_from_slice(self.label(i));
            out.positions.extend_from_slice(self.position(i));
            out.volumes.push(self.volumes[i]);
            out.intensities.push(self.intensities[i]);
        }
        out
    }
}
