//! Fixtures shared by the benchmarks.

use std::collections::BTreeMap;

use wdm_core::discretize::{partition_support, InitialDensity};
use wdm_core::model::library;
use wdm_core::{Aabb, ModelSpec, ParticleEnsemble};

/// Selection model `a = x(1 - x)`, `R = 6 - 4x - I` seeded from `1 - x`.
pub fn selection(h: f64) -> (ModelSpec, InitialDensity, ParticleEnsemble) {
    let model = library::advsel1d(6.0, 4.0).expect("preset builds");
    let v0 = InitialDensity::by_name("one-minus-x", &BTreeMap::new(), Aabb::interval(0.0, 1.0)).expect("profile");
    let ens = partition_support(&v0, &model, h, 1.0).expect("lattice");
    (model, v0, ens)
}

/// Non-local toy `a = R = 1 - I` seeded from a Gaussian bump.
pub fn nonlocal(h: f64) -> (ModelSpec, ParticleEnsemble) {
    let support = Aabb::interval(0.0, 1.0);
    let model = library::nonlocal1d(support.clone()).expect("preset builds");
    let params = BTreeMap::from([("center".to_string(), 0.5), ("width".to_string(), 0.15)]);
    let v0 = InitialDensity::by_name("gaussian", &params, support).expect("profile");
    let ens = partition_support(&v0, &model, h, 1.0).expect("lattice");
    (model, ens)
}
