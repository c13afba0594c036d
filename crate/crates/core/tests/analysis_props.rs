use std::collections::BTreeMap;

use proptest::prelude::*;
use wdm_core::analysis::{
    ap_verdict, check_dirac_necessary_conditions, cluster_particles, default_test_family, detect_limit_clusters,
    fit_convergence_order, predict_limit_mass, run_member, weak_gap_between, weak_measure_gap,
    weighted_pointwise_error, ApVerdict, Bump, Cluster,
};
use wdm_core::discretize::{partition_support, InitialDensity};
use wdm_core::dynamics::{integrate, RunConfig};
use wdm_core::model::library;
use wdm_core::reference::{solve_reference, OracleConfig, ReferenceGrid};
use wdm_core::regularize::{reconstruct, Cutoff, UniformGrid};
use wdm_core::{Aabb, Advection, Growth, Kernel, ModelBuilder, ModelSpec, ParticleEnsemble};

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n)
        .map(|j| f(a + j as f64 * h) * if j % 2 == 1 { 4.0 } else { 2.0 })
        .sum();
    (f(a) + f(b) + inner) * h / 3.0
}

fn unit(name: &str) -> InitialDensity {
    InitialDensity::by_name(name, &BTreeMap::new(), Aabb::interval(0.0, 1.0)).unwrap()
}

fn frozen() -> ModelSpec {
    let adv = Advection::local(1, |_, _, out| out[0] = 0.0).with_divergence(|_, _, _| 0.0);
    ModelBuilder::new("frozen", adv, Aabb::interval(0.0, 1.0))
        .build()
        .unwrap()
}

fn frozen_oracle(v0: &InitialDensity, dx: f64) -> ReferenceGrid {
    solve_reference(&frozen(), v0, 0.01, &OracleConfig::new(dx, 0.01)).unwrap()
}

#[test]
fn lattice_quadrature_is_second_order() {
    let v0 = unit("x-one-minus-x");
    let bump = Bump {
        center: 0.5,
        width: 0.7,
    };
    let exact = simpson(&|x| x * (1.0 - x) * bump.eval(x), 0.0, 1.0, 20_000);
    let pairs: Vec<(f64, f64)> = [50.0, 100.0, 200.0, 400.0]
        .iter()
        .map(|n| {
            let h = 1.0 / n;
            let ens = partition_support(&v0, &frozen(), h, 0.0).unwrap();
            let sum: f64 = (0..ens.len())
                .map(|i| ens.volumes[i] * ens.intensities[i] * bump.eval(ens.positions[i]))
                .sum();
            (h, (sum - exact).abs())
        })
        .collect();
    let fit = fit_convergence_order(&pairs).unwrap();
    assert!((1.8..=2.3).contains(&fit.slope), "{pairs:?} -> {}", fit.slope);
}

#[test]
fn weighted_error_trivial_cases() {
    let v0 = unit("x-squared");
    let oracle = frozen_oracle(&v0, 1e-3);
    let mut ens = partition_support(&v0, &frozen(), 0.01, 0.0).unwrap();
    ens.time = oracle.time;
    for i in 0..ens.len() {
        ens.intensities[i] = oracle.value_at(ens.positions[i]).unwrap();
    }
    assert!(weighted_pointwise_error(&ens, &oracle).unwrap() < 1e-15);
    ens.intensities.iter_mut().for_each(|v| *v += 1.0);
    let err = weighted_pointwise_error(&ens, &oracle).unwrap();
    assert!((err - ens.total_volume()).abs() < 1e-12);
    ens.positions[0] = 5.0;
    assert!(weighted_pointwise_error(&ens, &oracle).is_err());
}

#[test]
fn weak_gap_of_a_lattice_discretization_is_second_order() {
    let v0 = unit("one-minus-x");
    let oracle = frozen_oracle(&v0, 2.5e-4);
    let tests = default_test_family(0.0, 1.0);
    let gap = |h: f64| {
        let mut ens = partition_support(&v0, &frozen(), h, 0.0).unwrap();
        ens.time = oracle.time;
        weak_measure_gap(&ens, &oracle, &tests).unwrap()
    };
    let (a, b) = (gap(0.02), gap(0.01));
    assert!(a < 1e-3 && a / b > 3.0, "{a} {b}");
}

#[test]
fn weak_gap_of_nothing_is_zero() {
    let model = library::logistic(Aabb::interval(0.0, 1.0)).unwrap();
    let mut p = BTreeMap::new();
    p.insert("value".to_string(), 0.0);
    let v0 = InitialDensity::by_name("constant", &p, Aabb::interval(0.0, 1.0)).unwrap();
    let oracle = solve_reference(&model, &v0, 0.1, &OracleConfig::new(0.01, 0.05)).unwrap();
    let ens = ParticleEnsemble::from_particles(1, 0.1, &[]).unwrap();
    assert_eq!(
        weak_measure_gap(&ens, &oracle, &default_test_family(0.0, 1.0)).unwrap(),
        0.0
    );
}

#[test]
fn rerunning_a_member_reproduces_it() {
    let model = library::nonlocal1d(Aabb::interval(0.0, 1.0)).unwrap();
    let v0 = unit("x-one-minus-x");
    let a = run_member(&model, &v0, 0.02, 0.5, 1e-2).unwrap();
    let b = run_member(&model, &v0, 0.02, 0.5, 1e-2).unwrap();
    let grid = UniformGrid::interval(-2.0, 3.0, 501).unwrap();
    let ra = reconstruct(a.final_state(), &Cutoff::gaussian(1), 0.1, &grid).unwrap();
    let rb = reconstruct(b.final_state(), &Cutoff::gaussian(1), 0.1, &grid).unwrap();
    assert_eq!(ra.l1_distance(&rb).unwrap(), 0.0);
    assert_eq!(
        weak_gap_between(a.final_state(), b.final_state(), &default_test_family(0.0, 1.0)),
        0.0
    );
}

#[test]
fn limit_of_the_constant_profile_run() {
    let model = library::advsel1d(6.0, 0.5).unwrap();
    let v0 = InitialDensity::by_name("const6", &BTreeMap::new(), Aabb::interval(0.05, 1.0)).unwrap();
    let h = 0.01;
    let ens = partition_support(&v0, &model, h, 30.0).unwrap();
    let traj = integrate(&model, &ens, &RunConfig::new(30.0, 1e-2).with_snapshot_every(100)).unwrap();
    let det = detect_limit_clusters(&traj, 5.0, 10.0 * h, 1e-3).unwrap();
    assert!(det.stationary);
    assert_eq!(det.clusters.len(), 1);
    let total: f64 = det.clusters.iter().map(|c| c.mass).sum::<f64>() + det.dropped_mass;
    assert!((total - det.total_mass).abs() <= 1e-3 * det.total_mass);
    let c = &det.clusters[0];
    assert!((c.position[0] - 1.0).abs() < 1e-3);
    let predicted = predict_limit_mass(&model, &c.position, 30.0).unwrap();
    assert!((predicted - 5.5).abs() < 1e-12);
    assert!((c.mass - predicted).abs() < 1e-3 * predicted);

    let exact = Cluster {
        position: vec![1.0],
        mass: 5.5,
        particles: 1,
    };
    let check = check_dirac_necessary_conditions(&model, &[exact], &[vec![0.5]], 0.0).unwrap();
    assert_eq!(check.clusters[0].advection, 0.0);
    assert!(check.clusters[0].growth < 1e-15);
    assert_eq!(check.mutation, 0.0);
}

#[test]
fn false_limit_is_flagged() {
    let model = library::advsel1d(6.0, 4.0).unwrap();
    let fake = Cluster {
        position: vec![0.5],
        mass: 4.0,
        particles: 10,
    };
    let check = check_dirac_necessary_conditions(&model, &[fake], &[], 0.0).unwrap();
    assert!((check.clusters[0].advection - 0.25).abs() < 1e-15);
}

#[test]
fn coincident_particles_form_one_cluster() {
    let parts: Vec<_> = (0..8).map(|_| (vec![0.7], 0.125, 2.0)).collect();
    let ens = ParticleEnsemble::from_particles(1, 0.0, &parts).unwrap();
    let (clusters, dropped) = cluster_particles(&ens, 1e-3, 1e-6);
    assert_eq!(clusters.len(), 1);
    assert_eq!(dropped, 0.0);
    assert!((clusters[0].mass - 2.0).abs() < 1e-15);
    assert!((clusters[0].position[0] - 0.7).abs() < 1e-15);
}

#[test]
fn verdict_rules() {
    let hs = [0.04, 0.02, 0.01];
    let shrinking: Vec<_> = hs.iter().map(|&h| (h, h * h)).collect();
    assert_eq!(ap_verdict(&shrinking, 1e-6), ApVerdict::Preserving);
    let stuck: Vec<_> = hs.iter().map(|&h| (h, 0.3 + h)).collect();
    assert_eq!(ap_verdict(&stuck, 0.1), ApVerdict::NonPreserving);
    assert_eq!(ap_verdict(&stuck, 0.31), ApVerdict::Inconclusive);
    assert_eq!(ap_verdict(&stuck[..2], 0.1), ApVerdict::Inconclusive);
}

fn scaled_growth(c: f64) -> ModelSpec {
    let adv = Advection::local(1, |_, x, out| out[0] = x[0] * (1.0 - x[0])).with_divergence(|_, x, _| 1.0 - 2.0 * x[0]);
    ModelBuilder::new("scaled", adv, Aabb::interval(0.0, 1.0))
        .growth(
            Growth::new(move |_, x, i| c * (6.0 - 0.5 * x[0] - i)),
            Kernel::constant(1.0),
            1.0,
        )
        .a_sup(0.25)
        .constants(wdm_core::model::HypothesisConstants {
            i_star: 6.1,
            r_star: 0.1,
            m_bar: 0.0,
            k_const: 0.0,
        })
        .build()
        .unwrap()
}

proptest! {
    #[test]
    fn power_laws_are_recovered(c in 1e-3f64..1e3, p in 0.2f64..4.0, h0 in 1e-3f64..0.5) {
        let pairs: Vec<(f64, f64)> = (0..5).map(|k| {
            let h = h0 / 2f64.powi(k);
            (h, c * h.powf(p))
        }).collect();
        let fit = fit_convergence_order(&pairs).unwrap();
        prop_assert!((fit.slope - p).abs() < 1e-12 * p.max(1.0) * 10.0);
        prop_assert!(fit.residual < 1e-10);
    }

    #[test]
    fn predicted_mass_ignores_growth_scale(c in 0.01f64..100.0, x in 0.0f64..1.0) {
        let base = predict_limit_mass(&scaled_growth(1.0), &[x], 0.0).unwrap();
        let scaled = predict_limit_mass(&scaled_growth(c), &[x], 0.0).unwrap();
        prop_assert!((base - scaled).abs() < 1e-11);
        prop_assert!((base - (6.0 - 0.5 * x)).abs() < 1e-11);
    }

    #[test]
    fn cluster_masses_add_up(parts in prop::collection::vec((0.0f64..1.0, 0.01f64..0.1, 0.0f64..3.0), 1..60), link in 1e-3f64..0.2) {
        let parts: Vec<_> = parts.into_iter().map(|(x, w, nu)| (vec![x], w, nu)).collect();
        let ens = ParticleEnsemble::from_particles(1, 0.01, &parts).unwrap();
        let (clusters, dropped) = cluster_particles(&ens, link, 1e-3 * ens.mass());
        let total: f64 = clusters.iter().map(|c| c.mass).sum::<f64>() + dropped;
        prop_assert!((total - ens.mass()).abs() <= 1e-12 * ens.mass().max(1.0));
        prop_assert!(dropped <= 1e-3 * ens.mass() * parts.len() as f64);
    }
}
