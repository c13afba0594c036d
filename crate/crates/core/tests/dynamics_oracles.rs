use std::collections::BTreeMap;

use wdm_core::analysis::fit_convergence_order;
use wdm_core::discretize::{check_spacing, partition_support, InitialDensity};
use wdm_core::dynamics::{active_box, integrate, RunConfig};
use wdm_core::model::library;
use wdm_core::{Aabb, Advection, Growth, Kernel, ModelBuilder, ModelSpec, Mutation, ParticleEnsemble};

fn logistic_closed_form(rho0: f64, t: f64) -> f64 {
    rho0 * t.exp() / (1.0 + rho0 * (t.exp() - 1.0))
}

fn half_mass_ensemble(h: f64) -> (ModelSpec, ParticleEnsemble) {
    let model = library::logistic(Aabb::interval(0.0, 1.0)).unwrap();
    let mut p = BTreeMap::new();
    p.insert("value".to_string(), 0.5);
    let v0 = InitialDensity::by_name("constant", &p, Aabb::interval(0.0, 1.0)).unwrap();
    let ens = partition_support(&v0, &model, h, 5.0).unwrap();
    (model, ens)
}

#[test]
fn logistic_mass_matches_closed_form() {
    let (model, ens) = half_mass_ensemble(0.01);
    assert!((ens.mass() - 0.5).abs() < 1e-14);
    let traj = integrate(&model, &ens, &RunConfig::new(5.0, 1e-3)).unwrap();
    let rho = traj.final_state().mass();
    let exact = logistic_closed_form(0.5, 5.0);
    assert!((exact - 0.993_31).abs() < 1e-5);
    assert!((rho - exact).abs() < 1e-6, "{rho} vs {exact}");
}

#[test]
fn linear_contraction_closed_form() {
    let adv = Advection::local(1, |_, x, out| out[0] = -x[0]).with_divergence(|_, _, _| -1.0);
    let model = ModelBuilder::new("contract", adv, Aabb::interval(0.0, 1.0))
        .a_sup(1.0)
        .build()
        .unwrap();
    let parts: Vec<_> = (0..10).map(|i| (vec![0.05 + 0.1 * i as f64], 0.1, 1.0)).collect();
    let ens = ParticleEnsemble::from_particles(1, 0.1, &parts).unwrap();
    let traj = integrate(&model, &ens, &RunConfig::new(1.0, 1e-3)).unwrap();
    let last = traj.final_state();
    let decay = (-1.0f64).exp();
    for i in 0..ens.len() {
        assert!((last.positions[i] - ens.positions[i] * decay).abs() < 1e-8);
        assert!((last.volumes[i] - ens.volumes[i] * decay).abs() < 1e-8);
        assert!((last.intensities[i] - decay.recip()).abs() < 1e-8);
    }
}

#[test]
fn rk4_temporal_order() {
    let (model, ens) = half_mass_ensemble(0.05);
    let reference = integrate(&model, &ens, &RunConfig::new(5.0, 0.5 / 16.0)).unwrap();
    let truth = reference.final_state().intensities.clone();
    let pairs: Vec<(f64, f64)> = [0.5, 0.25, 0.125]
        .iter()
        .map(|&dt| {
            let traj = integrate(&model, &ens, &RunConfig::new(5.0, dt)).unwrap();
            let err = traj
                .final_state()
                .intensities
                .iter()
                .zip(&truth)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            (dt, err)
        })
        .collect();
    let fit = fit_convergence_order(&pairs).unwrap();
    assert!(fit.slope >= 3.5, "{pairs:?} -> {}", fit.slope);
}

#[test]
fn liouville_form_of_volumes() {
    let model = library::advsel1d(6.0, 4.0).unwrap();
    let v0 = InitialDensity::by_name("x-one-minus-x", &BTreeMap::new(), Aabb::interval(0.0, 1.0)).unwrap();
    let ens = partition_support(&v0, &model, 0.02, 1.0).unwrap();
    let dt = 1e-3;
    let traj = integrate(&model, &ens, &RunConfig::new(1.0, dt)).unwrap();
    let last = traj.final_state();
    // Independent RK4 of (x, log w) with x' = x(1 - x), (log w)' = 1 - 2x.
    for i in 0..ens.len() {
        let (mut x, mut lw) = (ens.positions[i], 0.0);
        let f = |x: f64| x * (1.0 - x);
        let g = |x: f64| 1.0 - 2.0 * x;
        for _ in 0..1000 {
            let k1 = f(x);
            let x2 = x + 0.5 * dt * k1;
            let k2 = f(x2);
            let x3 = x + 0.5 * dt * k2;
            let k3 = f(x3);
            let x4 = x + dt * k3;
            let k4 = f(x4);
            lw += dt / 6.0 * (g(x) + 2.0 * g(x2) + 2.0 * g(x3) + g(x4));
            x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        assert!((last.positions[i] - x).abs() < 1e-12);
        let measured = (last.volumes[i] / ens.volumes[i]).ln();
        assert!((measured - lw).abs() < 1e-8, "particle {i}: {measured} vs {lw}");
        assert!(last.volumes[i] > 0.0);
    }
}

#[test]
fn invariant_monitors_on_presets() {
    let profiles = [("one-minus-x", 6.0, 4.0), ("x-squared", 6.0, 4.0), ("const6", 6.0, 0.5)];
    for (profile, r0, r1) in profiles {
        let model = library::advsel1d(r0, r1).unwrap();
        let v0 = InitialDensity::by_name(profile, &BTreeMap::new(), Aabb::interval(0.0, 1.0)).unwrap();
        let t = 3.0;
        let ens = partition_support(&v0, &model, 0.01, t).unwrap();
        let traj = integrate(&model, &ens, &RunConfig::new(t, 1e-3).with_snapshot_every(500)).unwrap();
        let m = traj.monitors;
        assert!(m.max_mass_excess <= 1e-6 * (1.0 + t), "{profile}: {m:?}");
        assert!(m.max_support_excess <= 1e-9, "{profile}: {m:?}");
        assert!(m.min_volume > 0.0);
        assert!(m.min_intensity_ratio >= -1e-10);
        let o_t = active_box(&model, t);
        for snap in &traj.snapshots {
            assert!((0..snap.len()).all(|i| o_t.contains(snap.position(i))));
        }
        let spacing = check_spacing(traj.final_state()).unwrap();
        assert!(spacing.c_hat > 0.0 && spacing.c_big_hat.is_finite());
    }
}

fn mutation_model() -> ModelSpec {
    let adv = Advection::local(1, |_, x, out| out[0] = 0.1 * (0.5 - x[0])).with_divergence(|_, _, _| -0.1);
    let m = Mutation::new(Aabb::interval(0.0, 1.0), Aabb::interval(0.0, 1.0), |_, x, y, _| {
        if !(0.0..=1.0).contains(&x[0]) {
            return 0.0;
        }
        let d = x[0] - y[0];
        0.2 * (1.0 - 4.0 * d * d).max(0.0)
    });
    ModelBuilder::new("mutating", adv, Aabb::interval(0.2, 0.6))
        .growth(
            Growth::new(|_, x, i| 1.0 - x[0] - i),
            Kernel::new(|_, x, y| (-(x[0] - y[0]).powi(2)).exp()),
            0.3,
        )
        .mutation(m, Kernel::constant(1.0))
        .a_sup(0.05)
        .build()
        .unwrap()
}

#[test]
fn bit_identical_across_worker_counts() {
    let models = [mutation_model(), library::nonlocal1d(Aabb::interval(0.0, 1.0)).unwrap()];
    for model in &models {
        let v0 = InitialDensity::by_name("x-one-minus-x", &BTreeMap::new(), model.support_v0.clone()).unwrap();
        let ens = partition_support(&v0, model, 1.0 / 300.0, 0.5).unwrap();
        let run = |workers: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .unwrap()
                .install(|| integrate(model, &ens, &RunConfig::new(0.5, 1e-2)).unwrap())
        };
        let (a, b, c) = (run(1), run(4), run(4));
        let fa = a.final_state();
        for other in [b.final_state(), c.final_state()] {
            assert_eq!(fa.positions, other.positions);
            assert_eq!(fa.volumes, other.volumes);
            assert_eq!(fa.intensities, other.intensities);
        }
    }
}

#[test]
fn mutation_fills_empty_cells() {
    let model = mutation_model();
    let v0 = InitialDensity::by_name("const6", &BTreeMap::new(), model.support_v0.clone()).unwrap();
    let ens = partition_support(&v0, &model, 0.05, 1.0).unwrap();
    let empty: Vec<usize> = (0..ens.len()).filter(|&i| ens.intensities[i] == 0.0).collect();
    assert!(!empty.is_empty());
    let traj = integrate(&model, &ens, &RunConfig::new(1.0, 1e-2)).unwrap();
    let last = traj.final_state();
    assert!(empty.iter().all(|&i| last.intensities[i] > 0.0));
}

#[test]
fn dropped_cells_do_not_change_retained_particles() {
    let model = library::advsel1d(6.0, 4.0).unwrap();
    let v0 = InitialDensity::by_name("x-squared", &BTreeMap::new(), Aabb::interval(0.0, 0.5)).unwrap();
    let ens = partition_support(&v0, &model, 0.01, 1.0).unwrap();
    // Re-add zero cells on (0.5, 0.8) by hand.
    let mut parts: Vec<(Vec<f64>, f64, f64)> = (0..ens.len())
        .map(|i| (ens.position(i).to_vec(), ens.volumes[i], ens.intensities[i]))
        .collect();
    let kept = parts.len();
    for j in 50..80 {
        parts.push((vec![0.01 * (j as f64 + 0.5)], 0.01, 0.0));
    }
    let padded = ParticleEnsemble::from_particles(1, 0.01, &parts).unwrap();
    let cfg = RunConfig::new(1.0, 1e-3);
    let a = integrate(&model, &ens, &cfg).unwrap();
    let b = integrate(&model, &padded, &cfg).unwrap();
    assert_eq!(a.final_state().intensities[..], b.final_state().intensities[..kept]);
    assert!(b.final_state().intensities[kept..].iter().all(|&v| v == 0.0));
}
