use std::collections::BTreeMap;

use wdm_core::discretize::InitialDensity;
use wdm_core::model::{library, HypothesisConstants};
use wdm_core::reference::{characteristic, l1_distance, solve_reference, OracleConfig, ReferenceGrid};
use wdm_core::regularize::SampledFunction;
use wdm_core::{Aabb, Advection, Growth, Kernel, ModelBuilder, ModelSpec, Mutation};

fn unit(name: &str) -> InitialDensity {
    InitialDensity::by_name(name, &BTreeMap::new(), Aabb::interval(0.0, 1.0)).unwrap()
}

fn gaussian_bump(center: f64, width: f64) -> InitialDensity {
    let mut p = BTreeMap::new();
    p.insert("center".to_string(), center);
    p.insert("width".to_string(), width);
    InitialDensity::by_name("gaussian", &p, Aabb::interval(0.0, 1.0)).unwrap()
}

fn drift(c: f64) -> ModelSpec {
    let adv = Advection::local(1, move |_, _, out| out[0] = c).with_divergence(|_, _, _| 0.0);
    ModelBuilder::new("drift", adv, Aabb::interval(0.0, 1.0))
        .a_sup(c.abs())
        .build()
        .unwrap()
}

#[test]
fn characteristics_match_closed_forms() {
    let adv = Advection::local(1, |_, x, out| out[0] = -x[0]).with_divergence(|_, _, _| -1.0);
    let contract = ModelBuilder::new("contract", adv, Aabb::interval(0.0, 2.0))
        .a_sup(2.0)
        .build()
        .unwrap();
    let x = characteristic(&contract, 2.0, 0.0, 1.0, 1e-3).unwrap();
    assert!((x - 2.0 * (-1.0f64).exp()).abs() < 1e-8);
    let back = characteristic(&contract, x, 1.0, 0.0, 1e-3).unwrap();
    assert!((back - 2.0).abs() < 1e-8);

    let model = library::advsel1d(6.0, 4.0).unwrap();
    let x = characteristic(&model, 0.5, 0.0, 2.0, 1e-3).unwrap();
    let e2 = 2.0f64.exp();
    assert!((x - 0.5 * e2 / (0.5 + 0.5 * e2)).abs() < 1e-8);
    assert_eq!(characteristic(&drift(0.0), 0.3, 0.0, 7.0, 0.1).unwrap(), 0.3);
}

#[test]
fn logistic_oracle_mass() {
    let model = library::logistic(Aabb::interval(0.0, 1.0)).unwrap();
    let mut p = BTreeMap::new();
    p.insert("value".to_string(), 0.5);
    let v0 = InitialDensity::by_name("constant", &p, Aabb::interval(0.0, 1.0)).unwrap();
    let oracle = solve_reference(&model, &v0, 5.0, &OracleConfig::new(1e-2, 1e-2)).unwrap();
    let e5 = 5.0f64.exp();
    let exact = 0.5 * e5 / (1.0 + 0.5 * (e5 - 1.0));
    assert!((oracle.mass() - exact).abs() < 1e-4, "{} vs {exact}", oracle.mass());
    let (t_last, m_last) = *oracle.mass_series.last().unwrap();
    assert!((t_last - 5.0).abs() < 1e-12 && m_last == oracle.mass());
}

#[test]
fn pure_transport_shifts_the_profile() {
    let c = 0.5;
    let model = drift(c);
    let v0 = gaussian_bump(0.3, 0.08);
    let max_err = |dx: f64| {
        let oracle = solve_reference(&model, &v0, 1.0, &OracleConfig::new(dx, 0.05)).unwrap();
        (0..oracle.len())
            .map(|j| {
                let x = oracle.node(j);
                (oracle.values[j] - v0.eval(&[x - c])).abs()
            })
            .fold(0.0, f64::max)
    };
    let (coarse, fine) = (max_err(1e-2), max_err(5e-3));
    assert!(fine < 1e-3, "{coarse} {fine}");
    assert!(coarse / fine > 3.0, "{coarse} {fine}");
}

fn change(a: &ReferenceGrid, b: &ReferenceGrid) -> f64 {
    let n = a.len() - 1;
    let diffs: Vec<f64> = (0..n)
        .map(|j| (a.values[j] - b.value_at(a.node(j)).unwrap()).abs())
        .collect();
    diffs
        .iter()
        .enumerate()
        .map(|(j, d)| if j == 0 { 0.5 * d } else { *d })
        .sum::<f64>()
        * a.dx
}

#[test]
fn oracle_self_converges_on_the_decreasing_profile() {
    let model = library::advsel1d(6.0, 4.0).unwrap();
    let v0 = unit("one-minus-x");
    let solve = |k: f64| solve_reference(&model, &v0, 1.0, &OracleConfig::new(1.0 / (100.0 * k), 0.04 / k)).unwrap();
    let (a, b, c) = (solve(1.0), solve(2.0), solve(4.0));
    let (first, second) = (change(&a, &b), change(&b, &c));
    assert!(first / second >= 3.0, "{first} {second}");
}

#[test]
fn mass_rate_matches_growth_integral() {
    let model = library::advsel1d(6.0, 4.0).unwrap();
    let oracle = solve_reference(&model, &unit("x-squared"), 1.0, &OracleConfig::new(1e-3, 1e-3)).unwrap();
    let s = &oracle.mass_series;
    let n = s.len();
    let dt = s[n - 1].0 - s[n - 2].0;
    let rate = (3.0 * s[n - 1].1 - 4.0 * s[n - 2].1 + s[n - 3].1) / (2.0 * dt);
    let rho = oracle.mass();
    let expected = oracle.integrate_against(|x| 6.0 - 4.0 * x - rho);
    assert!((rate - expected).abs() <= 1e-3 * expected.abs(), "{rate} vs {expected}");
}

fn mutating_model() -> ModelSpec {
    let adv = Advection::local(1, |_, x, out| out[0] = 0.2 * x[0] * (1.0 - x[0]))
        .with_divergence(|_, x, _| 0.2 * (1.0 - 2.0 * x[0]));
    let m = Mutation::new(Aabb::interval(0.0, 1.0), Aabb::interval(0.0, 1.0), |_, x, y, _| {
        if !(0.0..=1.0).contains(&x[0]) {
            return 0.0;
        }
        let z = (x[0] - y[0]) / 0.1;
        0.5 * (-z * z).exp()
    });
    ModelBuilder::new("mutating", adv, Aabb::interval(0.2, 0.4))
        .growth(Growth::new(|_, x, i| 1.0 - x[0] - i), Kernel::constant(1.0), 1.0)
        .mutation(m, Kernel::constant(1.0))
        .a_sup(0.05)
        .constants(HypothesisConstants {
            i_star: 1.2,
            r_star: 0.1,
            m_bar: 0.5,
            k_const: 0.1,
        })
        .build()
        .unwrap()
}

#[test]
fn solutions_stay_nonnegative_and_bounded() {
    let cases: Vec<(ModelSpec, InitialDensity)> = vec![
        (library::advsel1d(6.0, 4.0).unwrap(), unit("one-minus-x")),
        (
            library::advsel1d(6.0, 0.5).unwrap(),
            InitialDensity::by_name("const6", &BTreeMap::new(), Aabb::interval(0.05, 1.0)).unwrap(),
        ),
        (
            mutating_model(),
            InitialDensity::by_name("const6", &BTreeMap::new(), Aabb::interval(0.2, 0.4)).unwrap(),
        ),
    ];
    for (model, v0) in cases {
        let oracle = solve_reference(&model, &v0, 3.0, &OracleConfig::new(2e-3, 1e-2)).unwrap();
        assert!(oracle.min_value() >= -1e-10 * oracle.max_value(), "{}", model.name);
        let bound = oracle.mass_series[0].1.max(model.constants.i_star / model.psi_g_min);
        assert!(
            oracle.mass_series.iter().all(|&(_, m)| m <= bound + 1e-6),
            "{}",
            model.name
        );
    }
}

#[test]
fn mutation_spreads_mass_outside_the_initial_support() {
    let model = mutating_model();
    let v0 = InitialDensity::by_name("const6", &BTreeMap::new(), Aabb::interval(0.2, 0.4)).unwrap();
    let oracle = solve_reference(&model, &v0, 1.0, &OracleConfig::new(2e-3, 1e-2)).unwrap();
    assert!(oracle.value_at(0.9).unwrap() > 0.0);
}

#[test]
fn distance_examples() {
    let model = drift(0.0);
    let mut p = BTreeMap::new();
    p.insert("value".to_string(), 1.0);
    let v0 = InitialDensity::by_name("constant", &p, Aabb::interval(0.0, 1.0)).unwrap();
    let oracle = solve_reference(&model, &v0, 1.0, &OracleConfig::new(0.01, 0.1)).unwrap();
    assert!(oracle.values.iter().all(|&v| (v - 1.0).abs() < 1e-10));
    let zero = SampledFunction::new(oracle.sample_grid(), vec![0.0; oracle.len()]).unwrap();
    assert!((l1_distance(&oracle, &zero).unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(l1_distance(&oracle, &oracle.as_sampled()).unwrap(), 0.0);
}
