//! Cross-module properties of the iteration and the verification suite.

use std::f64::consts::PI;

use halfspace_ns::besov::{besov_norm, BesovParams};
use halfspace_ns::config::Config;
use halfspace_ns::harness::run_verification_suite;
use halfspace_ns::ops::LpNorm;
use halfspace_ns::picard::{fit_constants, iterate, nonlinear_tensor, weak_residual, PicardConfig, SmallnessBudget};
use halfspace_ns::quadrature::GradedRule;
use halfspace_ns::scenario::{generate_initial_data, Family, ScenarioSpec};
use halfspace_ns::{HalfSpaceGrid, TimeGrid, VectorField};
use proptest::prelude::*;

fn grid() -> HalfSpaceGrid {
    HalfSpaceGrid::new(2, 2.0 * PI, 32, 2.0 * PI, 24).unwrap()
}

fn pcfg() -> PicardConfig {
    PicardConfig::new(TimeGrid::new(1e-3, 2.0, 8).unwrap(), GradedRule::new(8, 0.6).unwrap())
}

fn dipole(g: &HalfSpaceGrid) -> VectorField {
    let spec = ScenarioSpec { band: 0, ..ScenarioSpec::new("dipole", Family::Dipole) };
    generate_initial_data(&spec, g).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn forcing_is_quadratic(lambda in 0.01f64..100.0, seed in 0u64..1000) {
        let g = grid();
        let spec = ScenarioSpec { seed, ..ScenarioSpec::new("random", Family::Random) };
        let u = generate_initial_data(&spec, &g).unwrap();
        for dealias in [false, true] {
            let a = nonlinear_tensor(&u, dealias).lp_norm(2.0).unwrap();
            let b = nonlinear_tensor(&u.scaled(lambda), dealias).lp_norm(2.0).unwrap();
            prop_assert!((b / (lambda * lambda * a) - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn iteration_commutes_with_scaling() {
    let g = grid();
    let lambda = 2.0;
    let u0 = dipole(&g).scaled(0.5);
    let gl = g.rescaled(lambda).unwrap();
    let u0l = VectorField::from_components(&gl, u0.scaled(lambda).comps().to_vec()).unwrap();
    let cfg = pcfg();
    let cfgl = PicardConfig::new(cfg.times.rescaled(lambda).unwrap(), cfg.rule);
    let budget = SmallnessBudget::new(2, 4.0, 1.5, 1.0, 1.0, 1.0).unwrap();
    for m in 1..=4 {
        let a = iterate(&u0, &budget, m, 0.0, &cfg).unwrap().current;
        let b = iterate(&u0l, &budget, m, 0.0, &cfgl).unwrap().current;
        for k in 0..a.len() {
            let (x, y) = (a.field(k), b.field(k));
            let err = x.comps().iter().zip(y.comps()).fold(0.0f64, |e, (p, q)| {
                p.iter().zip(q.iter()).fold(e, |e, (p, q)| e.max((q - lambda * p).abs()))
            });
            assert!(err <= 1e-12 * lambda * x.max_abs(), "m = {m}, k = {k}: {err:e}");
        }
    }
}

#[test]
fn norms_obey_the_fitted_recursion() {
    let g = grid();
    let cfg = pcfg();
    let shape = dipole(&g);
    let budget = fit_constants(std::slice::from_ref(&shape), 4.0, 1.5, &cfg).unwrap().budget(2, 4.0, 1.5).unwrap();
    for eps in [0.05, 0.2, 0.5] {
        let u0 = shape.scaled(eps);
        let data = besov_norm(&u0, &BesovParams::critical(2, 4.0).unwrap()).unwrap().value;
        let state = iterate(&u0, &budget, 8, 1e-9, &cfg).unwrap();
        assert!(state.aborted.is_none());
        for w in state.norms.windows(2) {
            let bound = budget.c1_hat * (data + w[0].0 * w[0].0);
            assert!(w[1].0 <= bound, "eps = {eps}: {} > {bound}", w[1].0);
        }
    }
}

#[test]
fn weak_residual_shrinks_under_refinement() {
    let coarse = grid();
    let fine = coarse.refined().unwrap();
    let budget = SmallnessBudget::new(2, 4.0, 1.5, 1.0, 1.0, 1.0).unwrap();
    let mut res = Vec::new();
    for (g, ratio, count) in [(coarse, 2.0, 8), (fine, 2f64.sqrt(), 15)] {
        let cfg = PicardConfig::new(TimeGrid::new(1e-3, ratio, count).unwrap(), GradedRule::standard());
        let u0 = dipole(&g).scaled(0.5);
        let state = iterate(&u0, &budget, 12, 1e-9, &cfg).unwrap();
        assert!(state.converged);
        res.push(weak_residual(&u0, &state.current).unwrap());
    }
    assert!(res[1] < res[0], "{res:?}");
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let cfg = Config::parse(
        "grid.N_tan = 32\ngrid.N_nor = 24\nverify.checks = heat_semigroup, heat_unit_mass, multiplier_decay, product_estimate",
    )
    .unwrap();
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_verification_suite(&cfg))
    };
    let (a, b) = (run(1), run(3));
    assert_eq!(a.records.len(), b.records.len());
    for (x, y) in a.records.iter().zip(&b.records) {
        assert_eq!((&x.check, &x.level, x.measured, x.constant, x.pass), (&y.check, &y.level, y.measured, y.constant, y.pass));
    }
}
