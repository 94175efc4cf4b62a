use bosonstar::gn::{solve_gn, GnOptions};
use bosonstar::hartree::Trap;
use bosonstar::ineq::{
    antisymmetric_suite, check_gn, check_h_interaction, check_hardy, check_pair_power, concentrating_pair, gaussian,
    random_profile, run_suite, separable_suite, MomentumQuadrature, PairFunction, SuiteOptions, CONCENTRATING_WIDTHS,
    RATIO_CAP,
};
use bosonstar::{Error, RadialGrid};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pair_grid() -> RadialGrid {
    RadialGrid::new(16.0, 511).unwrap()
}

#[test]
fn gaussian_and_optimizer_against_gn_bound() {
    let g = RadialGrid::new(40.0, 4095).unwrap();
    let sol = solve_gn(&g, &GnOptions::default()).unwrap();
    let c = check_gn(&gaussian(&g, 1.0), sol.a_star).unwrap();
    assert!(((c.quotient - 2.0 * 2f64.sqrt()) / (2.0 * 2f64.sqrt())).abs() < 1e-6 && c.pass);
    let at_q = check_gn(&sol.q, sol.a_star).unwrap();
    assert!(at_q.pass);
    assert!((at_q.quotient - sol.a_star).abs() < 1e-12);
}

#[test]
fn random_profiles_satisfy_hardy_and_gn() {
    let g = RadialGrid::new(30.0, 2048).unwrap();
    let a_star = solve_gn(&g, &GnOptions::default()).unwrap().a_star;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..40 {
        let u = random_profile(&g, &mut rng);
        assert!(check_hardy(&u).pass);
        assert!(check_gn(&u, a_star).unwrap().pass);
    }
}

#[test]
fn pair_power_holds_on_suites() {
    let g = pair_grid();
    let q = MomentumQuadrature::new(&g);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for f in separable_suite(&g, 12, &mut rng) {
        for s in [0.25, 0.5] {
            assert!(check_pair_power(&f, s, &q).unwrap().pass);
        }
    }
    for f in antisymmetric_suite(&g, 12, &mut rng) {
        let c = check_pair_power(&f, 1.0, &q).unwrap();
        assert!(c.pass && c.lhs > 0.0);
    }
}

#[test]
fn inverse_fourth_power_of_product_is_reported() {
    let g = pair_grid();
    let q = MomentumQuadrature::new(&g);
    let u = gaussian(&g, 1.0);
    let f = PairFunction::product(&u, &u).unwrap();
    assert!(matches!(check_pair_power(&f, 1.0, &q), Err(Error::NonIntegrableKernel(_))));
}

#[test]
fn concentrating_family_ratio_increases() {
    let g = pair_grid();
    let q = MomentumQuadrature::new(&g);
    let ratios: Vec<f64> = CONCENTRATING_WIDTHS
        .iter()
        .map(|&e| check_pair_power(&concentrating_pair(&g, e).unwrap(), 1.0, &q).unwrap().ratio)
        .collect();
    assert!(ratios.windows(2).all(|w| w[1] > w[0]), "{ratios:?}");
    assert!(ratios.iter().all(|&r| r < 16.0));
}

#[test]
fn interaction_ratio_examples() {
    let g = pair_grid();
    let q = MomentumQuadrature::new(&g);
    let u = gaussian(&g, 1.0);
    let f = PairFunction::product(&u, &u).unwrap();
    let free = check_h_interaction(&f, 1.0, Trap::None, RATIO_CAP, &q).unwrap();
    assert!(free.ratio.is_finite() && free.ratio > 0.0 && free.within_cap);
    let trapped = check_h_interaction(&f, 1.0, Trap::Power(1.0), RATIO_CAP, &q).unwrap();
    assert!(trapped.ratio < free.ratio);
    assert!(check_h_interaction(&f, -1.0, Trap::None, RATIO_CAP, &q).is_err());
}

#[test]
fn suite_is_deterministic_and_passes() {
    let g = RadialGrid::new(30.0, 1024).unwrap();
    let opts = SuiteOptions {
        gn_inputs: 20,
        hardy_inputs: 20,
        pair_inputs: 8,
        h_inputs: 6,
        ..SuiteOptions::default()
    };
    let a = run_suite(&g, &pair_grid(), 2.6924, &opts).unwrap();
    let b = run_suite(&g, &pair_grid(), 2.6924, &opts).unwrap();
    assert_eq!(a.rows, b.rows);
    assert!(a.all_pass());
    assert!(a.dilation_drift <= 1e-8);
    assert_eq!(a.passed("gn"), (20, 20));
    assert!(!a.skipped.is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn pair_ratio_is_dilation_invariant(w1 in 0.5f64..1.5, w2 in 0.5f64..1.5, beta in 0.6f64..1.8) {
        let g = pair_grid();
        let f = PairFunction::antisymmetric(&gaussian(&g, w1), &gaussian(&g, w2 + 0.3)).unwrap();
        let d = f.dilated(beta).unwrap();
        let (q, qd) = (MomentumQuadrature::new(&g), MomentumQuadrature::new(d.grid()));
        for s in [0.25, 0.5, 1.0] {
            let r = check_pair_power(&f, s, &q).unwrap().ratio;
            let rd = check_pair_power(&d, s, &qd).unwrap().ratio;
            prop_assert!((rd / r - 1.0).abs() <= 1e-8);
        }
        let wrong = check_pair_power(&d, 0.5, &q);
        prop_assert!(matches!(wrong, Err(Error::GridMismatch(..))) || beta == 1.0);
    }
}
