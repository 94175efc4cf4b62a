use std::f64::consts::PI;

use bosonstar::gn::gn_quotient;
use bosonstar::hartree::{hartree_energy, hartree_gradient, HartreeParams, Trap};
use bosonstar::newton::{coulomb_bilinear, coulomb_energy, newton_potential, potential_at_origin};
use bosonstar::spectral::{apply_symbol, kinetic_form, symbol_form};
use bosonstar::{RadialFunction, RadialGrid};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erf;

fn unit_gaussian(g: &RadialGrid) -> RadialFunction {
    RadialFunction::from_fn(g, |r| PI.powf(-0.75) * (-0.5 * r * r).exp()).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Composite Simpson rule on `[a, b]` with `panels` panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut s = f(a) + f(b);
    for i in 1..panels {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn gaussian_anchors() {
    let g = RadialGrid::new(40.0, 4095).unwrap();
    let u = unit_gaussian(&g);
    assert!(rel(u.norm_sq(), 1.0) < 1e-12);
    assert!(rel(kinetic_form(&u, 0.0).unwrap(), 2.0 / PI.sqrt()) < 1e-6);
    assert!(rel(coulomb_energy(&u), (2.0 / PI).sqrt()) < 1e-6);
    assert!(rel(gn_quotient(&u).unwrap(), 2.0 * 2f64.sqrt()) < 1e-6);
}

#[test]
fn uniform_ball_closed_form() {
    let g = RadialGrid::new(4.0, 3999).unwrap();
    let c = 3.0 / (4.0 * PI);
    // the node on the surface carries the mean of the two one-sided values
    let rho = RadialFunction::from_fn(&g, |r| {
        if (r - 1.0).abs() < 1e-9 {
            0.5 * c
        } else if r < 1.0 {
            c
        } else {
            0.0
        }
    })
    .unwrap();
    assert!(rel(potential_at_origin(&rho), 1.5) < 1e-6);
    let phi = newton_potential(&rho).potential;
    for (j, p) in phi.values().iter().enumerate() {
        let r = g.node(j);
        if r > 1.0 + 1e-9 {
            assert!(rel(*p, 1.0 / r) < 1e-6, "r = {r}");
        }
    }
}

#[test]
fn newton_matches_error_function_and_direct_quadrature() {
    let g = RadialGrid::new(12.0, 2047).unwrap();
    let rho_fn = |s: f64| (-s * s).exp();
    let rho = RadialFunction::from_fn(&g, rho_fn).unwrap();
    let phi = newton_potential(&rho).potential;
    for j in (0..g.len()).step_by(97) {
        let r = g.node(j);
        let analytic = PI.powf(1.5) * erf(r) / r;
        let direct = 4.0 * PI
            * (simpson(|s| s * s * rho_fn(s), 0.0, r, 400) / r + simpson(|s| s * rho_fn(s), r, 12.0, 4000));
        assert!(rel(phi.values()[j], analytic) < 1e-6, "r = {r}");
        assert!(rel(direct, analytic) < 1e-9, "r = {r}");
    }
}

#[test]
fn hartree_gradient_matches_central_differences_on_sphere() {
    let g = RadialGrid::new(20.0, 1024).unwrap();
    let u = unit_gaussian(&g);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for frame in [1.0, 4.0] {
        let params = HartreeParams::new(1.9, 1.0, Trap::Power(1.0))
            .unwrap()
            .with_frame(frame)
            .unwrap();
        let grad = hartree_gradient(&u, &params).unwrap();
        for _ in 0..5 {
            let (c, w, s) = (
                rng.random_range(0.0..2.0),
                rng.random_range(0.5..2.0),
                rng.random_range(-1.0..1.0),
            );
            let raw = RadialFunction::from_fn(&g, |r| (-((r - c) / w).powi(2)).exp() * (1.0 + s * r)).unwrap();
            let v = raw.axpy(-raw.inner(&u), &u);
            let curve = |t: f64| u.axpy(t, &v).normalized().unwrap();
            let eps = 1e-4;
            let fd = (hartree_energy(&curve(eps), &params).unwrap().total
                - hartree_energy(&curve(-eps), &params).unwrap().total)
                / (2.0 * eps);
            let an = grad.inner(&v);
            assert!(rel(fd, an) <= 1e-6, "frame {frame}: {fd} vs {an}");
        }
    }
}

fn profile(g: &RadialGrid, c: f64, w: f64, k: f64) -> RadialFunction {
    RadialFunction::from_fn(g, |r| (-((r - c) / w).powi(2)).exp() * (1.0 + k * (r / w).sin())).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn quotient_is_dilation_invariant(c in 0.0f64..1.5, w in 0.6f64..1.5, k in -0.5f64..0.5, beta in 0.5f64..2.0) {
        let g = RadialGrid::new(24.0, 2047).unwrap();
        let u = profile(&g, c, w, k);
        let d = u.dilate_exact(beta).unwrap();
        prop_assert!(rel(gn_quotient(&d).unwrap(), gn_quotient(&u).unwrap()) < 1e-10);
    }

    #[test]
    fn symbol_forms_are_symmetric_and_positive(c1 in 0.0f64..2.0, c2 in 0.0f64..2.0, w in 0.5f64..1.5, m in 0.0f64..3.0) {
        let g = RadialGrid::new(20.0, 1023).unwrap();
        let (u, v) = (profile(&g, c1, w, 0.2), profile(&g, c2, w, -0.3));
        let sigma = |k: f64| (k * k + m * m).sqrt();
        let uv = symbol_form(&u, &v, sigma).unwrap();
        let vu = symbol_form(&v, &u, sigma).unwrap();
        prop_assert!((uv - vu).abs() <= 1e-12 * uv.abs().max(1.0));
        prop_assert!(symbol_form(&u, &u, sigma).unwrap() > 0.0);
        let au = apply_symbol(&u, sigma).unwrap();
        prop_assert!((au.inner(&v) - uv).abs() <= 1e-10 * uv.abs().max(1.0));
    }

    #[test]
    fn coulomb_is_bilinear_symmetric_and_positive(c1 in 0.0f64..2.0, c2 in 0.0f64..2.0, w in 0.5f64..1.5, t in 0.1f64..2.0) {
        let g = RadialGrid::new(20.0, 1023).unwrap();
        let (r1, r2) = (profile(&g, c1, w, 0.0).density(), profile(&g, c2, w, 0.0).density());
        let a = coulomb_bilinear(&r1, &r2).unwrap();
        let b = coulomb_bilinear(&r2, &r1).unwrap();
        prop_assert!((a - b).abs() <= 1e-8 * a);
        let scaled = coulomb_bilinear(&r1.scaled(t), &r2).unwrap();
        prop_assert!((scaled - t * a).abs() <= 1e-12 * scaled);
        let phi = newton_potential(&r1).potential;
        prop_assert!(phi.values().iter().all(|&p| p > 0.0));
    }
}
