//! Momentum multipliers acting on radial functions.

use crate::error::{Error, Result};
use crate::grid::RadialFunction;

/// Applies `σ(|k|)` as a Fourier multiplier.
pub fn apply_symbol(u: &RadialFunction, sigma: impl Fn(f64) -> f64) -> Result<RadialFunction> {
    let grid = u.grid();
    let mut c = u.coefficients().coeffs;
    for (m, v) in c.iter_mut().enumerate() {
        let k = grid.momentum(m);
        let s = sigma(k);
        if !s.is_finite() {
            return Err(Error::NonFiniteSymbol(k));
        }
        *v *= s;
    }
    Ok(RadialFunction::from_reduced(grid, &grid.inverse(&c)))
}

/// `⟨u, σ(√-Δ) v⟩`.
pub fn symbol_form(
    u: &RadialFunction,
    v: &RadialFunction,
    sigma: impl Fn(f64) -> f64,
) -> Result<f64> {
    u.check_grid(v)?;
    let grid = u.grid();
    let cu = u.coefficients().coeffs;
    let cv = if u == v { cu.clone() } else { v.coefficients().coeffs };
    let mut acc = 0.0;
    for m in 0..grid.len() {
        let k = grid.momentum(m);
        let s = sigma(k);
        if !s.is_finite() {
            return Err(Error::NonFiniteSymbol(k));
        }
        acc += s * cu[m] * cv[m];
    }
    Ok(grid.spectral_weight() * acc)
}

/// `‖(-Δ+m²)^{1/4} u‖²`.
pub fn kinetic_form(u: &RadialFunction, m: f64) -> Result<f64> {
    if m < 0.0 {
        return Err(Error::NegativeMass(m));
    }
    symbol_form(u, u, |k| (k * k + m * m).sqrt())
}

/// `‖(-Δ)^{-1/4} u‖²`, with the grid's smallest momentum π/R acting as infrared cutoff.
pub fn inverse_quarter_form(u: &RadialFunction) -> f64 {
    symbol_form(u, u, |k| 1.0 / k).expect("momenta are positive")
}

/// `‖∇u‖²`.
pub fn gradient_form(u: &RadialFunction) -> f64 {
    symbol_form(u, u, |k| k * k).expect("finite symbol")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RadialGrid;
    use std::f64::consts::PI;

    fn gaussian(g: &RadialGrid) -> RadialFunction {
        RadialFunction::from_fn(g, |r| PI.powf(-0.75) * (-r * r / 2.0).exp()).unwrap()
    }

    #[test]
    fn identity_symbol() {
        let g = RadialGrid::new(20.0, 512).unwrap();
        let u = gaussian(&g);
        let v = apply_symbol(&u, |_| 1.0).unwrap();
        for (a, b) in u.values().iter().zip(v.values()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn sine_mode_is_eigenfunction() {
        let r_max = 7.0;
        let g = RadialGrid::new(r_max, 127).unwrap();
        let u = RadialFunction::from_fn(&g, |r| (PI * r / r_max).sin() / r).unwrap();
        let m = 1.3;
        let lam = ((PI / r_max).powi(2) + m * m).sqrt();
        let v = apply_symbol(&u, |k| (k * k + m * m).sqrt()).unwrap();
        for (a, b) in u.values().iter().zip(v.values()) {
            assert!((lam * a - b).abs() < 1e-12);
        }
        let kin = kinetic_form(&u, 0.0).unwrap();
        assert!((kin - PI / r_max * u.norm_sq()).abs() < 1e-12 * kin);
    }

    #[test]
    fn gaussian_anchors() {
        let g = RadialGrid::new(40.0, 4096).unwrap();
        let u = gaussian(&g);
        assert!((u.norm_sq() - 1.0).abs() < 1e-12);
        let kin = kinetic_form(&u, 0.0).unwrap();
        assert!((kin / (2.0 / PI.sqrt()) - 1.0).abs() < 1e-6);
        let quarter = symbol_form(&u, &u, |k| k.sqrt()).unwrap();
        // (4/√π)·Γ(7/4)/2 with Γ(7/4) = 0.919062526848883
        let want = 4.0 / PI.sqrt() * 0.919_062_526_848_883 / 2.0;
        assert!((quarter / want - 1.0).abs() < 1e-5);
    }

    #[test]
    fn large_mass_limit() {
        let g = RadialGrid::new(20.0, 512).unwrap();
        let u = gaussian(&g);
        let m = 1e6;
        assert!((kinetic_form(&u, m).unwrap() / m - 1.0).abs() < 1e-6);
        assert!(kinetic_form(&u, -1.0).is_err());
    }

    #[test]
    fn non_finite_symbol_rejected() {
        let g = RadialGrid::new(20.0, 64).unwrap();
        let u = gaussian(&g);
        assert!(matches!(
            apply_symbol(&u, |k| if k > 1.0 { f64::INFINITY } else { 1.0 }),
            Err(Error::NonFiniteSymbol(_))
        ));
    }
}
