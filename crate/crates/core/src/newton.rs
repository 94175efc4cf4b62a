//! Newton potential `|x|^{-1} ⋆ ρ` of radial densities and the Coulomb energy.

use std::f64::consts::PI;

use crate::error::Result;
use crate::grid::RadialFunction;

/// Result of [`newton_potential`] with its input diagnostics.
#[derive(Clone, Debug)]
pub struct NewtonPotential {
    pub potential: RadialFunction,
    /// `∫ρ` by the grid quadrature.
    pub total_mass: f64,
    /// Set when some density sample is negative.
    pub negative_density: bool,
}

/// `Φ(r) = (4π/r)∫₀^r s²ρ + 4π∫_r^R sρ`, by cumulative trapezoid sums.
///
/// The trapezoid rule meets a kink of the kernel at `s = r`; the `h²ρ/12`
/// term is its leading Euler–Maclaurin correction, which keeps the potential
/// and every Coulomb form second-order clean.
pub fn newton_potential(rho: &RadialFunction) -> NewtonPotential {
    let grid = rho.grid();
    let h = grid.spacing();
    let n = grid.len();
    let v = rho.values();

    let mut inner = vec![0.0; n];
    let mut acc = 0.0;
    for j in 0..n {
        let r = grid.node(j);
        let t = r * r * v[j];
        inner[j] = h * (acc + 0.5 * t);
        acc += t;
    }
    let mut outer = vec![0.0; n];
    let mut acc = 0.0;
    for j in (0..n).rev() {
        let t = grid.node(j) * v[j];
        outer[j] = h * (acc + 0.5 * t);
        acc += t;
    }
    let phi = (0..n)
        .map(|j| {
            4.0 * PI * (inner[j] / grid.node(j) + outer[j]) - PI / 3.0 * h * h * v[j]
        })
        .collect();
    let total_mass = (0..n).map(|j| grid.volume_weight(j) * v[j]).sum();
    NewtonPotential {
        potential: RadialFunction::from_values_unchecked(grid, phi),
        total_mass,
        negative_density: v.iter().any(|&x| x < 0.0),
    }
}

/// `Φ(0) = 4π ∫₀^R sρ(s) ds`.
pub fn potential_at_origin(rho: &RadialFunction) -> f64 {
    let grid = rho.grid();
    4.0 * PI
        * grid.spacing()
        * rho
            .values()
            .iter()
            .enumerate()
            .map(|(j, v)| grid.node(j) * v)
            .sum::<f64>()
}

/// `∬ ρ₁(x)ρ₂(y)/|x−y| dx dy`.
pub fn coulomb_bilinear(rho1: &RadialFunction, rho2: &RadialFunction) -> Result<f64> {
    rho1.check_grid(rho2)?;
    Ok(rho1.inner(&newton_potential(rho2).potential))
}

/// `D(u) = ∬ |u(x)|²|u(y)|²/|x−y| dx dy`.
pub fn coulomb_energy(u: &RadialFunction) -> f64 {
    let rho = u.density();
    rho.inner(&newton_potential(&rho).potential)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RadialGrid;

    fn gaussian(g: &RadialGrid) -> RadialFunction {
        RadialFunction::from_fn(g, |r| PI.powf(-0.75) * (-r * r / 2.0).exp()).unwrap()
    }

    fn ball(g: &RadialGrid) -> RadialFunction {
        let c = 3.0 / (4.0 * PI);
        RadialFunction::from_fn(g, |r| {
            if (r - 1.0).abs() < 1e-9 {
                0.5 * c
            } else if r < 1.0 {
                c
            } else {
                0.0
            }
        })
        .unwrap()
    }

    #[test]
    fn gaussian_coulomb_energy() {
        let g = RadialGrid::new(40.0, 4096).unwrap();
        let d = coulomb_energy(&gaussian(&g));
        assert!((d / (2.0 / PI).sqrt() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn uniform_ball_potential() {
        let g = RadialGrid::new(4.0, 3999).unwrap();
        let rho = ball(&g);
        let np = newton_potential(&rho);
        assert!((np.total_mass - 1.0).abs() < 1e-6);
        assert!((potential_at_origin(&rho) - 1.5).abs() < 1.5e-6);
        for (j, phi) in np.potential.values().iter().enumerate() {
            let r = g.node(j);
            if r > 1.0 + 1e-9 {
                assert!((phi * r - 1.0).abs() < 1e-6, "r={r} phi={phi}");
            }
        }
        let d = rho.inner(&np.potential);
        assert!((d / 1.2 - 1.0).abs() < 1e-5);
    }

    #[test]
    fn monotone_with_monopole_tail() {
        let g = RadialGrid::new(30.0, 2048).unwrap();
        let rho = RadialFunction::from_fn(&g, |r| (-4.0 * r * r).exp() * (1.0 + r)).unwrap();
        let np = newton_potential(&rho);
        let phi = np.potential.values();
        assert!(phi.windows(2).all(|w| w[1] <= w[0]));
        assert!(phi.iter().all(|&p| p >= 0.0));
        let j = (0.9 * g.len() as f64) as usize;
        let tail = np.total_mass / g.node(j);
        assert!((phi[j] / tail - 1.0).abs() < 1e-6);
        assert!(!np.negative_density);
    }

    #[test]
    fn negative_density_flagged() {
        let g = RadialGrid::new(10.0, 64).unwrap();
        let rho = RadialFunction::from_fn(&g, |r| (r - 3.0) * (-r).exp()).unwrap();
        assert!(newton_potential(&rho).negative_density);
    }

    #[test]
    fn bilinear_symmetry() {
        let g = RadialGrid::new(15.0, 600).unwrap();
        let a = RadialFunction::from_fn(&g, |r| (-r).exp()).unwrap();
        let b = RadialFunction::from_fn(&g, |r| 1.0 / (1.0 + r.powi(4))).unwrap();
        let ab = coulomb_bilinear(&a, &b).unwrap();
        let ba = coulomb_bilinear(&b, &a).unwrap();
        assert!((ab - ba).abs() < 1e-13 * ab.abs());
    }
}
