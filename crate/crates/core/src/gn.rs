//! The Gagliardo–Nirenberg quotient, its optimizer `Q` and the critical coupling `a*`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{RadialFunction, RadialGrid};
use crate::minimize::{minimize_on_sphere, DescentOptions, SphereObjective};
use crate::newton::{coulomb_energy, newton_potential};
use crate::spectral::{apply_symbol, kinetic_form};

/// `J(u) = ‖(-Δ)^{1/4}u‖²·‖u‖² / (½ D(u))`.
pub fn gn_quotient(u: &RadialFunction) -> Result<f64> {
    let d = coulomb_energy(u);
    if !(d > 0.0) {
        return Err(Error::ZeroInteraction);
    }
    Ok(kinetic_form(u, 0.0)? * u.norm_sq() / (0.5 * d))
}

/// L² gradient of [`gn_quotient`].
pub fn gn_gradient(u: &RadialFunction) -> Result<RadialFunction> {
    let ku = apply_symbol(u, |k| k)?;
    let kin = u.inner(&ku);
    let mass = u.norm_sq();
    let phi = newton_potential(&u.density()).potential;
    let phi_u = phi.mul(u);
    let d = u.inner(&phi_u);
    if !(d > 0.0) {
        return Err(Error::ZeroInteraction);
    }
    let j = kin * mass / (0.5 * d);
    Ok(ku
        .scaled(2.0 * j / kin)
        .axpy(2.0 * j / mass, u)
        .axpy(-4.0 * j / d, &phi_u))
}

/// Starting profiles for the multistart search.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GnInit {
    Gaussian,
    Exponential,
    PlateauBump,
}

impl GnInit {
    pub const ALL: [GnInit; 3] = [GnInit::Gaussian, GnInit::Exponential, GnInit::PlateauBump];

    pub fn profile(self, grid: &RadialGrid) -> RadialFunction {
        let f = |r: f64| match self {
            GnInit::Gaussian => (-r * r / 2.0).exp(),
            GnInit::Exponential => (-r).exp(),
            GnInit::PlateauBump => {
                if r < 1.0 {
                    1.0
                } else if r < 3.0 {
                    (0.25 * PI * (r - 1.0)).cos().powi(2)
                } else {
                    0.0
                }
            }
        };
        RadialFunction::from_fn(grid, f).expect("finite profile")
    }

    pub fn name(self) -> &'static str {
        match self {
            GnInit::Gaussian => "gaussian",
            GnInit::Exponential => "exponential",
            GnInit::PlateauBump => "plateau",
        }
    }
}

#[derive(Clone, Debug)]
pub struct GnOptions {
    pub inits: Vec<GnInit>,
    pub max_iter: usize,
    pub grad_tol: f64,
    pub energy_tol: f64,
}

impl Default for GnOptions {
    fn default() -> Self {
        Self {
            inits: GnInit::ALL.to_vec(),
            max_iter: 20_000,
            grad_tol: 1e-8,
            energy_tol: 1e-12,
        }
    }
}

/// Largest relative drift of the kinetic level accepted before renormalizing.
const LEVEL_TOL: f64 = 1e-10;
const MAX_PASSES: usize = 8;

/// A converged optimizer together with its certificates.
#[derive(Clone, Debug)]
pub struct GnSolution {
    /// Optimizer normalized so that kinetic form and mass are both 1.
    pub q: RadialFunction,
    pub a_star: f64,
    /// Relative Euler–Lagrange defect, see [`el_residual`].
    pub residual: f64,
    /// `(‖(-Δ)^{1/4}Q‖², ‖Q‖², (a*/2)·D(Q))`.
    pub identities: [f64; 3],
    /// Largest L² distance between optimizers from distinct starts.
    pub multistart_spread: f64,
    /// Final quotient of every start, in the order of [`GnOptions::inits`].
    pub candidates: Vec<(GnInit, f64)>,
    pub iterations: usize,
    pub converged: bool,
}

struct Quotient {
    scale: f64,
}

impl SphereObjective for Quotient {
    fn value(&self, u: &RadialFunction) -> f64 {
        gn_quotient(u).unwrap_or(f64::INFINITY)
    }

    fn gradient(&self, u: &RadialFunction) -> RadialFunction {
        gn_gradient(u).expect("positive interaction along the descent")
    }

    fn precondition(&self, u: &RadialFunction, r: &RadialFunction) -> RadialFunction {
        let s = self.scale;
        let p = |v: &RadialFunction| apply_symbol(v, |k| 1.0 / (s * (k + 1.0))).expect("finite symbol");
        let z = p(r);
        let gen = tangent_generator(u);
        let pg = p(&gen);
        let denom = pg.inner(&gen);
        if denom <= 0.0 {
            return z;
        }
        z.axpy(-z.inner(&gen) / denom, &pg)
    }

    fn constrain(&self, u: &RadialFunction, d: RadialFunction) -> RadialFunction {
        let gen = tangent_generator(u);
        let norm_sq = gen.norm_sq();
        if norm_sq == 0.0 {
            return d;
        }
        d.axpy(-d.inner(&gen) / norm_sq, &gen)
    }

    fn gradient_norm(
        &self,
        _u: &RadialFunction,
        value: f64,
        _g: &RadialFunction,
        r: &RadialFunction,
        z: &RadialFunction,
    ) -> f64 {
        (self.scale * r.inner(z).max(0.0)).sqrt() / value
    }
}

/// Normal of the kinetic level set through `u`, made orthogonal to `u`.
///
/// `J` is flat along dilations only up to discretization error, so the
/// search is confined to `{‖(-Δ)^{1/4}u‖ = const}` on the unit sphere.
fn tangent_generator(u: &RadialFunction) -> RadialFunction {
    let ku = apply_symbol(u, |k| k).expect("finite symbol");
    ku.axpy(-u.inner(&ku) / u.norm_sq(), u)
}

/// Rescales `u ↦ ν u(μx)` to unit mass and unit kinetic form.
///
/// The rescaled profile is resampled by band-limited interpolation; the map is
/// repeated until the discrete forms settle, which absorbs the box error.
pub fn normalize_optimizer(u: &RadialFunction) -> Result<RadialFunction> {
    if u.norm_sq() == 0.0 {
        return Err(Error::ZeroFunction);
    }
    let mut v = u.clone();
    for _ in 0..8 {
        let mass = v.norm_sq();
        let kin = kinetic_form(&v, 0.0)?;
        let mu = mass / kin;
        let nu = (mu.powi(3) / mass).sqrt();
        if (mu - 1.0).abs() <= 1e-14 {
            return Ok(v.scaled(nu));
        }
        v = v.rescale(mu, nu);
    }
    Ok(v)
}

/// `‖√(-Δ)Q + Q − a*(|·|^{-1}⋆Q²)Q‖ / ‖Q‖_{H^{1/2}}`.
pub fn el_residual(q: &RadialFunction, a_star: f64) -> Result<f64> {
    let kq = apply_symbol(q, |k| k)?;
    let phi = newton_potential(&q.density()).potential;
    let res = kq.axpy(1.0, q).axpy(-a_star, &phi.mul(q));
    let h_half = (q.inner(&kq) + q.norm_sq()).sqrt();
    Ok(res.norm() / h_half)
}

/// Minimizes `J` from each requested start and returns the best optimizer.
pub fn solve_gn(grid: &RadialGrid, opts: &GnOptions) -> Result<GnSolution> {
    if opts.inits.is_empty() {
        return Err(Error::InvalidParameter("at least one initialization required".into()));
    }
    let descent = DescentOptions {
        max_iter: opts.max_iter,
        grad_tol: opts.grad_tol,
        energy_tol: opts.energy_tol,
        positive: true,
        record_trace: false,
    };
    let mut runs = Vec::new();
    for &init in &opts.inits {
        let mut u = normalize_optimizer(&init.profile(grid))?;
        let mut iterations = 0;
        let mut pass = 0;
        let mut out = loop {
            pass += 1;
            let scale = 2.0 * gn_quotient(&u)?;
            let out = minimize_on_sphere(&Quotient { scale }, &u, &descent);
            iterations += out.iterations;
            let drift = (kinetic_form(&out.u, 0.0)? / out.u.norm_sq() - 1.0).abs();
            u = normalize_optimizer(&out.u)?;
            let settled = drift <= LEVEL_TOL && out.converged;
            if settled || pass >= MAX_PASSES || iterations >= opts.max_iter {
                break out;
            }
        };
        out.iterations = iterations;
        runs.push((init, u, out));
    }
    let mut spread: f64 = 0.0;
    for i in 0..runs.len() {
        for j in i + 1..runs.len() {
            spread = spread.max(runs[i].1.distance(&runs[j].1));
        }
    }
    let candidates = runs.iter().map(|(i, _, o)| (*i, o.value)).collect();
    let best = runs
        .into_iter()
        .min_by(|a, b| a.2.value.total_cmp(&b.2.value))
        .expect("nonempty");
    let (_, q, out) = best;
    let a_star = gn_quotient(&q)?;
    let identities = [
        kinetic_form(&q, 0.0)?,
        q.norm_sq(),
        0.5 * a_star * coulomb_energy(&q),
    ];
    Ok(GnSolution {
        residual: el_residual(&q, a_star)?,
        q,
        a_star,
        identities,
        multistart_spread: spread,
        candidates,
        iterations: out.iterations,
        converged: out.converged,
    })
}

/// Tail diagnostics of an optimizer on `[R/2, 0.95R]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayReport {
    /// `sup r⁴ Q(r)`.
    pub quartic_tail: f64,
    /// `sup (1+r) Φ[Q²](r)`.
    pub potential_tail: f64,
    /// `(max − min)/max` of `r⁴Q` over the window.
    pub quartic_variation: f64,
    /// `Q` nonincreasing over the window.
    pub monotone_tail: bool,
}

pub fn decay_report(q: &RadialFunction) -> DecayReport {
    let grid = q.grid();
    let r_max = grid.radius();
    let phi = newton_potential(&q.density()).potential;
    let window: Vec<usize> = (0..grid.len())
        .filter(|&j| {
            let r = grid.node(j);
            r >= 0.5 * r_max && r <= 0.95 * r_max
        })
        .collect();
    let quartic: Vec<f64> = window
        .iter()
        .map(|&j| grid.node(j).powi(4) * q.values()[j])
        .collect();
    let max = quartic.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = quartic.iter().cloned().fold(f64::INFINITY, f64::min);
    DecayReport {
        quartic_tail: max,
        potential_tail: window
            .iter()
            .map(|&j| (1.0 + grid.node(j)) * phi.values()[j])
            .fold(f64::NEG_INFINITY, f64::max),
        quartic_variation: if max > 0.0 { (max - min) / max } else { 0.0 },
        monotone_tail: window
            .windows(2)
            .all(|w| q.values()[w[1]] <= q.values()[w[0]]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(g: &RadialGrid) -> RadialFunction {
        RadialFunction::from_fn(g, |r| PI.powf(-0.75) * (-r * r / 2.0).exp()).unwrap()
    }

    #[test]
    fn gaussian_quotient() {
        let g = RadialGrid::new(40.0, 4096).unwrap();
        let j = gn_quotient(&gaussian(&g)).unwrap();
        assert!((j / (2.0 * 2f64.sqrt()) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn zero_function_rejected() {
        let g = RadialGrid::new(10.0, 32).unwrap();
        assert!(matches!(
            gn_quotient(&RadialFunction::zeros(&g)),
            Err(Error::ZeroInteraction)
        ));
        assert!(normalize_optimizer(&RadialFunction::zeros(&g)).is_err());
    }

    #[test]
    fn quotient_is_dilation_invariant() {
        let g = RadialGrid::new(20.0, 1024).unwrap();
        let u = RadialFunction::from_fn(&g, |r| (-r).exp() / (1.0 + r * r)).unwrap();
        let j = gn_quotient(&u).unwrap();
        let j3 = gn_quotient(&u.dilate_exact(3.0).unwrap()).unwrap();
        assert!((j - j3).abs() < 1e-12 * j);
    }

    #[test]
    fn normalization_hits_both_constraints() {
        let g = RadialGrid::new(30.0, 2048).unwrap();
        let u = RadialFunction::from_fn(&g, |r| 2.0 * (-(3.0 * r).powi(2) / 2.0).exp()).unwrap();
        let n = normalize_optimizer(&u).unwrap();
        assert!((n.norm_sq() - 1.0).abs() < 1e-10);
        assert!((kinetic_form(&n, 0.0).unwrap() - 1.0).abs() < 1e-10);
        let again = normalize_optimizer(&n).unwrap();
        assert!(again.distance(&n) < 1e-12);
    }

    #[test]
    fn gaussian_is_not_a_solution() {
        let g = RadialGrid::new(30.0, 2048).unwrap();
        let u = normalize_optimizer(&gaussian(&g)).unwrap();
        let a = gn_quotient(&u).unwrap();
        assert!(el_residual(&u, a).unwrap() >= 0.1);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let g = RadialGrid::new(20.0, 512).unwrap();
        let u = RadialFunction::from_fn(&g, |r| (-r).exp()).unwrap();
        let v = RadialFunction::from_fn(&g, |r| (-r * r / 4.0).exp() * (1.0 - r / 3.0)).unwrap();
        let grad = gn_gradient(&u).unwrap();
        let eps = 1e-5;
        let fd = (gn_quotient(&u.axpy(eps, &v)).unwrap() - gn_quotient(&u.axpy(-eps, &v)).unwrap())
            / (2.0 * eps);
        let an = grad.inner(&v);
        assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-3));
    }
}
