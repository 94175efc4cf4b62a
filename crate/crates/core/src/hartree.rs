//! The trapped pseudo-relativistic Hartree functional and its minimization.
//!
//! Profiles may be represented in a rescaled frame: the physical state is
//! `u(x) = ℓ^{3/2} ũ(ℓx)`, and the functional becomes
//! `ℓ⟨ũ, √(-Δ+m²/ℓ²) ũ⟩ + ℓ^{-p}∫|x|^p ũ² − (a/2) ℓ D(ũ)`,
//! which keeps a collapsing minimizer order-one wide on a fixed grid.

use crate::error::{Error, Result};
use crate::grid::{RadialFunction, RadialGrid};
use crate::minimize::{minimize_on_sphere, DescentOptions, SphereObjective};
use crate::newton::{coulomb_energy, newton_potential};
use crate::spectral::{apply_symbol, kinetic_form};

/// External potential.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Trap {
    /// `V(x) = |x|^p`.
    Power(f64),
    /// `V ≡ 0`.
    None,
}

impl Trap {
    pub fn exponent(&self) -> Option<f64> {
        match self {
            Trap::Power(p) => Some(*p),
            Trap::None => None,
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Trap::Power(p) => r.powf(*p),
            Trap::None => 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HartreeParams {
    pub a: f64,
    pub m: f64,
    pub trap: Trap,
    /// Frame scale `ℓ`; 1 is the physical frame.
    pub frame: f64,
}

impl HartreeParams {
    pub fn new(a: f64, m: f64, trap: Trap) -> Result<Self> {
        let params = Self { a, m, trap, frame: 1.0 };
        params.validate()?;
        Ok(params)
    }

    pub fn with_frame(mut self, ell: f64) -> Result<Self> {
        self.frame = ell;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0) {
            return Err(Error::InvalidParameter(format!("mass must be positive, got {}", self.m)));
        }
        if let Trap::Power(p) = self.trap {
            if !(p > 0.0) {
                return Err(Error::InvalidParameter(format!("trap exponent must be positive, got {p}")));
            }
        }
        if !(self.a >= 0.0) || !self.a.is_finite() {
            return Err(Error::InvalidParameter(format!("coupling must be nonnegative, got {}", self.a)));
        }
        if !(self.frame > 0.0) || !self.frame.is_finite() {
            return Err(Error::InvalidParameter(format!("frame scale must be positive, got {}", self.frame)));
        }
        Ok(())
    }

    fn potential_weight(&self, r: f64) -> f64 {
        match self.trap {
            Trap::Power(p) => (r / self.frame).powf(p),
            Trap::None => 0.0,
        }
    }
}

/// Energy with its decomposition `total = kinetic + potential − interaction`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HartreeEnergy {
    pub total: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub interaction: f64,
}

const NORM_TOL: f64 = 1e-8;

fn energy_terms(u: &RadialFunction, params: &HartreeParams) -> Result<HartreeEnergy> {
    let ell = params.frame;
    let kinetic = ell * kinetic_form(u, params.m / ell)?;
    let potential = u.weighted_mass(|r| params.potential_weight(r));
    let interaction = 0.5 * params.a * ell * coulomb_energy(u);
    Ok(HartreeEnergy {
        total: kinetic + potential - interaction,
        kinetic,
        potential,
        interaction,
    })
}

/// `𝓔_a(u)` for a unit-mass profile given in the frame of `params`.
pub fn hartree_energy(u: &RadialFunction, params: &HartreeParams) -> Result<HartreeEnergy> {
    let mass = u.norm_sq();
    if (mass - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized(mass));
    }
    energy_terms(u, params)
}

/// L² gradient `2(ℓ√(-Δ+m²/ℓ²) + ℓ^{-p}V − aℓΦ[u²]) u` of the energy.
pub fn hartree_gradient(u: &RadialFunction, params: &HartreeParams) -> Result<RadialFunction> {
    let ell = params.frame;
    let eps = params.m / ell;
    let tu = apply_symbol(u, |k| ell * (k * k + eps * eps).sqrt())?;
    let grid = u.grid();
    let phi = newton_potential(&u.density()).potential;
    let values = tu
        .values()
        .iter()
        .zip(u.values())
        .zip(phi.values())
        .enumerate()
        .map(|(j, ((t, v), f))| {
            2.0 * (t + params.potential_weight(grid.node(j)) * v - params.a * ell * f * v)
        })
        .collect();
    RadialFunction::new(grid, values)
}

#[derive(Clone, Debug)]
pub struct HartreeOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub energy_tol: f64,
    pub record_trace: bool,
}

impl Default for HartreeOptions {
    fn default() -> Self {
        Self {
            max_iter: 50_000,
            grad_tol: 1e-8,
            energy_tol: 1e-10,
            record_trace: false,
        }
    }
}

/// A minimizer in the frame of its parameters.
#[derive(Clone, Debug)]
pub struct HartreeSolution {
    pub u: RadialFunction,
    pub params: HartreeParams,
    pub energy: HartreeEnergy,
    /// Lagrange multiplier `⟨u, ∇𝓔⟩`.
    pub multiplier: f64,
    /// Relative projected gradient in the preconditioner metric.
    pub grad_norm: f64,
    /// `‖∇𝓔 − λu‖ / ‖∇𝓔‖` in L².
    pub stationarity: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<f64>,
}

struct Functional<'a> {
    params: &'a HartreeParams,
}

impl SphereObjective for Functional<'_> {
    fn value(&self, u: &RadialFunction) -> f64 {
        energy_terms(u, self.params).map(|e| e.total).unwrap_or(f64::INFINITY)
    }

    fn gradient(&self, u: &RadialFunction) -> RadialFunction {
        hartree_gradient(u, self.params).expect("finite gradient")
    }

    fn precondition(&self, _u: &RadialFunction, r: &RadialFunction) -> RadialFunction {
        let ell = self.params.frame;
        let eps = self.params.m / ell;
        apply_symbol(r, |k| 0.5 / (ell * ((k * k + eps * eps).sqrt() + 1.0))).expect("finite symbol")
    }

    fn magnitude(&self, value: f64) -> f64 {
        value.abs() + self.params.frame * (1.0 + self.params.a)
    }
}

/// Minimizes the energy over unit-mass profiles, starting from `init`.
pub fn minimize_hartree(
    params: &HartreeParams,
    a_star: f64,
    init: &RadialFunction,
    opts: &HartreeOptions,
) -> Result<HartreeSolution> {
    params.validate()?;
    if params.a >= a_star {
        return Err(Error::SupercriticalCoupling { a: params.a, a_star });
    }
    let descent = DescentOptions {
        max_iter: opts.max_iter,
        grad_tol: opts.grad_tol,
        energy_tol: opts.energy_tol,
        positive: true,
        record_trace: opts.record_trace,
    };
    let out = minimize_on_sphere(&Functional { params }, init, &descent);
    let energy = energy_terms(&out.u, params)?;
    let g = hartree_gradient(&out.u, params)?;
    let stationarity = g.axpy(-out.multiplier, &out.u).norm() / g.norm();
    Ok(HartreeSolution {
        u: out.u,
        params: *params,
        energy,
        multiplier: out.multiplier,
        grad_norm: out.grad_norm,
        stationarity,
        iterations: out.iterations,
        converged: out.converged,
        trace: out.trace,
    })
}

/// Gaussian starting profile of unit mass.
pub fn gaussian_init(grid: &RadialGrid, width: f64) -> RadialFunction {
    RadialFunction::from_fn(grid, |r| (-0.5 * (r / width).powi(2)).exp())
        .expect("finite profile")
        .normalized()
        .expect("nonzero profile")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    UnboundedBelow,
    Critical,
    Subcritical,
}

#[derive(Clone, Debug)]
pub struct RegimeReport {
    pub regime: Regime,
    /// `(β, 𝓔(β^{3/2}Q(βx)))` along `β = 2^k`.
    pub trials: Vec<(f64, f64)>,
    /// For `a > a*`: first `β` with trial energy below `-10⁶`.
    pub divergence_beta: Option<f64>,
    /// For `a < a*`: the lower bound `(1 − a/a*)·‖(-Δ)^{1/4}Q‖²`.
    pub certificate: Option<f64>,
}

const DIVERGENCE_LEVEL: f64 = -1e6;

/// Classifies `a` against `a*` with the dilated optimizer as trial state.
///
/// Dilations are applied exactly through the frame scale, so
/// `𝓔(β^{3/2}Q(β·)) = 𝓔_β(Q)` with `ℓ = β`.
pub fn regime_probe(params: &HartreeParams, q: &RadialFunction, a_star: f64) -> Result<RegimeReport> {
    params.validate()?;
    let trial = |beta: f64| -> Result<f64> {
        let p = HartreeParams { frame: beta, ..*params };
        Ok(energy_terms(q, &p)?.total)
    };
    let rel = (params.a - a_star) / a_star;
    let regime = if rel > 1e-12 {
        Regime::UnboundedBelow
    } else if rel >= -1e-12 {
        Regime::Critical
    } else {
        Regime::Subcritical
    };
    let mut trials = Vec::new();
    let mut divergence_beta = None;
    let mut beta: f64 = 1.0;
    for _ in 0..=60 {
        let e = trial(beta)?;
        trials.push((beta, e));
        if regime == Regime::UnboundedBelow && e < DIVERGENCE_LEVEL {
            divergence_beta = Some(beta);
            break;
        }
        if regime != Regime::UnboundedBelow && trials.len() > 20 {
            break;
        }
        beta *= 2.0;
    }
    let certificate = (regime == Regime::Subcritical)
        .then(|| kinetic_form(q, 0.0).map(|k| (1.0 - params.a / a_star) * k))
        .transpose()?;
    Ok(RegimeReport {
        regime,
        trials,
        divergence_beta,
        certificate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn gaussian(g: &RadialGrid) -> RadialFunction {
        RadialFunction::from_fn(g, |r| PI.powf(-0.75) * (-r * r / 2.0).exp()).unwrap()
    }

    #[test]
    fn gaussian_energies() {
        let g = RadialGrid::new(40.0, 4096).unwrap();
        let u = gaussian(&g);
        let mut p = HartreeParams::new(0.0, 1.0, Trap::None).unwrap();
        p.m = 1e-300;
        let e0 = hartree_energy(&u, &p).unwrap().total;
        assert!((e0 / (2.0 / PI.sqrt()) - 1.0).abs() < 1e-6);
        p.a = 1.0;
        let e1 = hartree_energy(&u, &p).unwrap().total;
        let want = 2.0 / PI.sqrt() - 0.5 * (2.0 / PI).sqrt();
        assert!((e1 / want - 1.0).abs() < 1e-6);
        assert!(((e1 - e0) + 0.5 * coulomb_energy(&u)).abs() < 1e-14);
    }

    #[test]
    fn rejects_unnormalized_input() {
        let g = RadialGrid::new(20.0, 256).unwrap();
        let u = gaussian(&g).scaled(2.0);
        let p = HartreeParams::new(0.5, 1.0, Trap::Power(1.0)).unwrap();
        assert!(matches!(hartree_energy(&u, &p), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(HartreeParams::new(1.0, 0.0, Trap::None).is_err());
        assert!(HartreeParams::new(1.0, 1.0, Trap::Power(-1.0)).is_err());
        assert!(HartreeParams::new(-1.0, 1.0, Trap::None).is_err());
    }

    #[test]
    fn sine_mode_gradient_in_linear_case() {
        let r_max = 6.0;
        let g = RadialGrid::new(r_max, 63).unwrap();
        let u = RadialFunction::from_fn(&g, |r| (PI * r / r_max).sin() / r).unwrap();
        let p = HartreeParams::new(0.0, 1.3, Trap::None).unwrap();
        let grad = hartree_gradient(&u, &p).unwrap();
        let lam = 2.0 * ((PI / r_max).powi(2) + 1.3f64.powi(2)).sqrt();
        for (a, b) in u.values().iter().zip(grad.values()) {
            assert!((lam * a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let g = RadialGrid::new(20.0, 512).unwrap();
        let u = gaussian(&g);
        let p = HartreeParams::new(1.7, 1.0, Trap::Power(1.0)).unwrap().with_frame(3.0).unwrap();
        let grad = hartree_gradient(&u, &p).unwrap();
        for (i, f) in [
            |r: f64| (-r).exp(),
            |r: f64| (-r * r / 3.0).exp() * (2.0 - r),
            |r: f64| 1.0 / (1.0 + r.powi(4)),
        ]
        .iter()
        .enumerate()
        {
            let v = RadialFunction::from_fn(&g, f).unwrap();
            let eps = 1e-5;
            let fd = (energy_terms(&u.axpy(eps, &v), &p).unwrap().total
                - energy_terms(&u.axpy(-eps, &v), &p).unwrap().total)
                / (2.0 * eps);
            let an = grad.inner(&v);
            assert!((fd - an).abs() <= 1e-6 * an.abs(), "direction {i}: {fd} vs {an}");
        }
    }

    #[test]
    fn supercritical_minimization_refused() {
        let g = RadialGrid::new(20.0, 256).unwrap();
        let p = HartreeParams::new(3.0, 1.0, Trap::Power(1.0)).unwrap();
        let err = minimize_hartree(&p, 2.69, &gaussian(&g), &HartreeOptions::default());
        assert!(matches!(err, Err(Error::SupercriticalCoupling { .. })));
    }
}
