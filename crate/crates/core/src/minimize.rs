//! Preconditioned descent on the unit sphere of L²(ℝ³) for radial functions.

use crate::grid::RadialFunction;

/// A smooth functional restricted to `‖u‖ = 1`.
pub trait SphereObjective {
    fn value(&self, u: &RadialFunction) -> f64;

    /// L² gradient, so that `d/dt value(u + t v) = ⟨gradient(u), v⟩`.
    fn gradient(&self, u: &RadialFunction) -> RadialFunction;

    /// Approximate inverse Hessian at `u` applied to a tangent vector.
    fn precondition(&self, u: &RadialFunction, r: &RadialFunction) -> RadialFunction;

    /// Restricts a tangent search direction, e.g. to remove a symmetry mode.
    fn constrain(&self, _u: &RadialFunction, d: RadialFunction) -> RadialFunction {
        d
    }

    /// Typical size of the terms summed into `value`, used to judge round-off.
    fn magnitude(&self, value: f64) -> f64 {
        value.abs()
    }

    /// Size of the projected gradient `r` relative to the full gradient `g`,
    /// measured in the preconditioner metric; `z` is the preconditioned `r`.
    fn gradient_norm(
        &self,
        u: &RadialFunction,
        _value: f64,
        g: &RadialFunction,
        r: &RadialFunction,
        z: &RadialFunction,
    ) -> f64 {
        let gg = g.inner(&self.precondition(u, g));
        (r.inner(z).max(0.0) / gg).sqrt()
    }
}

#[derive(Clone, Debug)]
pub struct DescentOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub energy_tol: f64,
    /// Replace the iterate by `|u|` after every step.
    pub positive: bool,
    pub record_trace: bool,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self {
            max_iter: 50_000,
            grad_tol: 1e-8,
            energy_tol: 1e-10,
            positive: true,
            record_trace: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DescentOutcome {
    pub u: RadialFunction,
    pub value: f64,
    /// Multiplier `λ = ⟨u, ∇E(u)⟩`.
    pub multiplier: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<f64>,
}

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;
const STALL_STEP: f64 = 1e-6;
const STALL_LIMIT: usize = 5;
/// Relative predicted decrease below which energies cannot rank steps.
const NOISE_SLOPE: f64 = 64.0 * f64::EPSILON;
/// Relative energy rise tolerated as round-off.
pub const ROUNDOFF: f64 = 8.0 * f64::EPSILON;

fn tangent(u: &RadialFunction, g: &RadialFunction) -> (RadialFunction, f64) {
    let lambda = u.inner(g);
    (g.axpy(-lambda, u), lambda)
}

fn retract(u: &RadialFunction, d: &RadialFunction, t: f64, positive: bool) -> Option<RadialFunction> {
    let v = u.axpy(t, d);
    let v = if positive { v.abs() } else { v };
    v.normalized().ok()
}

/// Minimizes `obj` on the unit sphere starting from `u0` (normalized internally).
///
/// Search directions are preconditioned Polak–Ribière (PR+) conjugate
/// gradients; each step backtracks by halving from `t = 1` until the Armijo
/// condition holds, so the recorded energies never increase.
pub fn minimize_on_sphere(
    obj: &impl SphereObjective,
    u0: &RadialFunction,
    opts: &DescentOptions,
) -> DescentOutcome {
    let mut u = u0.normalized().expect("nonzero initial function");
    if opts.positive {
        u = u.abs();
    }
    let mut value = obj.value(&u);
    let mut g = obj.gradient(&u);
    let (mut r, mut lambda) = tangent(&u, &g);
    let mut z = obj.precondition(&u, &r);
    let mut rz = r.inner(&z);
    let mut grad_norm = obj.gradient_norm(&u, value, &g, &r, &z);
    let mut d = obj.constrain(&u, tangent(&u, &z).0.scaled(-1.0));
    let mut trace = Vec::new();
    if opts.record_trace {
        trace.push(value);
    }
    let mut last_change = f64::INFINITY;
    let mut stalled = 0;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        if grad_norm <= opts.grad_tol && last_change <= opts.energy_tol {
            break;
        }
        if stalled >= STALL_LIMIT {
            break;
        }
        iterations += 1;
        let mut slope = r.inner(&d);
        if slope >= 0.0 {
            d = obj.constrain(&u, tangent(&u, &z).0.scaled(-1.0));
            slope = r.inner(&d);
        }
        let scale = obj.magnitude(value);
        let noisy = -slope <= NOISE_SLOPE * scale;
        let mut accepted = None;
        let mut t: f64 = 1.0;
        for _ in 0..MAX_HALVINGS {
            if let Some(v) = retract(&u, &d, t, opts.positive) {
                let fv = obj.value(&v);
                if noisy {
                    // Energy differences are at round-off: accept when the energy
                    // is flat to a few ulps and the projected gradient shrinks.
                    if fv - value <= ROUNDOFF * scale {
                        let gv = obj.gradient(&v);
                        let (rv, _) = tangent(&v, &gv);
                        let zv = obj.precondition(&v, &rv);
                        if obj.gradient_norm(&v, fv, &gv, &rv, &zv) < grad_norm {
                            accepted = Some((v, fv));
                            break;
                        }
                    }
                } else if fv <= value + ARMIJO * t * slope {
                    accepted = Some((v, fv));
                    break;
                }
            }
            t *= 0.5;
            if noisy && t < STALL_STEP {
                break;
            }
        }
        let Some((v, fv)) = accepted else {
            break;
        };
        last_change = (value - fv).abs() / value.abs().max(f64::MIN_POSITIVE);
        stalled = if t < STALL_STEP { stalled + 1 } else { 0 };
        u = v;
        value = fv;
        if opts.record_trace {
            trace.push(value);
        }
        g = obj.gradient(&u);
        let r_old = r;
        (r, lambda) = tangent(&u, &g);
        let z_new = obj.precondition(&u, &r);
        let rz_new = r.inner(&z_new);
        grad_norm = obj.gradient_norm(&u, value, &g, &r, &z_new);
        let beta = ((rz_new - z_new.inner(&r_old)) / rz).max(0.0);
        z = z_new;
        rz = rz_new;
        let steepest = tangent(&u, &z).0.scaled(-1.0);
        d = obj.constrain(&u, steepest.axpy(beta, &tangent(&u, &d).0));
    }
    DescentOutcome {
        u,
        value,
        multiplier: lambda,
        grad_norm,
        iterations,
        converged: grad_norm <= opts.grad_tol,
        trace,
    }
}
