//! Python module `bosonstar`.

use std::path::PathBuf;

use bosonstar::blowup::{compute_lambda, optimal_t_check};
use bosonstar::config::parse_config;
use bosonstar::ed::{build_orbitals, coulomb_tensor, variational_ordering, LanczosOptions};
use bosonstar::gn::{gn_quotient, solve_gn, GnOptions};
use bosonstar::hartree::{self as core_hartree, HartreeOptions, HartreeParams, Trap};
use bosonstar::ineq;
use bosonstar::newton::coulomb_energy;
use bosonstar::orchestrate::orchestrate;
use bosonstar::spectral::kinetic_form;
use bosonstar::spectrum::{count_states_below, CountOptions};
use bosonstar::{Error, RadialFunction, RadialGrid};
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

fn err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn trap(p: Option<f64>) -> Trap {
    p.map_or(Trap::None, Trap::Power)
}

/// Uniform radial grid `r_j = (j+1)h` on `(0, R)`.
#[pyclass(name = "Grid", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGrid(RadialGrid);

#[pymethods]
impl PyGrid {
    #[new]
    fn new(radius: f64, n: usize) -> PyResult<Self> {
        RadialGrid::new(radius, n).map(Self).map_err(err)
    }

    #[getter]
    fn radius(&self) -> f64 {
        self.0.radius()
    }

    #[getter]
    fn spacing(&self) -> f64 {
        self.0.spacing()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn nodes(&self) -> Vec<f64> {
        self.0.nodes()
    }

    fn __repr__(&self) -> String {
        format!("Grid(radius={}, n={})", self.0.radius(), self.0.len())
    }
}

/// A radial function sampled on a grid.
#[pyclass(name = "RadialFunction", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyFunction(RadialFunction);

#[pymethods]
impl PyFunction {
    #[new]
    fn new(grid: &PyGrid, values: Vec<f64>) -> PyResult<Self> {
        RadialFunction::new(&grid.0, values).map(Self).map_err(err)
    }

    /// Normalized Gaussian `exp(-r²/(2w²))`.
    #[staticmethod]
    fn gaussian(grid: &PyGrid, width: f64) -> Self {
        Self(ineq::gaussian(&grid.0, width))
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid(self.0.grid().clone())
    }

    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    fn norm_sq(&self) -> f64 {
        self.0.norm_sq()
    }

    fn inner(&self, other: &PyFunction) -> PyResult<f64> {
        self.0.check_grid(&other.0).map_err(err)?;
        Ok(self.0.inner(&other.0))
    }

    fn normalized(&self) -> PyResult<Self> {
        self.0.normalized().map(Self).map_err(err)
    }

    fn kinetic(&self, m: f64) -> PyResult<f64> {
        kinetic_form(&self.0, m).map_err(err)
    }

    fn coulomb(&self) -> f64 {
        coulomb_energy(&self.0)
    }

    fn gn_quotient(&self) -> PyResult<f64> {
        gn_quotient(&self.0).map_err(err)
    }
}

/// Optimizer of the Gagliardo–Nirenberg quotient.
#[pyclass(name = "GnSolution", frozen, get_all)]
struct PyGnSolution {
    q: PyFunction,
    a_star: f64,
    residual: f64,
    identities: (f64, f64, f64),
    converged: bool,
}

#[pyfunction]
fn solve_optimizer(grid: &PyGrid) -> PyResult<PyGnSolution> {
    let s = solve_gn(&grid.0, &GnOptions::default()).map_err(err)?;
    Ok(PyGnSolution {
        q: PyFunction(s.q),
        a_star: s.a_star,
        residual: s.residual,
        identities: (s.identities[0], s.identities[1], s.identities[2]),
        converged: s.converged,
    })
}

/// Hartree energy terms `(total, kinetic, potential, interaction)`.
#[pyfunction]
#[pyo3(signature = (u, a, m, p=None))]
fn hartree_energy(u: &PyFunction, a: f64, m: f64, p: Option<f64>) -> PyResult<(f64, f64, f64, f64)> {
    let params = HartreeParams::new(a, m, trap(p)).map_err(err)?;
    let e = core_hartree::hartree_energy(&u.0, &params).map_err(err)?;
    Ok((e.total, e.kinetic, e.potential, e.interaction))
}

/// Minimizes the Hartree functional from `init`; returns `(energy, minimizer, converged)`.
#[pyfunction]
#[pyo3(signature = (init, a, m, a_star, p=None))]
fn minimize_hartree(
    init: &PyFunction,
    a: f64,
    m: f64,
    a_star: f64,
    p: Option<f64>,
) -> PyResult<(f64, PyFunction, bool)> {
    let params = HartreeParams::new(a, m, trap(p)).map_err(err)?;
    let sol = core_hartree::minimize_hartree(&params, a_star, &init.0, &HartreeOptions::default()).map_err(err)?;
    Ok((sol.energy.total, PyFunction(sol.u), sol.converged))
}

#[pyfunction]
fn collapse_prefactor(q: &PyFunction, p: f64, m: f64, a_star: f64) -> PyResult<f64> {
    compute_lambda(&q.0, Trap::Power(p), m, a_star).map_err(err)
}

/// Returns `(t_min, lambda, relative gap)`.
#[pyfunction]
fn optimal_t(q: &PyFunction, p: f64, m: f64, a_star: f64) -> PyResult<(f64, f64, f64)> {
    let t = optimal_t_check(&q.0, p, m, a_star).map_err(err)?;
    Ok((t.t_min, t.lambda, t.gap))
}

/// Number of eigenvalues of `√(−Δ+m²) + |x|^p` below `level`.
#[pyfunction]
fn count_states(m: f64, p: f64, level: f64) -> PyResult<u64> {
    count_states_below(m, Trap::Power(p), level, &CountOptions::default())
        .map(|c| c.total)
        .map_err(err)
}

/// Few-body ground state in a truncated orbital basis.
#[pyclass(name = "EdResult", frozen, get_all)]
struct PyEdResult {
    energy: f64,
    hartree_energy: f64,
    gap: f64,
    condensate_fraction: f64,
    residual: f64,
}

#[pyfunction]
#[pyo3(signature = (grid, counts, particles, a, m=1.0, p=Some(1.0)))]
fn exact_diagonalization(
    grid: &PyGrid,
    counts: Vec<usize>,
    particles: usize,
    a: f64,
    m: f64,
    p: Option<f64>,
) -> PyResult<PyEdResult> {
    let basis = build_orbitals(&grid.0, m, trap(p), &counts).map_err(err)?;
    let tensor = coulomb_tensor(&basis, 2 * basis.l_max()).map_err(err)?;
    let v = variational_ordering(particles, a, &basis, &tensor, &LanczosOptions::default()).map_err(err)?;
    Ok(PyEdResult {
        energy: v.e_ed,
        hartree_energy: v.e_hartree,
        gap: v.gap,
        condensate_fraction: v.ed.condensate_fraction,
        residual: v.ed.residual,
    })
}

/// Returns `(lhs, rhs, pass)`.
#[pyfunction]
fn check_hardy(u: &PyFunction) -> (f64, f64, bool) {
    let c = ineq::check_hardy(&u.0);
    (c.lhs, c.rhs, c.pass)
}

/// Returns `(quotient, pass)`.
#[pyfunction]
fn check_gn(u: &PyFunction, a_star: f64) -> PyResult<(f64, bool)> {
    ineq::check_gn(&u.0, a_star).map(|c| (c.quotient, c.pass)).map_err(err)
}

/// Runs a configuration document; returns whether every check passed.
#[pyfunction]
fn run(config: &str, out: PathBuf) -> PyResult<bool> {
    let cfg = parse_config(config).map_err(err)?;
    orchestrate(&cfg, &out).map(|m| m.all_checks_pass()).map_err(err)
}

#[pymodule]
#[pyo3(name = "bosonstar")]
fn bosonstar_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyFunction>()?;
    m.add_class::<PyGnSolution>()?;
    m.add_class::<PyEdResult>()?;
    m.add_function(wrap_pyfunction!(solve_optimizer, m)?)?;
    m.add_function(wrap_pyfunction!(hartree_energy, m)?)?;
    m.add_function(wrap_pyfunction!(minimize_hartree, m)?)?;
    m.add_function(wrap_pyfunction!(collapse_prefactor, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_t, m)?)?;
    m.add_function(wrap_pyfunction!(count_states, m)?)?;
    m.add_function(wrap_pyfunction!(exact_diagonalization, m)?)?;
    m.add_function(wrap_pyfunction!(check_hardy, m)?)?;
    m.add_function(wrap_pyfunction!(check_gn, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
