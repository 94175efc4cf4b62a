//! Solvers for the pseudo-relativistic Hartree theory of boson stars.
//!
//! Radial functions on ℝ³ live on a uniform grid with a sine-transform
//! representation ([`grid`]), on which the relativistic kinetic energy and the
//! Newton potential are evaluated ([`spectral`], [`newton`]). Built on top:
//! the Gagliardo–Nirenberg optimizer ([`gn`]), the trapped Hartree minimizer
//! ([`hartree`]), blow-up analysis ([`blowup`], [`spectrum`]), few-body exact
//! diagonalization ([`ed`]) and an inequality test harness ([`ineq`]).

pub mod blowup;
pub mod config;
pub mod ed;
pub mod error;
pub mod gn;
pub mod grid;
pub mod hartree;
pub mod ineq;
pub mod io;
pub mod minimize;
pub mod newton;
pub mod orchestrate;
pub mod spectral;
pub mod spectrum;

pub use error::{Error, Result};
pub use grid::{RadialFunction, RadialGrid, SpectralCoeffs};
