//! Uniform radial grids and radial functions on ℝ³.
//!
//! A radial function `u(|x|)` is stored through its samples at the interior
//! nodes `r_j = j·R/(n+1)`. Spectral operations act on the reduced function
//! `w(r) = r·u(r)`, which vanishes at both ends of `[0, R]` and is expanded in
//! the type-I sine basis `sin(k_m r)`, `k_m = mπ/R`. In this basis the radial
//! Laplacian is diagonal, so every function of `-Δ` is an exact multiplier.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Smallest admissible number of interior nodes.
pub const MIN_NODES: usize = 16;

/// Uniform discretization of `[0, R]` together with its sine-transform plan.
#[derive(Clone)]
pub struct RadialGrid {
    radius: f64,
    n: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for RadialGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialGrid")
            .field("radius", &self.radius)
            .field("n", &self.n)
            .finish()
    }
}

impl PartialEq for RadialGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.radius == other.radius
    }
}

impl RadialGrid {
    pub fn new(radius: f64, n: usize) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::NonPositiveRadius(radius));
        }
        if n < MIN_NODES {
            return Err(Error::GridTooSmall(n));
        }
        let fft = FftPlanner::new().plan_fft_forward(2 * (n + 1));
        Ok(Self { radius, n, fft })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn spacing(&self) -> f64 {
        self.radius / (self.n + 1) as f64
    }

    /// Radius of the 0-based node `j`.
    pub fn node(&self, j: usize) -> f64 {
        (j + 1) as f64 * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.node(j)).collect()
    }

    /// Momentum of the 0-based sine mode `m`.
    pub fn momentum(&self, m: usize) -> f64 {
        (m + 1) as f64 * PI / self.radius
    }

    pub fn momenta(&self) -> Vec<f64> {
        (0..self.n).map(|m| self.momentum(m)).collect()
    }

    /// Grid describing the same samples after the dilation `x ↦ βx`.
    pub fn dilated(&self, beta: f64) -> Result<Self> {
        Self::new(self.radius / beta, self.n)
    }

    /// Unnormalized type-I sine sum `Σ_j x_j sin(π (j+1)(m+1)/(n+1))`.
    fn sine_sum(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let len = 2 * (n + 1);
        let mut buf = vec![Complex::new(0.0, 0.0); len];
        for (j, &v) in x.iter().enumerate() {
            buf[j + 1].re = v;
            buf[len - j - 1].re = -v;
        }
        self.fft.process(&mut buf);
        buf[1..=n].iter().map(|c| -0.5 * c.im).collect()
    }

    /// Sine coefficients of the reduced samples `w`.
    pub fn forward(&self, w: &[f64]) -> Vec<f64> {
        debug_assert_eq!(w.len(), self.n);
        let scale = 2.0 / (self.n + 1) as f64;
        let mut c = self.sine_sum(w);
        c.iter_mut().for_each(|v| *v *= scale);
        c
    }

    /// Reduced samples from sine coefficients.
    pub fn inverse(&self, coeffs: &[f64]) -> Vec<f64> {
        debug_assert_eq!(coeffs.len(), self.n);
        self.sine_sum(coeffs)
    }

    /// Weight turning `Σ ŵ_m v̂_m` into the ℝ³ inner product of the radial functions.
    pub fn spectral_weight(&self) -> f64 {
        2.0 * PI * self.radius
    }

    /// Quadrature weight of node `j` for `∫_{ℝ³} f(|x|) dx`.
    pub fn volume_weight(&self, j: usize) -> f64 {
        let r = self.node(j);
        4.0 * PI * self.spacing() * r * r
    }
}

/// A radial profile `u(r)` sampled on a [`RadialGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct RadialFunction {
    grid: RadialGrid,
    values: Vec<f64>,
}

impl RadialFunction {
    pub fn new(grid: &RadialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite sample at r = {}",
                grid.node(j)
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    /// Samples `f` at the grid nodes. Non-finite samples are rejected.
    pub fn from_fn(grid: &RadialGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().into_iter().map(f).collect())
    }

    pub fn zeros(grid: &RadialGrid) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    pub(crate) fn from_values_unchecked(grid: &RadialGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self {
            grid: grid.clone(),
            values,
        }
    }

    /// Builds `u = w/r` from reduced samples.
    pub fn from_reduced(grid: &RadialGrid, w: &[f64]) -> Self {
        let values = w
            .iter()
            .enumerate()
            .map(|(j, &v)| v / grid.node(j))
            .collect();
        Self::from_values_unchecked(grid, values)
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn check_grid(&self, other: &RadialFunction) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(
                self.grid.radius,
                self.grid.n,
                other.grid.radius,
                other.grid.n,
            ));
        }
        Ok(())
    }

    /// Reduced samples `w_j = r_j u_j`.
    pub fn reduced(&self) -> Vec<f64> {
        self.values
            .iter()
            .enumerate()
            .map(|(j, &u)| u * self.grid.node(j))
            .collect()
    }

    pub fn coefficients(&self) -> SpectralCoeffs {
        SpectralCoeffs {
            grid: self.grid.clone(),
            coeffs: self.grid.forward(&self.reduced()),
        }
    }

    /// `∫_{ℝ³} u v dx`.
    pub fn inner(&self, other: &RadialFunction) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        self.values
            .iter()
            .zip(&other.values)
            .enumerate()
            .map(|(j, (a, b))| self.grid.volume_weight(j) * a * b)
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.inner(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `∫_{ℝ³} w(|x|) |u(x)|² dx` for a radial weight.
    pub fn weighted_mass(&self, weight: impl Fn(f64) -> f64) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(j, &u)| self.grid.volume_weight(j) * weight(self.grid.node(j)) * u * u)
            .sum()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::from_values_unchecked(&self.grid, self.values.iter().map(|v| c * v).collect())
    }

    pub fn normalized(&self) -> Result<Self> {
        let norm = self.norm();
        if norm == 0.0 {
            return Err(Error::ZeroFunction);
        }
        Ok(self.scaled(1.0 / norm))
    }

    pub fn abs(&self) -> Self {
        Self::from_values_unchecked(&self.grid, self.values.iter().map(|v| v.abs()).collect())
    }

    /// Pointwise square, the density `|u|²`.
    pub fn density(&self) -> Self {
        Self::from_values_unchecked(&self.grid, self.values.iter().map(|v| v * v).collect())
    }

    pub fn axpy(&self, alpha: f64, other: &RadialFunction) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self::from_values_unchecked(
            &self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + alpha * b)
                .collect(),
        )
    }

    pub fn mul(&self, other: &RadialFunction) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self::from_values_unchecked(
            &self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        )
    }

    /// L² distance in ℝ³.
    pub fn distance(&self, other: &RadialFunction) -> f64 {
        self.axpy(-1.0, other).norm()
    }

    /// Band-limited interpolation of `u` at arbitrary radii (zero outside `(0, R)`).
    pub fn eval_at(&self, radii: &[f64]) -> Vec<f64> {
        let coeffs = self.coefficients().coeffs;
        let radius = self.grid.radius;
        radii
            .iter()
            .map(|&r| {
                if r <= 0.0 {
                    // limit w(r)/r = Σ c_m k_m
                    return coeffs
                        .iter()
                        .enumerate()
                        .map(|(m, c)| c * self.grid.momentum(m))
                        .sum();
                }
                if r >= radius {
                    return 0.0;
                }
                sine_series(&coeffs, PI * r / radius) / r
            })
            .collect()
    }

    /// Mass-preserving dilation `β^{3/2} u(βx)` resampled on the same grid.
    pub fn dilate(&self, beta: f64) -> Self {
        let targets: Vec<f64> = self.grid.nodes().iter().map(|r| beta * r).collect();
        let values = self
            .eval_at(&targets)
            .into_iter()
            .map(|v| beta.powf(1.5) * v)
            .collect();
        Self::from_values_unchecked(&self.grid, values)
    }

    /// The same dilation represented exactly: identical samples on the grid `[0, R/β]`.
    pub fn dilate_exact(&self, beta: f64) -> Result<Self> {
        let grid = self.grid.dilated(beta)?;
        Ok(Self::from_values_unchecked(
            &grid,
            self.values.iter().map(|v| beta.powf(1.5) * v).collect(),
        ))
    }

    /// Two-parameter rescaling `ν u(μx)` resampled on the same grid.
    pub fn rescale(&self, mu: f64, nu: f64) -> Self {
        let targets: Vec<f64> = self.grid.nodes().iter().map(|r| mu * r).collect();
        let values = self.eval_at(&targets).into_iter().map(|v| nu * v).collect();
        Self::from_values_unchecked(&self.grid, values)
    }

    /// Resamples onto another grid by band-limited interpolation.
    pub fn resample(&self, grid: &RadialGrid) -> Self {
        Self::from_values_unchecked(grid, self.eval_at(&grid.nodes()))
    }

    /// Two-column CSV `(r, value)`; the header row carries the grid.
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "r[R={:.16e} n={}],value\n",
            self.grid.radius, self.grid.n
        );
        for (j, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{:.16e},{:.16e}\n", self.grid.node(j), v));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty profile file".into()))?;
        let inner = header
            .strip_prefix("r[")
            .and_then(|h| h.split(']').next())
            .ok_or_else(|| Error::Parse(format!("bad profile header: {header}")))?;
        let mut radius = None;
        let mut n = None;
        for item in inner.split_whitespace() {
            match item.split_once('=') {
                Some(("R", v)) => radius = v.parse::<f64>().ok(),
                Some(("n", v)) => n = v.parse::<usize>().ok(),
                _ => return Err(Error::Parse(format!("bad header field: {item}"))),
            }
        }
        let (radius, n) = match (radius, n) {
            (Some(r), Some(n)) => (r, n),
            _ => return Err(Error::Parse(format!("header lacks R or n: {header}"))),
        };
        let grid = RadialGrid::new(radius, n)?;
        let mut values = Vec::with_capacity(n);
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let (_, v) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("bad row: {line}")))?;
            values.push(
                v.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("{e}: {line}")))?,
            );
        }
        Self::new(&grid, values)
    }
}

/// `Σ_m c_m sin((m+1)θ)` by the Chebyshev recurrence.
fn sine_series(coeffs: &[f64], theta: f64) -> f64 {
    let two_cos = 2.0 * theta.cos();
    let (mut prev, mut cur) = (0.0, theta.sin());
    let mut acc = 0.0;
    for c in coeffs {
        acc += c * cur;
        let next = two_cos * cur - prev;
        prev = cur;
        cur = next;
    }
    acc
}

/// Sine-series coefficients `ŵ_m` of a reduced radial function.
#[derive(Clone, Debug)]
pub struct SpectralCoeffs {
    pub grid: RadialGrid,
    pub coeffs: Vec<f64>,
}

impl SpectralCoeffs {
    pub fn to_function(&self) -> RadialFunction {
        RadialFunction::from_reduced(&self.grid, &self.grid.inverse(&self.coeffs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grid_spacing_matches_definition() {
        let g = RadialGrid::new(40.0, 4096).unwrap();
        assert_eq!(g.spacing(), 40.0 / 4097.0);
        assert!(g.node(0) > 0.0 && g.node(4095) < 40.0);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(matches!(
            RadialGrid::new(0.0, 100),
            Err(Error::NonPositiveRadius(_))
        ));
        assert!(matches!(RadialGrid::new(40.0, 8), Err(Error::GridTooSmall(8))));
    }

    #[test]
    fn transform_round_trip() {
        let g = RadialGrid::new(10.0, 300).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let back = g.inverse(&g.forward(&w));
        let scale = w.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for (a, b) in w.iter().zip(&back) {
            assert!((a - b).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn single_mode_has_single_coefficient() {
        let g = RadialGrid::new(5.0, 63).unwrap();
        let u = RadialFunction::from_fn(&g, |r| (PI * r / 5.0).sin() / r).unwrap();
        let c = u.coefficients().coeffs;
        assert!((c[0] - 1.0).abs() < 1e-13);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn interpolation_reproduces_nodes() {
        let g = RadialGrid::new(12.0, 200).unwrap();
        let u = RadialFunction::from_fn(&g, |r| (-r * r / 2.0).exp()).unwrap();
        let back = u.eval_at(&g.nodes());
        for (a, b) in u.values().iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
        let mid = u.eval_at(&[0.5 * (g.node(10) + g.node(11))])[0];
        let r = 0.5 * (g.node(10) + g.node(11));
        assert!((mid - (-r * r / 2.0).exp()).abs() < 1e-10);
    }

    #[test]
    fn csv_round_trip() {
        let g = RadialGrid::new(3.5, 20).unwrap();
        let u = RadialFunction::from_fn(&g, |r| 1.0 / (1.0 + r)).unwrap();
        let back = RadialFunction::from_csv(&u.to_csv()).unwrap();
        assert_eq!(back, u);
    }

    #[test]
    fn non_finite_samples_rejected() {
        let g = RadialGrid::new(1.0, 16).unwrap();
        assert!(RadialFunction::from_fn(&g, |_| f64::NAN).is_err());
    }
}
