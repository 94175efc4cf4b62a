//! Bound states of the one-body operator `h = √(−Δ + m²) + V` below a level.
//!
//! Each angular momentum channel `ℓ` reduces to a radial operator on
//! `w = r·u`. The channel is discretized by a sine DVR on an interval
//! `[left, left + (len + 1)·spacing]` with Dirichlet walls; the square root is
//! taken as a matrix function of `−d²/dr² + ℓ(ℓ+1)/r² + m²`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::hartree::Trap;

/// Uniform interior nodes `left + (j+1)·spacing`, `j = 0..len`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelGrid {
    pub left: f64,
    pub spacing: f64,
    pub len: usize,
}

impl ChannelGrid {
    pub fn node(&self, j: usize) -> f64 {
        self.left + (j + 1) as f64 * self.spacing
    }

    pub fn right(&self) -> f64 {
        self.left + (self.len + 1) as f64 * self.spacing
    }
}

/// Orthogonal DST-I matrix `S_jm = √(2/(n+1)) sin(π(j+1)(m+1)/(n+1))`.
fn sine_matrix(n: usize) -> DMatrix<f64> {
    let c = (2.0 / (n + 1) as f64).sqrt();
    let w = PI / (n + 1) as f64;
    DMatrix::from_fn(n, n, |j, m| c * (w * ((j + 1) * (m + 1)) as f64).sin())
}

/// Matrix of `−d²/dr² + ℓ(ℓ+1)/r² + m²` in the DVR basis.
pub fn channel_laplacian(grid: &ChannelGrid, l: usize, m: f64) -> DMatrix<f64> {
    let n = grid.len;
    let s = sine_matrix(n);
    let kr = PI / ((grid.len + 1) as f64 * grid.spacing);
    let mut sk = s.clone();
    for mode in 0..n {
        let k = kr * (mode + 1) as f64;
        sk.column_mut(mode).scale_mut(k * k);
    }
    let mut a = &sk * &s;
    let c = (l * (l + 1)) as f64;
    for j in 0..n {
        let r = grid.node(j);
        a[(j, j)] += c / (r * r) + m * m;
    }
    a.fill_lower_triangle_with_upper_triangle();
    a
}

/// Matrix of `√(−d²/dr² + ℓ(ℓ+1)/r² + m²) + V(r)` in the DVR basis.
pub fn channel_hamiltonian(grid: &ChannelGrid, l: usize, m: f64, trap: Trap) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(channel_laplacian(grid, l, m));
    let roots = eig.eigenvalues.map(|x| x.max(0.0).sqrt());
    let mut vr = eig.eigenvectors.clone();
    for (i, mut col) in vr.column_iter_mut().enumerate() {
        col.scale_mut(roots[i]);
    }
    let mut h = vr * eig.eigenvectors.transpose();
    for j in 0..grid.len {
        h[(j, j)] += trap.eval(grid.node(j));
    }
    h.fill_lower_triangle_with_upper_triangle();
    h
}

/// Eigenvalues and eigenvectors of the channel operator, ascending.
pub fn channel_spectrum(
    grid: &ChannelGrid,
    l: usize,
    m: f64,
    trap: Trap,
) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(channel_hamiltonian(grid, l, m, trap));
    let mut order: Vec<usize> = (0..grid.len).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(grid.len, order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = DMatrix::from_fn(grid.len, grid.len, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Number of eigenvalues of the symmetric matrix `h` strictly below `level`.
pub fn count_eigenvalues_below(h: DMatrix<f64>, level: f64) -> usize {
    let n = h.nrows();
    if n == 0 {
        return 0;
    }
    let tri = nalgebra::linalg::SymmetricTridiagonal::new(h);
    let d = tri.diagonal();
    let e = tri.off_diagonal();
    let tiny = f64::EPSILON * (d.amax() + e.amax() + level.abs()).max(f64::MIN_POSITIVE);
    let mut count = 0;
    let mut q = d[0] - level;
    for i in 0..n {
        if i > 0 {
            q = d[i] - level - e[i - 1] * e[i - 1] / q;
        }
        if q == 0.0 {
            q = -tiny;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

#[derive(Clone, Debug)]
pub struct CountOptions {
    /// Distance kept beyond the classically allowed region on each side.
    pub radial_margin: f64,
    /// Momentum resolved beyond the largest classical radial momentum.
    pub momentum_margin: f64,
    /// Multiplies the number of nodes per unit length.
    pub resolution: f64,
}

impl Default for CountOptions {
    fn default() -> Self {
        Self {
            radial_margin: 6.0,
            momentum_margin: 8.0,
            resolution: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelCount {
    pub l: usize,
    /// Radial states below the level; each carries multiplicity `2ℓ+1`.
    pub radial: usize,
    pub grid: ChannelGrid,
}

#[derive(Clone, Debug)]
pub struct StateCount {
    pub level: f64,
    /// `N_L`, counted with multiplicity.
    pub total: u64,
    pub channels: Vec<ChannelCount>,
    pub note: Option<String>,
}

const SCAN_POINTS: usize = 4000;

/// Classically allowed interval of channel `ℓ` and its largest radial momentum.
fn classical_region(l: usize, m: f64, trap: Trap, level: f64, outer: f64) -> Option<(f64, f64)> {
    let c = (l * (l + 1)) as f64;
    let mut inner = None;
    let mut k_max: f64 = 0.0;
    for i in 1..=SCAN_POINTS {
        let r = outer * i as f64 / SCAN_POINTS as f64;
        let room = level - trap.eval(r);
        if room <= 0.0 {
            continue;
        }
        let k2 = room * room - m * m - c / (r * r);
        if k2 >= 0.0 {
            inner.get_or_insert(r);
            k_max = k_max.max(k2.sqrt());
        }
    }
    inner.map(|r| (r, k_max))
}

/// Counts eigenvalues of `√(−Δ+m²) + |x|^p` below `level` with multiplicity.
///
/// Channels are added in increasing `ℓ` until one has no state below the
/// level; channel ground energies increase with `ℓ`, so the cutoff is exact.
pub fn count_states_below(m: f64, trap: Trap, level: f64, opts: &CountOptions) -> Result<StateCount> {
    if !(m >= 0.0) || !m.is_finite() {
        return Err(Error::NegativeMass(m));
    }
    let p = match trap {
        Trap::Power(p) if p > 0.0 && p.is_finite() => p,
        Trap::Power(p) => return Err(Error::InvalidParameter(format!("trap exponent p = {p} must be positive"))),
        Trap::None => {
            return Err(Error::InvalidParameter(
                "state counting needs a confining trap".into(),
            ))
        }
    };
    if !level.is_finite() {
        return Err(Error::InvalidParameter(format!("level {level} is not finite")));
    }
    if !(opts.radial_margin > 0.0 && opts.momentum_margin > 0.0 && opts.resolution > 0.0) {
        return Err(Error::InvalidParameter("count options must be positive".into()));
    }
    if level <= m {
        return Ok(StateCount {
            level,
            total: 0,
            channels: Vec::new(),
            note: Some(format!("level {level} is not above m = {m}; h >= m has no states below it")),
        });
    }
    let outer = (level - m).powf(1.0 / p) + opts.radial_margin;
    let mut total = 0u64;
    let mut channels = Vec::new();
    for l in 0.. {
        let Some((inner, k_max)) = classical_region(l, m, trap, level, outer) else {
            break;
        };
        let left = (inner - opts.radial_margin).max(0.0);
        let spacing = PI / ((k_max + opts.momentum_margin) * opts.resolution);
        let len = (((outer - left) / spacing).ceil() as usize).max(17) - 1;
        let grid = ChannelGrid {
            left,
            spacing: (outer - left) / (len + 1) as f64,
            len,
        };
        let radial = count_eigenvalues_below(channel_hamiltonian(&grid, l, m, trap), level);
        if radial == 0 {
            break;
        }
        total += radial as u64 * (2 * l + 1) as u64;
        channels.push(ChannelCount { l, radial, grid });
    }
    Ok(StateCount {
        level,
        total,
        channels,
        note: None,
    })
}

/// Least-squares slope of `log N_L` against `log L`.
pub fn counting_exponent(counts: &[StateCount]) -> Result<f64> {
    let pts: Vec<(f64, f64)> = counts
        .iter()
        .filter(|c| c.total > 0)
        .map(|c| (c.level.ln(), (c.total as f64).ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InsufficientRows {
            have: pts.len(),
            need: 2,
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, len: f64) -> ChannelGrid {
        ChannelGrid {
            left: 0.0,
            spacing: len / (n + 1) as f64,
            len: n,
        }
    }

    #[test]
    fn laplacian_eigenvalues_are_sine_modes() {
        let g = grid(40, 5.0);
        let eig = SymmetricEigen::new(channel_laplacian(&g, 0, 0.0));
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(f64::total_cmp);
        for (i, v) in vals.iter().enumerate() {
            let k = PI * (i + 1) as f64 / 5.0;
            assert!((v - k * k).abs() < 1e-9 * k * k);
        }
    }

    #[test]
    fn shifted_interval_matches_origin_interval() {
        let a = channel_laplacian(&grid(30, 4.0), 0, 1.0);
        let shifted = ChannelGrid {
            left: 2.0,
            spacing: 4.0 / 31.0,
            len: 30,
        };
        let b = channel_laplacian(&shifted, 0, 1.0);
        assert!((a - b).amax() < 1e-10);
    }

    #[test]
    fn sturm_count_matches_eigenvalues() {
        let h = DMatrix::from_fn(30, 30, |i, j| {
            if i == j {
                i as f64
            } else {
                0.3 / (1.0 + (i as f64 - j as f64).abs())
            }
        });
        let eig = SymmetricEigen::new(h.clone());
        for level in [-1.0, 0.5, 7.3, 15.0, 40.0] {
            let direct = eig.eigenvalues.iter().filter(|&&v| v < level).count();
            assert_eq!(count_eigenvalues_below(h.clone(), level), direct);
        }
    }

    #[test]
    fn free_channel_spectrum_is_relativistic() {
        let g = grid(60, 6.0);
        let (vals, _) = channel_spectrum(&g, 0, 2.0, Trap::None);
        for i in 0..5 {
            let k = PI * (i + 1) as f64 / 6.0;
            assert!((vals[i] - (k * k + 4.0).sqrt()).abs() < 1e-10);
        }
    }

    #[test]
    fn below_mass_is_empty() {
        let c = count_states_below(2.0, Trap::Power(1.0), 1.5, &CountOptions::default()).unwrap();
        assert_eq!(c.total, 0);
        assert!(c.note.is_some());
    }

    #[test]
    fn rejects_untrapped_and_bad_exponent() {
        let o = CountOptions::default();
        assert!(count_states_below(1.0, Trap::None, 5.0, &o).is_err());
        assert!(count_states_below(1.0, Trap::Power(-1.0), 5.0, &o).is_err());
        assert!(count_states_below(-1.0, Trap::Power(1.0), 5.0, &o).is_err());
    }

    #[test]
    fn count_is_monotone_in_level() {
        let o = CountOptions::default();
        let mut last = 0;
        for level in [2.0, 3.0, 4.0, 5.0, 6.0] {
            let c = count_states_below(1.0, Trap::Power(1.0), level, &o).unwrap();
            assert!(c.total >= last);
            last = c.total;
        }
        assert!(last > 0);
    }

    #[test]
    fn count_is_monotone_in_inverse_mass() {
        let o = CountOptions::default();
        let heavy = count_states_below(2.0, Trap::Power(1.0), 6.0, &o).unwrap();
        let light = count_states_below(0.5, Trap::Power(1.0), 6.0, &o).unwrap();
        assert!(light.total >= heavy.total);
    }
}
