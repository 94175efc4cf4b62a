//! Exact diagonalization of few-boson Hamiltonians in a truncated basis.
//!
//! `H_N = Σ h_i − a/(N−1) Σ_{i<j} |x_i − x_j|^{-1}` is restricted to the
//! bosonic sector spanned by eigenorbitals of `h = √(−Δ+m²) + V`. Orbitals are
//! `φ(x) = w(r)/r · Y_ℓm(x/r)` with real spherical harmonics, so every matrix
//! element is real.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{RadialFunction, RadialGrid};
use crate::hartree::Trap;
use crate::spectrum::{channel_spectrum, ChannelGrid};

/// Largest particle number accepted by [`exact_diagonalize`].
pub const MAX_PARTICLES: usize = 5;
/// Largest symmetric sector accepted by [`exact_diagonalize`].
pub const MAX_SECTOR: usize = 200_000;

// Angular algebra.

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * p - pm) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Associated Legendre `P_ℓ^m(x)` for `m ≥ 0`, without the Condon–Shortley phase.
fn assoc_legendre(l: usize, m: usize, x: f64) -> f64 {
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut pmm = 1.0;
    for i in 0..m {
        pmm *= (2 * i + 1) as f64 * s;
    }
    if l == m {
        return pmm;
    }
    let mut pm1 = x * (2 * m + 1) as f64 * pmm;
    if l == m + 1 {
        return pm1;
    }
    let mut pm0 = pmm;
    for k in (m + 2)..=l {
        let pk = ((2 * k - 1) as f64 * x * pm1 - (k + m - 1) as f64 * pm0) / (k - m) as f64;
        pm0 = pm1;
        pm1 = pk;
    }
    pm1
}

/// Real spherical harmonic `Y_ℓm(θ, φ)` with `x = cos θ`.
pub fn real_harmonic(l: usize, m: i64, x: f64, phi: f64) -> f64 {
    let am = m.unsigned_abs() as usize;
    let mut ratio = 1.0;
    for k in (l - am + 1)..=(l + am) {
        ratio /= k as f64;
    }
    let norm = ((2 * l + 1) as f64 / (4.0 * PI) * ratio).sqrt();
    let p = assoc_legendre(l, am, x);
    match m.signum() {
        0 => norm * p,
        1 => std::f64::consts::SQRT_2 * norm * p * (am as f64 * phi).cos(),
        _ => std::f64::consts::SQRT_2 * norm * p * (am as f64 * phi).sin(),
    }
}

/// Tabulated real harmonics on a product quadrature of the sphere.
struct SphereQuadrature {
    weights: Vec<f64>,
    /// `values[(ℓ, m)]` flattened as `ℓ² + ℓ + m`, each a vector over nodes.
    values: Vec<Vec<f64>>,
}

impl SphereQuadrature {
    fn new(l_max: usize, degree: usize) -> Self {
        let (xs, wx) = gauss_legendre(degree / 2 + 2);
        let n_phi = degree + 2;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for (x, w) in xs.iter().zip(&wx) {
            for k in 0..n_phi {
                nodes.push((*x, 2.0 * PI * k as f64 / n_phi as f64));
                weights.push(w * 2.0 * PI / n_phi as f64);
            }
        }
        let mut values = Vec::new();
        for l in 0..=l_max {
            for m in -(l as i64)..=(l as i64) {
                values.push(nodes.iter().map(|&(x, p)| real_harmonic(l, m, x, p)).collect());
            }
        }
        Self { weights, values }
    }
}

fn harmonic_index(l: usize, m: i64) -> usize {
    (l * l) as usize + (m + l as i64) as usize
}

fn triangle(l1: usize, l2: usize, l3: usize) -> bool {
    l3 <= l1 + l2 && l1 <= l2 + l3 && l2 <= l1 + l3 && (l1 + l2 + l3) % 2 == 0
}

fn real_m_allowed(m1: i64, m2: i64, m3: i64) -> bool {
    let (a, b, c) = (m1.abs(), m2.abs(), m3.abs());
    let negatives = [m1, m2, m3].iter().filter(|&&m| m < 0).count();
    (c == a + b || c == (a - b).abs()) && negatives % 2 == 0
}

/// `∫ Y_{ℓ1m1} Y_{ℓ2m2} Y_{ℓ3m3} dΩ` for real harmonics.
pub fn real_gaunt(l1: usize, m1: i64, l2: usize, m2: i64, l3: usize, m3: i64) -> f64 {
    let q = SphereQuadrature::new(l1.max(l2).max(l3), l1 + l2 + l3);
    gaunt_with(&q, (l1, m1), (l2, m2), (l3, m3))
}

fn gaunt_with(q: &SphereQuadrature, a: (usize, i64), b: (usize, i64), c: (usize, i64)) -> f64 {
    if !triangle(a.0, b.0, c.0) || !real_m_allowed(a.1, b.1, c.1) {
        return 0.0;
    }
    let ya = &q.values[harmonic_index(a.0, a.1)];
    let yb = &q.values[harmonic_index(b.0, b.1)];
    let yc = &q.values[harmonic_index(c.0, c.1)];
    let s: f64 = (0..q.weights.len()).map(|i| q.weights[i] * ya[i] * yb[i] * yc[i]).sum();
    if s.abs() < 1e-14 {
        0.0
    } else {
        s
    }
}

// One-body basis.

/// A radial eigenfunction `w = r·u` of the channel `ℓ`, with `h Σ w² = 1`.
#[derive(Clone, Debug)]
pub struct RadialShape {
    pub n: usize,
    pub l: usize,
    pub energy: f64,
    pub w: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Orbital {
    pub n: usize,
    pub l: usize,
    /// Real-harmonic index in `−ℓ..=ℓ`.
    pub mq: i64,
    pub energy: f64,
    /// Index into [`OrbitalBasis::shapes`].
    pub shape: usize,
}

#[derive(Clone, Debug)]
pub struct OrbitalBasis {
    pub grid: RadialGrid,
    pub m: f64,
    pub trap: Trap,
    pub shapes: Vec<RadialShape>,
    /// Sorted by energy, then `ℓ`, then `mq`.
    pub orbitals: Vec<Orbital>,
}

impl OrbitalBasis {
    pub fn dim(&self) -> usize {
        self.orbitals.len()
    }

    pub fn l_max(&self) -> usize {
        self.shapes.iter().map(|s| s.l).max().unwrap_or(0)
    }

    pub fn energies(&self) -> Vec<f64> {
        self.orbitals.iter().map(|o| o.energy).collect()
    }

    /// `⟨φ_i, φ_j⟩` by the grid quadrature.
    pub fn overlap(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (&self.orbitals[i], &self.orbitals[j]);
        if a.l != b.l || a.mq != b.mq {
            return 0.0;
        }
        let (wa, wb) = (&self.shapes[a.shape].w, &self.shapes[b.shape].w);
        self.grid.spacing() * wa.iter().zip(wb).map(|(x, y)| x * y).sum::<f64>()
    }

    /// Largest entry of `G − 1` for the Gram matrix `G`.
    pub fn orthonormality_error(&self) -> f64 {
        let d = self.dim();
        let mut err: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((self.overlap(i, j) - target).abs());
            }
        }
        err
    }

    /// The orbital as a radial function on ℝ³ when it is an s-wave.
    pub fn s_wave(&self, i: usize) -> Option<RadialFunction> {
        let o = &self.orbitals[i];
        if o.l != 0 {
            return None;
        }
        let c = (4.0 * PI).sqrt().recip();
        let w: Vec<f64> = self.shapes[o.shape].w.iter().map(|v| c * v).collect();
        Some(RadialFunction::from_reduced(&self.grid, &w))
    }
}

/// Eigenorbitals of `h`; `counts[ℓ]` radial states are kept in channel `ℓ`.
pub fn build_orbitals(grid: &RadialGrid, m: f64, trap: Trap, counts: &[usize]) -> Result<OrbitalBasis> {
    if counts.is_empty() || counts.iter().any(|&c| c == 0) {
        return Err(Error::InvalidParameter("orbital cutoffs must be at least 1".into()));
    }
    if !(m >= 0.0) {
        return Err(Error::NegativeMass(m));
    }
    if let Trap::Power(p) = trap {
        if !(p > 0.0) {
            return Err(Error::InvalidParameter(format!("trap exponent p = {p} must be positive")));
        }
    }
    let h = grid.spacing();
    let channel = ChannelGrid {
        left: 0.0,
        spacing: h,
        len: grid.len(),
    };
    let mut shapes = Vec::new();
    for (l, &count) in counts.iter().enumerate() {
        if count > grid.len() {
            return Err(Error::InvalidParameter(format!(
                "{count} radial states requested from {} nodes",
                grid.len()
            )));
        }
        let (values, vectors) = channel_spectrum(&channel, l, m, trap);
        for n in 0..count {
            if !values[n].is_finite() {
                return Err(Error::EigenNotConverged(values[n]));
            }
            let col = vectors.column(n);
            let peak = col.iter().fold(0.0f64, |acc, &v| if v.abs() > acc.abs() { v } else { acc });
            let sign = peak.signum() / h.sqrt();
            shapes.push(RadialShape {
                n,
                l,
                energy: values[n],
                w: col.iter().map(|v| sign * v).collect(),
            });
        }
    }
    let mut orbitals = Vec::new();
    for (s, shape) in shapes.iter().enumerate() {
        for mq in -(shape.l as i64)..=(shape.l as i64) {
            orbitals.push(Orbital {
                n: shape.n,
                l: shape.l,
                mq,
                energy: shape.energy,
                shape: s,
            });
        }
    }
    orbitals.sort_by(|a, b| {
        a.energy
            .total_cmp(&b.energy)
            .then(a.l.cmp(&b.l))
            .then(a.mq.cmp(&b.mq))
    });
    Ok(OrbitalBasis {
        grid: grid.clone(),
        m,
        trap,
        shapes,
        orbitals,
    })
}

// Two-body tensor.

/// `h Σ_j K_L(r_i, r_j) g_j` with `K_L = r_<^L / r_>^{L+1}` and the leading
/// Euler–Maclaurin correction for the kink of `K_L` on the diagonal.
pub fn multipole_potential(grid: &RadialGrid, g: &[f64], order: usize) -> Vec<f64> {
    let n = grid.len();
    let h = grid.spacing();
    let lf = order as i32;
    let mut inner = vec![0.0; n];
    let mut acc = 0.0;
    for j in 0..n {
        let r = grid.node(j);
        let t = r.powi(lf) * g[j];
        inner[j] = acc + 0.5 * t;
        acc += t;
    }
    let mut outer = vec![0.0; n];
    let mut acc = 0.0;
    for j in (0..n).rev() {
        let r = grid.node(j);
        let t = g[j] / r.powi(lf + 1);
        outer[j] = acc + 0.5 * t;
        acc += t;
    }
    (0..n)
        .map(|j| {
            let r = grid.node(j);
            h * (inner[j] / r.powi(lf + 1) + r.powi(lf) * outer[j])
                - h * h / 12.0 * (2 * order + 1) as f64 * g[j] / (r * r)
        })
        .collect()
}

/// Coulomb matrix elements `⟨ij|W|kl⟩ = ∬ φ_i(x)φ_j(y)φ_k(x)φ_l(y)/|x−y|`.
#[derive(Clone, Debug)]
pub struct TwoBodyTensor {
    d: usize,
    l_c: usize,
    values: Vec<f64>,
}

impl TwoBodyTensor {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn multipole_cutoff(&self) -> usize {
        self.l_c
    }

    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let d = self.d;
        self.values[((i * d + j) * d + k) * d + l]
    }

    /// Largest violation of `⟨ij|kl⟩ = ⟨ji|lk⟩ = ⟨kl|ij⟩ = ⟨kj|il⟩`.
    pub fn symmetry_residual(&self) -> f64 {
        let d = self.d;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        let v = self.get(i, j, k, l);
                        for w in [self.get(j, i, l, k), self.get(k, l, i, j), self.get(k, j, i, l)] {
                            worst = worst.max((v - w).abs());
                        }
                    }
                }
            }
        }
        worst
    }
}

/// Assembles the tensor with multipoles `L ≤ l_c`; needs `l_c ≥ 2ℓ_max`.
pub fn coulomb_tensor(basis: &OrbitalBasis, l_c: usize) -> Result<TwoBodyTensor> {
    let need = 2 * basis.l_max();
    if l_c < need {
        return Err(Error::MultipoleCutoffTooSmall { l_c, need });
    }
    let grid = &basis.grid;
    let h = grid.spacing();
    let ns = basis.shapes.len();
    let d = basis.dim();

    let pair = |a: usize, b: usize| a * ns + b;
    let dens: Vec<Vec<f64>> = (0..ns * ns)
        .map(|ab| {
            let (a, b) = (ab / ns, ab % ns);
            basis.shapes[a].w.iter().zip(&basis.shapes[b].w).map(|(x, y)| x * y).collect()
        })
        .collect();
    // radial[L][ab][cd]
    let mut radial = vec![vec![vec![0.0; ns * ns]; ns * ns]; l_c + 1];
    for (order, table) in radial.iter_mut().enumerate() {
        for cd in 0..ns * ns {
            let (c, dd) = (cd / ns, cd % ns);
            if c > dd {
                continue;
            }
            let phi = multipole_potential(grid, &dens[cd], order);
            for ab in 0..ns * ns {
                let v = h * dens[ab].iter().zip(&phi).map(|(x, y)| x * y).sum::<f64>();
                table[ab][cd] = v;
                table[ab][pair(dd, c)] = v;
            }
        }
        for ab in 0..ns * ns {
            for cd in 0..ab {
                let s = 0.5 * (table[ab][cd] + table[cd][ab]);
                table[ab][cd] = s;
                table[cd][ab] = s;
            }
        }
    }

    let l_orb = basis.l_max();
    let quad = SphereQuadrature::new(l_orb.max(l_c), 2 * l_orb + l_c);
    let n_lm = (l_c + 1) * (l_c + 1);
    let mut gaunt = vec![0.0; d * d * n_lm];
    for a in 0..d {
        for b in 0..d {
            let (oa, ob) = (&basis.orbitals[a], &basis.orbitals[b]);
            for big_l in 0..=l_c {
                for big_m in -(big_l as i64)..=(big_l as i64) {
                    gaunt[(a * d + b) * n_lm + harmonic_index(big_l, big_m)] =
                        gaunt_with(&quad, (oa.l, oa.mq), (ob.l, ob.mq), (big_l, big_m));
                }
            }
        }
    }

    let mut values = vec![0.0; d * d * d * d];
    for i in 0..d {
        for k in 0..d {
            let gik = &gaunt[(i * d + k) * n_lm..(i * d + k + 1) * n_lm];
            if gik.iter().all(|&g| g == 0.0) {
                continue;
            }
            let sik = pair(basis.orbitals[i].shape, basis.orbitals[k].shape);
            for j in 0..d {
                for l in 0..d {
                    let gjl = &gaunt[(j * d + l) * n_lm..(j * d + l + 1) * n_lm];
                    let sjl = pair(basis.orbitals[j].shape, basis.orbitals[l].shape);
                    let mut v = 0.0;
                    for big_l in 0..=l_c {
                        let lo = big_l * big_l;
                        let ang: f64 = (lo..lo + 2 * big_l + 1).map(|x| gik[x] * gjl[x]).sum();
                        if ang != 0.0 {
                            v += 4.0 * PI / (2 * big_l + 1) as f64 * ang * radial[big_l][sik][sjl];
                        }
                    }
                    values[((i * d + j) * d + k) * d + l] = v;
                }
            }
        }
    }
    Ok(TwoBodyTensor { d, l_c, values })
}

// Bosonic Fock space.

fn binomial_table(rows: usize, cols: usize) -> Vec<Vec<usize>> {
    let mut c = vec![vec![0usize; cols + 1]; rows + 1];
    for n in 0..=rows {
        c[n][0] = 1;
        for k in 1..=cols.min(n) {
            c[n][k] = c[n - 1][k - 1] + if k <= n - 1 { c[n - 1][k] } else { 0 };
        }
    }
    c
}

/// `C(d+N−1, N)`, the dimension of the symmetric sector.
pub fn sector_dimension(d: usize, n: usize) -> u128 {
    let mut v: u128 = 1;
    for k in 0..n {
        v = v * (d + k) as u128 / (k + 1) as u128;
    }
    v
}

/// Occupation states of `N` bosons in `d` orbitals, each stored as the sorted
/// list of occupied orbital indices and ranked in colexicographic order.
#[derive(Clone, Debug)]
pub struct FockSpace {
    d: usize,
    n: usize,
    binom: Vec<Vec<usize>>,
    states: Vec<u8>,
}

impl FockSpace {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if n == 0 || d == 0 || d > u8::MAX as usize {
            return Err(Error::InvalidParameter(format!("Fock space with d = {d}, N = {n}")));
        }
        let dim = sector_dimension(d, n);
        if dim > MAX_SECTOR as u128 {
            return Err(Error::SectorTooLarge(dim.min(usize::MAX as u128) as usize));
        }
        let dim = dim as usize;
        let binom = binomial_table(d + n, n);
        let mut states = vec![0u8; dim * n];
        let mut tuple = vec![0u8; n];
        loop {
            let r = rank_with(&binom, &tuple);
            states[r * n..(r + 1) * n].copy_from_slice(&tuple);
            // next nondecreasing tuple
            let mut pos = n;
            while pos > 0 && tuple[pos - 1] as usize == d - 1 {
                pos -= 1;
            }
            if pos == 0 {
                break;
            }
            let v = tuple[pos - 1] + 1;
            for t in &mut tuple[pos - 1..] {
                *t = v;
            }
        }
        Ok(Self { d, n, binom, states })
    }

    pub fn dim(&self) -> usize {
        self.states.len() / self.n
    }

    pub fn orbitals(&self) -> usize {
        self.d
    }

    pub fn particles(&self) -> usize {
        self.n
    }

    /// Sorted orbital indices of the state with the given rank.
    pub fn state(&self, idx: usize) -> &[u8] {
        &self.states[idx * self.n..(idx + 1) * self.n]
    }

    pub fn rank(&self, tuple: &[u8]) -> usize {
        rank_with(&self.binom, tuple)
    }

    pub fn occupations(&self, idx: usize) -> Vec<u8> {
        let mut occ = vec![0u8; self.d];
        for &o in self.state(idx) {
            occ[o as usize] += 1;
        }
        occ
    }
}

fn rank_with(binom: &[Vec<usize>], tuple: &[u8]) -> usize {
    tuple
        .iter()
        .enumerate()
        .map(|(t, &o)| binom[o as usize + t][t + 1])
        .sum()
}

/// Removes one copy of each of `k` and `l` from a sorted tuple.
fn remove_pair(tuple: &[u8], k: u8, l: u8, out: &mut Vec<u8>) {
    out.clear();
    let (mut dk, mut dl) = (false, false);
    for &o in tuple {
        if !dk && o == k {
            dk = true;
        } else if !dl && o == l {
            dl = true;
        } else {
            out.push(o);
        }
    }
}

fn insert_sorted(rest: &[u8], i: u8, j: u8, out: &mut Vec<u8>) {
    out.clear();
    out.extend_from_slice(rest);
    for v in [i, j] {
        let pos = out.partition_point(|&x| x <= v);
        out.insert(pos, v);
    }
}

/// Pair-operator form `Σ_{P,Q} C_PQ a†_i a†_j a_l a_k` of `½ Σ V_ijkl a†_i a†_j a_l a_k`
/// over unordered pairs `P = (i ≤ j)`, `Q = (k ≤ l)`.
struct PairInteraction {
    pairs: Vec<(u8, u8)>,
    index: Vec<usize>,
    columns: Vec<Vec<(usize, f64)>>,
    d: usize,
}

impl PairInteraction {
    fn new(tensor: &TwoBodyTensor) -> Self {
        let d = tensor.dim();
        let mut pairs = Vec::new();
        let mut index = vec![usize::MAX; d * d];
        for i in 0..d {
            for j in i..d {
                index[i * d + j] = pairs.len();
                index[j * d + i] = pairs.len();
                pairs.push((i as u8, j as u8));
            }
        }
        let orderings = |a: u8, b: u8| {
            if a == b {
                vec![(a as usize, b as usize)]
            } else {
                vec![(a as usize, b as usize), (b as usize, a as usize)]
            }
        };
        let mut columns = vec![Vec::new(); pairs.len()];
        for (q, &(k, l)) in pairs.iter().enumerate() {
            for (p, &(i, j)) in pairs.iter().enumerate() {
                let mut c = 0.0;
                for &(a, b) in &orderings(i, j) {
                    for &(x, y) in &orderings(k, l) {
                        c += tensor.get(a, b, x, y);
                    }
                }
                if c != 0.0 {
                    columns[q].push((p, 0.5 * c));
                }
            }
        }
        Self {
            pairs,
            index,
            columns,
            d,
        }
    }
}

/// `N`-boson Hamiltonian in occupation representation.
struct ManyBody<'a> {
    space: &'a FockSpace,
    diag: Vec<f64>,
    coupling: f64,
    pairs: PairInteraction,
}

impl<'a> ManyBody<'a> {
    fn new(space: &'a FockSpace, energies: &[f64], tensor: &TwoBodyTensor, a: f64) -> Self {
        let diag = (0..space.dim())
            .map(|s| space.state(s).iter().map(|&o| energies[o as usize]).sum())
            .collect();
        let coupling = if space.particles() > 1 {
            a / (space.particles() - 1) as f64
        } else {
            0.0
        };
        Self {
            space,
            diag,
            coupling,
            pairs: PairInteraction::new(tensor),
        }
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let space = self.space;
        let n = space.particles();
        for (yi, (d, xi)) in y.iter_mut().zip(self.diag.iter().zip(x)) {
            *yi = d * xi;
        }
        if self.coupling == 0.0 || n < 2 {
            return;
        }
        let d = self.pairs.d;
        let mut occ = vec![0u8; d];
        let mut rest = Vec::with_capacity(n);
        let mut target = Vec::with_capacity(n);
        for s in 0..space.dim() {
            let xs = x[s];
            if xs == 0.0 {
                continue;
            }
            let tuple = space.state(s);
            occ.iter_mut().for_each(|o| *o = 0);
            for &o in tuple {
                occ[o as usize] += 1;
            }
            for a in 0..n {
                if a > 0 && tuple[a] == tuple[a - 1] {
                    continue;
                }
                for b in (a + 1)..n {
                    if b > a + 1 && tuple[b] == tuple[b - 1] {
                        continue;
                    }
                    let (k, l) = (tuple[a], tuple[b]);
                    let fq = if k == l {
                        let nk = occ[k as usize] as f64;
                        (nk * (nk - 1.0)).sqrt()
                    } else {
                        (occ[k as usize] as f64 * occ[l as usize] as f64).sqrt()
                    };
                    remove_pair(tuple, k, l, &mut rest);
                    occ[k as usize] -= 1;
                    occ[l as usize] -= 1;
                    let q = self.pairs.index[k as usize * d + l as usize];
                    for &(p, c) in &self.pairs.columns[q] {
                        let (i, j) = self.pairs.pairs[p];
                        let (ni, nj) = (occ[i as usize] as f64, occ[j as usize] as f64);
                        let fp = if i == j {
                            ((ni + 1.0) * (ni + 2.0)).sqrt()
                        } else {
                            ((ni + 1.0) * (nj + 1.0)).sqrt()
                        };
                        insert_sorted(&rest, i, j, &mut target);
                        let r = space.rank(&target);
                        y[r] -= self.coupling * c * fp * fq * xs;
                    }
                    occ[k as usize] += 1;
                    occ[l as usize] += 1;
                }
            }
        }
    }
}

// Lanczos.

#[derive(Clone, Debug)]
pub struct LanczosOptions {
    pub krylov_dim: usize,
    pub max_restarts: usize,
    /// Bound on `‖Hv − Ev‖` at convergence.
    pub tol: f64,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            krylov_dim: 120,
            max_restarts: 30,
            tol: 1e-9,
            seed: 7,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

struct Eigenpair {
    value: f64,
    vector: Vec<f64>,
    residual: f64,
    matvecs: usize,
}

const CHECK_EVERY: usize = 10;

/// Lowest eigenpair of the tridiagonal matrix with diagonal `alpha`.
fn tridiagonal_ground(alpha: &[f64], beta: &[f64]) -> (f64, Vec<f64>) {
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    let imin = eig.eigenvalues.imin();
    (eig.eigenvalues[imin], eig.eigenvectors.column(imin).iter().copied().collect())
}

/// Lowest eigenpair by restarted Lanczos with full reorthogonalization.
fn lanczos_ground(op: &ManyBody, opts: &LanczosOptions) -> Result<Eigenpair> {
    let dim = op.space.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut start: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    normalize(&mut start);
    let mut matvecs = 0;
    let mut best_residual = f64::INFINITY;
    let mut w = vec![0.0; dim];
    for _ in 0..=opts.max_restarts {
        let kmax = opts.krylov_dim.min(dim);
        let mut basis: Vec<Vec<f64>> = vec![start.clone()];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        loop {
            let k = basis.len() - 1;
            op.apply(&basis[k], &mut w);
            matvecs += 1;
            let a = dot(&w, &basis[k]);
            alpha.push(a);
            for _ in 0..2 {
                for v in &basis {
                    let c = dot(&w, v);
                    w.iter_mut().zip(v).for_each(|(x, y)| *x -= c * y);
                }
            }
            let b = normalize(&mut w);
            if basis.len() == kmax || b <= 1e-14 * a.abs().max(1.0) {
                break;
            }
            if alpha.len() % CHECK_EVERY == 0 {
                let (_, y) = tridiagonal_ground(&alpha, &beta);
                if (b * y[y.len() - 1]).abs() <= 0.01 * opts.tol {
                    break;
                }
            }
            beta.push(b);
            basis.push(w.clone());
        }
        let (_, y) = tridiagonal_ground(&alpha, &beta);
        let mut ritz = vec![0.0; dim];
        for (c, v) in y.iter().zip(&basis) {
            ritz.iter_mut().zip(v).for_each(|(r, x)| *r += c * x);
        }
        normalize(&mut ritz);
        op.apply(&ritz, &mut w);
        matvecs += 1;
        let value = dot(&ritz, &w);
        let residual = w
            .iter()
            .zip(&ritz)
            .map(|(hv, v)| (hv - value * v).powi(2))
            .sum::<f64>()
            .sqrt();
        best_residual = best_residual.min(residual);
        if residual <= opts.tol {
            return Ok(Eigenpair {
                value,
                vector: ritz,
                residual,
                matvecs,
            });
        }
        start = ritz;
    }
    Err(Error::EigenNotConverged(best_residual))
}

// Results.

/// `tr(h γ1)` and `tr(h⊗h γ2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments {
    pub one_body: f64,
    pub two_body: f64,
}

#[derive(Clone, Debug)]
pub struct EdResult {
    pub n: usize,
    pub a: f64,
    pub energy_per_particle: f64,
    /// Ground coefficients over [`FockSpace`] ranks.
    pub ground: Vec<f64>,
    pub residual: f64,
    pub matvecs: usize,
    pub gamma1: DMatrix<f64>,
    /// Indexed by `(i·d + j, k·d + l)` for `⟨a†_i a†_j a_l a_k⟩ / (N(N−1))`.
    pub gamma2: DMatrix<f64>,
    pub condensate_fraction: f64,
    pub moments: Moments,
}

/// One- or two-body reduced density matrix of a normalized symmetric state,
/// with unit trace.
pub fn reduced_density(space: &FockSpace, psi: &[f64], k: usize) -> Result<DMatrix<f64>> {
    let d = space.orbitals();
    let n = space.particles();
    match k {
        1 => {
            let mut g = DMatrix::zeros(d, d);
            let mut rest = Vec::with_capacity(n);
            for s in 0..space.dim() {
                let xs = psi[s];
                if xs == 0.0 {
                    continue;
                }
                let tuple = space.state(s);
                let occ = space.occupations(s);
                for (a, &j) in tuple.iter().enumerate() {
                    if a > 0 && tuple[a - 1] == j {
                        continue;
                    }
                    rest.clear();
                    rest.extend(tuple.iter().enumerate().filter(|&(b, _)| b != a).map(|(_, &o)| o));
                    let nj = occ[j as usize] as f64;
                    for i in 0..d as u8 {
                        let ni = occ[i as usize] as f64 - if i == j { 1.0 } else { 0.0 };
                        let mut t = rest.clone();
                        let pos = t.partition_point(|&x| x <= i);
                        t.insert(pos, i);
                        let r = space.rank(&t);
                        // one root of the integer product keeps n_j·n_j exact
                        g[(i as usize, j as usize)] += psi[r] * xs * (nj * (ni + 1.0)).sqrt();
                    }
                }
            }
            Ok(g / n as f64)
        }
        2 => {
            if n < 2 {
                return Err(Error::InvalidParameter("two-body density needs N >= 2".into()));
            }
            let mut g = DMatrix::zeros(d * d, d * d);
            let mut rest = Vec::with_capacity(n);
            let mut target = Vec::with_capacity(n);
            for s in 0..space.dim() {
                let xs = psi[s];
                if xs == 0.0 {
                    continue;
                }
                let tuple = space.state(s);
                let mut occ = space.occupations(s);
                let mut distinct = tuple.to_vec();
                distinct.dedup();
                for &k in &distinct {
                    for &l in &distinct {
                        if k == l && occ[k as usize] < 2 {
                            continue;
                        }
                        let fq = if k == l {
                            let nk = occ[k as usize] as f64;
                            nk * (nk - 1.0)
                        } else {
                            occ[k as usize] as f64 * occ[l as usize] as f64
                        };
                        remove_pair(tuple, k, l, &mut rest);
                        occ[k as usize] -= 1;
                        occ[l as usize] -= 1;
                        for i in 0..d as u8 {
                            for j in 0..d as u8 {
                                let (ni, nj) = (occ[i as usize] as f64, occ[j as usize] as f64);
                                let fp = if i == j {
                                    (ni + 1.0) * (ni + 2.0)
                                } else {
                                    (ni + 1.0) * (nj + 1.0)
                                };
                                insert_sorted(&rest, i, j, &mut target);
                                let r = space.rank(&target);
                                g[(i as usize * d + j as usize, k as usize * d + l as usize)] +=
                                    psi[r] * xs * (fp * fq).sqrt();
                            }
                        }
                        occ[k as usize] += 1;
                        occ[l as usize] += 1;
                    }
                }
            }
            Ok(g / (n * (n - 1)) as f64)
        }
        _ => Err(Error::InvalidParameter(format!("reduced density of order {k}"))),
    }
}

/// Largest eigenvalue of a symmetric matrix.
fn top_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let off = (0..m.nrows())
        .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
        .any(|(i, j)| i != j && m[(i, j)] != 0.0);
    if !off {
        return m.diagonal().max();
    }
    SymmetricEigen::new(m.clone()).eigenvalues.max()
}

/// Lowest eigenpair of `H_N` in the symmetric sector of the basis.
pub fn exact_diagonalize(
    n: usize,
    a: f64,
    basis: &OrbitalBasis,
    tensor: &TwoBodyTensor,
    opts: &LanczosOptions,
) -> Result<EdResult> {
    if n == 0 || n > MAX_PARTICLES {
        return Err(Error::InvalidParameter(format!("N = {n} outside 1..={MAX_PARTICLES}")));
    }
    if !(a >= 0.0) || !a.is_finite() {
        return Err(Error::InvalidParameter(format!("coupling a = {a}")));
    }
    if tensor.dim() != basis.dim() {
        return Err(Error::InvalidParameter("tensor and basis dimensions differ".into()));
    }
    let space = FockSpace::new(basis.dim(), n)?;
    let energies = basis.energies();
    let op = ManyBody::new(&space, &energies, tensor, a);
    let (ground, energy_per_particle, residual, matvecs) = if op.coupling == 0.0 {
        let best = (0..space.dim())
            .min_by(|&x, &y| op.diag[x].total_cmp(&op.diag[y]))
            .expect("nonempty sector");
        let mut v = vec![0.0; space.dim()];
        v[best] = 1.0;
        let occ = space.occupations(best);
        let e: f64 = occ
            .iter()
            .zip(&energies)
            .map(|(&k, e)| k as f64 / n as f64 * e)
            .sum();
        (v, e, 0.0, 0)
    } else {
        let pair = lanczos_ground(&op, opts)?;
        (pair.vector, pair.value / n as f64, pair.residual, pair.matvecs)
    };
    let gamma1 = reduced_density(&space, &ground, 1)?;
    let gamma2 = if n >= 2 {
        reduced_density(&space, &ground, 2)?
    } else {
        DMatrix::zeros(0, 0)
    };
    let d = basis.dim();
    let one_body = (0..d).map(|i| energies[i] * gamma1[(i, i)]).sum();
    let two_body = if n >= 2 {
        (0..d)
            .flat_map(|i| (0..d).map(move |j| (i, j)))
            .map(|(i, j)| energies[i] * energies[j] * gamma2[(i * d + j, i * d + j)])
            .sum()
    } else {
        one_body * one_body
    };
    let condensate_fraction = top_eigenvalue(&gamma1);
    Ok(EdResult {
        n,
        a,
        energy_per_particle,
        ground,
        residual,
        matvecs,
        gamma1,
        gamma2,
        condensate_fraction,
        moments: Moments { one_body, two_body },
    })
}

// Hartree theory in the basis.

#[derive(Clone, Debug)]
pub struct BasisHartree {
    pub energy: f64,
    pub coeffs: Vec<f64>,
    pub grad_norm: f64,
    pub iterations: usize,
}

/// `J_ik = Σ_jl V_ijkl c_j c_l`.
fn mean_field(tensor: &TwoBodyTensor, c: &[f64]) -> DMatrix<f64> {
    let d = tensor.dim();
    DMatrix::from_fn(d, d, |i, k| {
        let mut s = 0.0;
        for j in 0..d {
            if c[j] == 0.0 {
                continue;
            }
            for l in 0..d {
                s += tensor.get(i, j, k, l) * c[j] * c[l];
            }
        }
        s
    })
}

fn basis_energy(energies: &[f64], tensor: &TwoBodyTensor, a: f64, c: &[f64]) -> (f64, Vec<f64>) {
    let d = c.len();
    let j = mean_field(tensor, c);
    let jc: Vec<f64> = (0..d).map(|i| (0..d).map(|k| j[(i, k)] * c[k]).sum()).collect();
    let kin: f64 = (0..d).map(|i| energies[i] * c[i] * c[i]).sum();
    let coul = dot(c, &jc);
    let grad = (0..d).map(|i| 2.0 * energies[i] * c[i] - 2.0 * a * jc[i]).collect();
    (kin - 0.5 * a * coul, grad)
}

/// Minimizes `𝓔^H(Σ c_i φ_i) = Σ e_i c_i² − (a/2) D` over unit vectors `c`,
/// keeping the best of the given starting vectors.
///
/// Each step replaces `c` by the lowest eigenvector of the mean-field matrix
/// `diag(e) − a J(c)`. The energy is concave in `ccᵀ`, so no step raises it.
pub fn hartree_in_basis(
    energies: &[f64],
    tensor: &TwoBodyTensor,
    a: f64,
    starts: &[Vec<f64>],
) -> BasisHartree {
    const MAX_ITER: usize = 500;
    let d = energies.len();
    let mut best: Option<BasisHartree> = None;
    for start in starts {
        let mut c = start.clone();
        if normalize(&mut c) == 0.0 {
            continue;
        }
        let (mut e, mut g) = basis_energy(energies, tensor, a, &c);
        let mut iterations = 0;
        let residual = |c: &[f64], g: &[f64]| {
            let lambda = dot(g, c);
            g.iter().zip(c).map(|(x, y)| (x - lambda * y).powi(2)).sum::<f64>().sqrt()
        };
        while iterations < MAX_ITER && residual(&c, &g) > 1e-13 * (1.0 + e.abs()) {
            iterations += 1;
            let mut f = mean_field(tensor, &c) * (-a);
            for i in 0..d {
                f[(i, i)] += energies[i];
            }
            let eig = SymmetricEigen::new(f);
            let low = eig.eigenvectors.column(eig.eigenvalues.imin());
            let sign = if low.iter().zip(&c).map(|(x, y)| x * y).sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
            let mut next: Vec<f64> = low.iter().map(|x| sign * x).collect();
            normalize(&mut next);
            let (en, gn) = basis_energy(energies, tensor, a, &next);
            if en >= e {
                break;
            }
            c = next;
            e = en;
            g = gn;
        }
        let grad_norm = residual(&c, &g);
        if best.as_ref().map_or(true, |b| e < b.energy) {
            best = Some(BasisHartree {
                energy: e,
                coeffs: c,
                grad_norm,
                iterations,
            });
        }
    }
    best.expect("at least one nonzero start")
}

#[derive(Clone, Debug)]
pub struct VariationalOrdering {
    pub e_ed: f64,
    pub e_hartree: f64,
    /// `e_hartree − e_ed`.
    pub gap: f64,
    pub ed: EdResult,
    pub hartree: BasisHartree,
}

/// ED energy per particle against the best in-basis Hartree product state.
pub fn variational_ordering(
    n: usize,
    a: f64,
    basis: &OrbitalBasis,
    tensor: &TwoBodyTensor,
    opts: &LanczosOptions,
) -> Result<VariationalOrdering> {
    let ed = exact_diagonalize(n, a, basis, tensor, opts)?;
    let d = basis.dim();
    let energies = basis.energies();
    let mut lowest = vec![0.0; d];
    lowest[0] = 1.0;
    let mut starts = vec![lowest];
    if a > 0.0 {
        let eig = SymmetricEigen::new(ed.gamma1.clone());
        let top = eig.eigenvalues.imax();
        starts.push(eig.eigenvectors.column(top).iter().copied().collect());
    }
    let hartree = hartree_in_basis(&energies, tensor, a, &starts);
    Ok(VariationalOrdering {
        e_ed: ed.energy_per_particle,
        e_hartree: hartree.energy,
        gap: hartree.energy - ed.energy_per_particle,
        ed,
        hartree,
    })
}

/// Lowest two-boson energy per particle by dense diagonalization in the
/// symmetrized pair basis, built directly from the tensor.
pub fn two_body_dense(energies: &[f64], tensor: &TwoBodyTensor, a: f64) -> f64 {
    let d = energies.len();
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i..d).map(move |j| (i, j))).collect();
    let norm = |i: usize, j: usize| if i == j { 0.5 } else { std::f64::consts::FRAC_1_SQRT_2 };
    let h = DMatrix::from_fn(pairs.len(), pairs.len(), |p, q| {
        let (i, j) = pairs[p];
        let (k, l) = pairs[q];
        let mut v = 0.0;
        for (a1, b1) in [(i, j), (j, i)] {
            for (a2, b2) in [(k, l), (l, k)] {
                let kin = if a1 == a2 && b1 == b2 {
                    energies[a1] + energies[b1]
                } else {
                    0.0
                };
                v += kin - a * tensor.get(a1, b1, a2, b2);
            }
        }
        norm(i, j) * norm(k, l) * v
    });
    SymmetricEigen::new(h).eigenvalues.min() / 2.0
}

// Moments along a coupling ladder.

#[derive(Clone, Debug)]
pub struct MomentRow {
    pub delta: f64,
    pub moments: Moments,
    /// `tr(hγ1)·δ^{1/(q+1)}`.
    pub ratio_one: f64,
    /// `tr(h⊗h γ2)·δ^{2/(q+1)}`.
    pub ratio_two: f64,
}

#[derive(Clone, Debug)]
pub struct MomentTable {
    /// Sorted by decreasing `δ`.
    pub rows: Vec<MomentRow>,
    /// Largest `ratio_one` relative to its value at the largest `δ`.
    pub growth_one: f64,
    pub growth_two: f64,
    /// `max/min` of `ratio_one` across the ladder.
    pub spread_one: f64,
    pub spread_two: f64,
}

impl MomentTable {
    /// Neither scaled moment grows by more than `factor` along the ladder.
    pub fn bounded(&self, factor: f64) -> bool {
        self.growth_one <= factor && self.growth_two <= factor
    }
}

/// Scaled moments for ED results at gaps `δ = a* − a` with exponent `q`.
pub fn moments_diagnostic(points: &[(f64, Moments)], q: f64) -> Result<MomentTable> {
    if points.len() < 3 {
        return Err(Error::InsufficientRows {
            have: points.len(),
            need: 3,
        });
    }
    let mut rows: Vec<MomentRow> = points
        .iter()
        .map(|&(delta, moments)| MomentRow {
            delta,
            moments,
            ratio_one: moments.one_body * delta.powf(1.0 / (q + 1.0)),
            ratio_two: moments.two_body * delta.powf(2.0 / (q + 1.0)),
        })
        .collect();
    rows.sort_by(|x, y| y.delta.total_cmp(&x.delta));
    let stats = |f: &dyn Fn(&MomentRow) -> f64| {
        let max = rows.iter().map(f).fold(f64::MIN, f64::max);
        let min = rows.iter().map(f).fold(f64::MAX, f64::min);
        (max / f(&rows[0]), max / min)
    };
    let (growth_one, spread_one) = stats(&|r| r.ratio_one);
    let (growth_two, spread_two) = stats(&|r| r.ratio_two);
    Ok(MomentTable {
        rows,
        growth_one,
        growth_two,
        spread_one,
        spread_two,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(6);
        for deg in 0..12 {
            let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg)).sum();
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg + 1) as f64 };
            assert!((s - exact).abs() < 1e-14, "degree {deg}");
        }
    }

    #[test]
    fn harmonics_are_orthonormal() {
        let q = SphereQuadrature::new(3, 6);
        for l1 in 0..=3usize {
            for m1 in -(l1 as i64)..=(l1 as i64) {
                for l2 in 0..=3usize {
                    for m2 in -(l2 as i64)..=(l2 as i64) {
                        let (a, b) = (&q.values[harmonic_index(l1, m1)], &q.values[harmonic_index(l2, m2)]);
                        let s: f64 = (0..q.weights.len()).map(|i| q.weights[i] * a[i] * b[i]).sum();
                        let t = if (l1, m1) == (l2, m2) { 1.0 } else { 0.0 };
                        assert!((s - t).abs() < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn gaunt_known_values() {
        let y00 = (4.0 * PI).sqrt().recip();
        assert!((real_gaunt(0, 0, 0, 0, 0, 0) - y00).abs() < 1e-14);
        assert!((real_gaunt(1, 1, 1, 1, 0, 0) - y00).abs() < 1e-14);
        // ∫ Y10 Y10 Y20 = (1/√(4π))·2/√5
        let expected = y00 * 2.0 / 5f64.sqrt();
        assert!((real_gaunt(1, 0, 1, 0, 2, 0) - expected).abs() < 1e-13);
        assert_eq!(real_gaunt(1, 0, 1, 0, 1, 0), 0.0);
        assert_eq!(real_gaunt(1, 1, 1, -1, 2, 0), 0.0);
    }

    #[test]
    fn sector_dimension_is_binomial() {
        assert_eq!(sector_dimension(25, 4), 20475);
        let space = FockSpace::new(7, 3).unwrap();
        assert_eq!(space.dim() as u128, sector_dimension(7, 3));
        for s in 0..space.dim() {
            assert_eq!(space.rank(space.state(s)), s);
        }
    }

    #[test]
    fn multipole_zero_matches_newton() {
        let grid = RadialGrid::new(10.0, 200).unwrap();
        let u = RadialFunction::from_fn(&grid, |r| (-r * r).exp()).unwrap();
        let rho = u.density();
        let g: Vec<f64> = (0..grid.len())
            .map(|j| 4.0 * PI * grid.node(j).powi(2) * rho.values()[j])
            .collect();
        let phi = multipole_potential(&grid, &g, 0);
        let newton = crate::newton::newton_potential(&rho).potential;
        for j in 0..grid.len() {
            assert!((phi[j] - newton.values()[j]).abs() < 1e-13 * (1.0 + phi[j].abs()));
        }
    }
}
