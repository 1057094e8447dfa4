//! Bipartite reference values computed without the fixed-point solver.
//!
//! For two parties the optimal product overlap is the largest Schmidt
//! coefficient, which Gaussian states expose mode by mode: through symplectic
//! eigenvalues μ of the reduced bosonic block, or singular values σ of the
//! reduced fermionic correlation block. A Fock-space exact diagonalization of
//! small fermion rings checks the fermionic formulas from scratch.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{hermitian_eig, hermitian_function, ComplexMatrix, C64};
use crate::models::{full_correlation, ChainSpec, PartitionSpec, Statistics};

/// Largest ring handled by [`exact_diag_oracle`] (Fock dimension 4096).
pub const DENSE_SITE_LIMIT: usize = 12;

const SPECTRUM_TOL: f64 = 1e-6;
const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BipartiteSpectrum {
    pub statistics: Statistics,
    /// Symplectic eigenvalues μ ≥ 1 (bosons, descending) or singular values
    /// σ ∈ [0, 1] (fermions, ascending).
    pub mode_values: Vec<f64>,
}

impl BipartiteSpectrum {
    /// Boson Boltzmann weights z = n̄/(n̄+1), n̄ = (μ−1)/2.
    pub fn boltzmann(&self) -> Vec<f64> {
        self.mode_values
            .iter()
            .map(|&mu| {
                let n = occupation(mu);
                n / (n + 1.0)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BipartiteMeasures {
    /// −log₂ of the largest squared Schmidt coefficient.
    pub e_geom: f64,
    /// Von Neumann entropy of the block, in bits.
    pub entropy: f64,
}

fn occupation(mu: f64) -> f64 {
    ((mu - 1.0) / 2.0).max(0.0)
}

fn real_toeplitz(n: usize, entry: impl Fn(usize) -> f64) -> ComplexMatrix {
    let t: Vec<f64> = (0..n).map(entry).collect();
    ComplexMatrix::from_fn(n, |i, j| C64::new(t[i.abs_diff(j)], 0.0))
}

fn harmonic_alpha(spec: &ChainSpec) -> Result<f64> {
    match *spec {
        ChainSpec::Harmonic { alpha } => Ok(alpha),
        ChainSpec::Xy { .. } => Err(Error::invalid("model", "bosonic oracle needs the harmonic chain")),
    }
}

fn check_block(total_sites: usize, block: usize) -> Result<()> {
    if block == 0 || block > total_sites {
        return Err(Error::invalid("block", format!("{block} not in 1..={total_sites}")));
    }
    Ok(())
}

/// Position (weights 1/ω) and momentum (weights ω) correlations of the ring
/// ground state restricted to the first `block` sites. With `block =
/// total_sites` the two are mutually inverse.
pub fn reduced_blocks_boson(spec: &ChainSpec, total_sites: usize, block: usize) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let alpha = harmonic_alpha(spec)?;
    check_block(total_sites, block)?;
    if spec.is_boson_critical() {
        return Err(Error::Critical);
    }
    Ok(boson_blocks(alpha, total_sites, block, false))
}

/// Critical-chain variant: the zero-frequency mode is dropped from both sums
/// and both blocks are compressed onto the complement of the block-uniform
/// vector, leaving a finite state on `block − 1` modes.
pub fn reduced_blocks_boson_critical(total_sites: usize, block: usize) -> Result<(ComplexMatrix, ComplexMatrix)> {
    check_block(total_sites, block)?;
    let (g, h) = boson_blocks(1.0, total_sites, block, true);
    Ok((g.compress_off_uniform(), h.compress_off_uniform()))
}

fn boson_blocks(alpha: f64, total_sites: usize, block: usize, skip_zero: bool) -> (ComplexMatrix, ComplexMatrix) {
    let l = total_sites as f64;
    let modes: Vec<(f64, f64)> = (0..total_sites)
        .filter(|&q| !(skip_zero && q == 0))
        .map(|q| {
            let theta = 2.0 * PI * q as f64 / l;
            (theta, (1.0 - alpha * theta.cos()).max(0.0).sqrt())
        })
        .collect();
    let g = real_toeplitz(block, |d| modes.iter().map(|&(th, w)| (th * d as f64).cos() / w).sum::<f64>() / l);
    let h = real_toeplitz(block, |d| modes.iter().map(|&(th, w)| (th * d as f64).cos() * w).sum::<f64>() / l);
    (g, h)
}

/// μ_j = √eig(G_A H_A), computed as the spectrum of H^{1/2} G H^{1/2}.
pub fn symplectic_spectrum(g: &ComplexMatrix, h: &ComplexMatrix) -> Result<BipartiteSpectrum> {
    if g.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: g.dim(),
            found: h.dim(),
        });
    }
    let h_half = hermitian_function(h, |x| {
        if x > 0.0 {
            C64::new(x.sqrt(), 0.0)
        } else {
            C64::new(f64::NAN, 0.0)
        }
    })?;
    let sym = &(&h_half * g) * &h_half;
    if sym.as_matrix().iter().any(|z| !z.re.is_finite()) {
        return Err(Error::InvalidState("momentum block is not positive definite".into()));
    }
    let eig = hermitian_eig(&sym)?;
    let mut mode_values = Vec::with_capacity(eig.values.len());
    for &x in eig.values.iter().rev() {
        if x < 1.0 - SPECTRUM_TOL {
            return Err(Error::InvalidState(format!("symplectic eigenvalue squared {x} below 1")));
        }
        mode_values.push(x.max(1.0).sqrt());
    }
    Ok(BipartiteSpectrum {
        statistics: Statistics::Boson,
        mode_values,
    })
}

/// E_geom = Σ log₂(n̄+1) and S = Σ [(n̄+1)log₂(n̄+1) − n̄ log₂ n̄].
pub fn bosonic_bipartite_measures(spectrum: &BipartiteSpectrum) -> BipartiteMeasures {
    let mut e_geom = 0.0;
    let mut entropy = 0.0;
    for &mu in &spectrum.mode_values {
        let n = occupation(mu);
        e_geom += (n + 1.0).log2();
        entropy += (n + 1.0) * (n + 1.0).log2();
        if n > 0.0 {
            entropy -= n * n.log2();
        }
    }
    BipartiteMeasures { e_geom, entropy }
}

/// Leading `block`×`block` part of the ring's unitary correlation matrix.
pub fn reduced_block_fermion(spec: &ChainSpec, total_sites: usize, block: usize) -> Result<ComplexMatrix> {
    if spec.statistics() != Statistics::Fermion {
        return Err(Error::invalid("model", "fermionic oracle needs the XY chain"));
    }
    check_block(total_sites, block)?;
    let ring = PartitionSpec::with_limit(1, total_sites, usize::MAX)?;
    Ok(full_correlation(spec, &ring)?.leading_block(block))
}

pub fn fermionic_spectrum(c_a: &ComplexMatrix) -> Result<BipartiteSpectrum> {
    let svd = c_a.as_matrix().clone().svd(false, false);
    let mut mode_values = Vec::with_capacity(c_a.dim());
    for &s in svd.singular_values.iter() {
        if s > 1.0 + SPECTRUM_TOL {
            return Err(Error::InvalidState(format!("singular value {s} exceeds 1")));
        }
        mode_values.push(s.min(1.0));
    }
    mode_values.sort_by(f64::total_cmp);
    Ok(BipartiteSpectrum {
        statistics: Statistics::Fermion,
        mode_values,
    })
}

/// With p = (1+σ)/2: E_geom = −Σ log₂ p and S = Σ h₂(p).
pub fn fermionic_bipartite_measures(c_a: &ComplexMatrix) -> Result<BipartiteMeasures> {
    let spectrum = fermionic_spectrum(c_a)?;
    let mut e_geom = 0.0;
    let mut entropy = 0.0;
    for &s in &spectrum.mode_values {
        let p = (1.0 + s) / 2.0;
        e_geom -= p.log2();
        entropy += binary_entropy(p);
    }
    Ok(BipartiteMeasures { e_geom, entropy })
}

fn binary_entropy(p: f64) -> f64 {
    let term = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    term(p) + term(1.0 - p)
}

/// Quadratic form matrix M with H = −½ Σ_{jk} M_{jk} (c_j + c_j†)(c_k − c_k†).
fn coupling_matrix(gamma: f64, lambda: f64, sign: f64, sites: usize, rotation: usize) -> Vec<f64> {
    let mut m = vec![0.0; sites * sites];
    let forward = (1.0 - gamma) / 2.0;
    let backward = (1.0 + gamma) / 2.0;
    // physical site of label a is (a + rotation) mod L
    let label = |site: usize| (site + sites - rotation % sites) % sites;
    for j in 0..sites {
        let a = label(j);
        m[a * sites + a] -= lambda;
        let next = (j + 1) % sites;
        let wrap = if next == 0 { sign } else { 1.0 };
        let b = label(next);
        m[a * sites + b] += forward * wrap;
        m[b * sites + a] += backward * wrap;
    }
    m
}

fn parity_sign(state: usize, mode: usize) -> f64 {
    if (state & ((1 << mode) - 1)).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Ground state of the quadratic ring in its lower-energy parity sector.
fn fock_ground_state(m: &[f64], sites: usize) -> Result<Vec<f64>> {
    let dim = 1usize << sites;
    let mut sectors: Vec<(f64, f64, Vec<f64>)> = Vec::with_capacity(2);
    for parity in 0..2u32 {
        let states: Vec<usize> = (0..dim).filter(|s| s.count_ones() % 2 == parity).collect();
        let mut index = vec![usize::MAX; dim];
        for (i, &s) in states.iter().enumerate() {
            index[s] = i;
        }
        let n = states.len();
        let mut h = DMatrix::<f64>::zeros(n, n);
        for (col, &s) in states.iter().enumerate() {
            for k in 0..sites {
                // (c_k − c_k†)|s⟩
                let occupied = s & (1 << k) != 0;
                let coef_k = parity_sign(s, k) * if occupied { 1.0 } else { -1.0 };
                let s1 = s ^ (1 << k);
                for j in 0..sites {
                    let mjk = m[j * sites + k];
                    if mjk == 0.0 {
                        continue;
                    }
                    // (c_j + c_j†)
                    let coef = coef_k * parity_sign(s1, j);
                    let s2 = s1 ^ (1 << j);
                    h[(index[s2], col)] += -0.5 * mjk * coef;
                }
            }
        }
        let eig = h.symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let e1 = order.get(1).map_or(f64::INFINITY, |&i| eig.eigenvalues[i]);
        let mut psi = vec![0.0; dim];
        for (i, &s) in states.iter().enumerate() {
            psi[s] = eig.eigenvectors[(i, order[0])];
        }
        sectors.push((eig.eigenvalues[order[0]], e1, psi));
    }
    let (lo, hi) = if sectors[0].0 <= sectors[1].0 { (0, 1) } else { (1, 0) };
    let gap = sectors[hi].0.min(sectors[lo].1) - sectors[lo].0;
    if gap < DEGENERACY_TOL {
        return Err(Error::InvalidState(format!("degenerate ground state (gap {gap:e})")));
    }
    let psi = sectors.swap_remove(lo).2;
    Ok(psi)
}

/// Exact ground state of a small XY ring in Fock space, split after the
/// first `block` sites counted from physical site `rotation`.
pub fn exact_diag_oracle(spec: &ChainSpec, total_sites: usize, block: usize, rotation: usize) -> Result<BipartiteMeasures> {
    let (gamma, lambda) = match *spec {
        ChainSpec::Xy { gamma, lambda, .. } => (gamma, lambda),
        ChainSpec::Harmonic { .. } => return Err(Error::invalid("model", "exact diagonalization needs the XY chain")),
    };
    if total_sites > DENSE_SITE_LIMIT {
        return Err(Error::TooLarge {
            sites: total_sites,
            limit: DENSE_SITE_LIMIT,
        });
    }
    if total_sites < 2 {
        return Err(Error::invalid("sites", "ring needs at least 2 sites"));
    }
    check_block(total_sites, block)?;
    let sign = (2.0 * PI * spec.twist()).cos().round();
    let m = coupling_matrix(gamma, lambda, sign, total_sites, rotation);
    let psi = fock_ground_state(&m, total_sites)?;

    let rows = 1usize << block;
    let cols = 1usize << (total_sites - block);
    let schmidt = DMatrix::from_fn(rows, cols, |a, b| psi[a | (b << block)]);
    let svd = schmidt.svd(false, false);
    let weights: Vec<f64> = svd.singular_values.iter().map(|s| s * s).collect();
    let largest = weights.iter().cloned().fold(0.0, f64::max);
    let entropy = weights.iter().filter(|&&w| w > 0.0).map(|&w| -w * w.log2()).sum();
    Ok(BipartiteMeasures {
        e_geom: -largest.log2(),
        entropy,
    })
}
