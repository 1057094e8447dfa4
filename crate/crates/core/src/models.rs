//! Chain models, Bloch sectors, and the correlation matrices built from them.
//!
//! Momenta are always in full-chain units: sector `m` of an `N`-block
//! partition with block size `ℓ` samples θ = 2π(kN + m + φ)/(Nℓ) for
//! k = 0..ℓ, where φ is the boundary twist (0 periodic, ½ antiperiodic).
//! This equals the block-unit form 2π(k + ν)/ℓ with ν = (m + φ)/N.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{ComplexMatrix, C64};

/// Largest admitted N·ℓ unless overridden.
pub const DEFAULT_MAX_SITES: usize = 16384;

/// Denominator threshold below which the fermionic dispersion phase is undefined.
pub const GAPLESS_THRESHOLD: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistics {
    Boson,
    Fermion,
}

/// Fermion momentum quantization. The harmonic chain is always periodic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Periodic,
    Antiperiodic,
}

impl Boundary {
    pub fn twist(self) -> f64 {
        match self {
            Boundary::Periodic => 0.0,
            Boundary::Antiperiodic => 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum ChainSpec {
    /// Harmonic ring H = Σ p²/2 + q²/2 − α q_i q_{i+1}.
    Harmonic { alpha: f64 },
    /// XY spin ring in its free-fermion form.
    Xy {
        gamma: f64,
        lambda: f64,
        #[serde(default)]
        boundary: Boundary,
    },
}

impl ChainSpec {
    pub fn harmonic(alpha: f64) -> Result<Self> {
        let spec = ChainSpec::Harmonic { alpha };
        spec.validate()?;
        Ok(spec)
    }

    pub fn xy(gamma: f64, lambda: f64, boundary: Boundary) -> Result<Self> {
        let spec = ChainSpec::Xy {
            gamma,
            lambda,
            boundary,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ChainSpec::Harmonic { alpha } => {
                if !(0.0..=1.0).contains(&alpha) {
                    return Err(Error::invalid("alpha", format!("{alpha} outside [0, 1]")));
                }
            }
            ChainSpec::Xy { gamma, lambda, .. } => {
                if !gamma.is_finite() {
                    return Err(Error::invalid("gamma", "must be finite"));
                }
                if !lambda.is_finite() {
                    return Err(Error::invalid("lambda", "must be finite"));
                }
            }
        }
        Ok(())
    }

    pub fn statistics(&self) -> Statistics {
        match self {
            ChainSpec::Harmonic { .. } => Statistics::Boson,
            ChainSpec::Xy { .. } => Statistics::Fermion,
        }
    }

    pub fn twist(&self) -> f64 {
        match self {
            ChainSpec::Harmonic { .. } => 0.0,
            ChainSpec::Xy { boundary, .. } => boundary.twist(),
        }
    }

    /// Harmonic chain exactly at α = 1, where the θ = 0 mode has zero frequency.
    pub fn is_boson_critical(&self) -> bool {
        matches!(*self, ChainSpec::Harmonic { alpha } if alpha >= 1.0)
    }

    /// Dispersion ω(θ): real for bosons, unit modulus for fermions.
    pub fn dispersion(&self, theta: f64) -> Result<C64> {
        match *self {
            ChainSpec::Harmonic { alpha } => Ok(C64::new(dispersion_boson(theta, alpha), 0.0)),
            ChainSpec::Xy { gamma, lambda, .. } => dispersion_fermion(theta, gamma, lambda),
        }
    }

    /// Compact `key=value;…` label without commas, used in CSV rows.
    pub fn params_label(&self) -> String {
        match *self {
            ChainSpec::Harmonic { alpha } => format!("alpha={alpha}"),
            ChainSpec::Xy {
                gamma,
                lambda,
                boundary,
            } => {
                let bc = match boundary {
                    Boundary::Periodic => "periodic",
                    Boundary::Antiperiodic => "antiperiodic",
                };
                format!("gamma={gamma};lambda={lambda};boundary={bc}")
            }
        }
    }

    pub fn model_name(&self) -> &'static str {
        match self {
            ChainSpec::Harmonic { .. } => "harmonic",
            ChainSpec::Xy { .. } => "xy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub n_blocks: usize,
    pub block_size: usize,
}

impl PartitionSpec {
    pub fn new(n_blocks: usize, block_size: usize) -> Result<Self> {
        Self::with_limit(n_blocks, block_size, DEFAULT_MAX_SITES)
    }

    pub fn with_limit(n_blocks: usize, block_size: usize, max_sites: usize) -> Result<Self> {
        if n_blocks == 0 {
            return Err(Error::invalid("n_blocks", "must be at least 1"));
        }
        if block_size == 0 {
            return Err(Error::invalid("ell", "must be at least 1"));
        }
        let sites = n_blocks
            .checked_mul(block_size)
            .ok_or_else(|| Error::invalid("ell", "site count overflows"))?;
        if sites > max_sites {
            return Err(Error::invalid(
                "ell",
                format!("N*ell = {sites} exceeds the maximum of {max_sites} sites"),
            ));
        }
        Ok(Self {
            n_blocks,
            block_size,
        })
    }

    pub fn total_sites(&self) -> usize {
        self.n_blocks * self.block_size
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochSector {
    pub m: usize,
    /// η = 2π(m + φ)/N.
    pub eta: f64,
    /// ν = (η mod 2π)/2π.
    pub nu: f64,
}

impl BlochSector {
    pub fn new(m: usize, n_blocks: usize, twist: f64) -> Self {
        let nu = (m as f64 + twist) / n_blocks as f64;
        Self {
            m,
            eta: 2.0 * PI * nu,
            nu: nu.rem_euclid(1.0),
        }
    }

    /// Index of the sector with η' = 2π − η.
    pub fn mirror_index(&self, n_blocks: usize, twist: f64) -> usize {
        // (m + φ) + (m' + φ) = N  ⇒  m' = N − m − 2φ
        let shift = (2.0 * twist).round() as usize;
        (2 * n_blocks - self.m - shift) % n_blocks
    }

    /// Momenta θ_{k+ν} = 2π(k + ν)/ℓ for k = 0..ℓ.
    pub fn momenta(&self, block_size: usize) -> Vec<f64> {
        let nu = self.eta / (2.0 * PI);
        (0..block_size)
            .map(|k| 2.0 * PI * (k as f64 + nu) / block_size as f64)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SectorMatrix {
    pub sector: BlochSector,
    pub omega: ComplexMatrix,
    pub statistics: Statistics,
    /// Dispersion values at the sector momenta; these are the eigenvalues of `omega`.
    pub spectrum: Vec<C64>,
}

#[derive(Debug, Clone)]
pub struct PotentialMatrix {
    pub sector: BlochSector,
    pub v: ComplexMatrix,
}

pub fn dispersion_boson(theta: f64, alpha: f64) -> f64 {
    (1.0 - alpha * theta.cos()).max(0.0).sqrt()
}

pub fn dispersion_fermion(theta: f64, gamma: f64, lambda: f64) -> Result<C64> {
    let (s, c) = theta.sin_cos();
    let re = c - lambda;
    let denom = (re * re + gamma * gamma * s * s).sqrt();
    if denom < GAPLESS_THRESHOLD {
        return Err(Error::GaplessPoint { theta });
    }
    Ok(C64::new(re / denom, -gamma * s / denom))
}

/// ξ = 1/√(2(1−α)); infinite at α = 1.
pub fn correlation_length(alpha: f64) -> f64 {
    if alpha >= 1.0 {
        f64::INFINITY
    } else {
        1.0 / (2.0 * (1.0 - alpha)).sqrt()
    }
}

/// Toeplitz matrix T[i][j] = (1/n) Σ_k w_k e^{iθ_k(i−j)}.
fn spectral_toeplitz(momenta: &[f64], weights: &[C64]) -> ComplexMatrix {
    let n = momenta.len();
    let scale = 1.0 / n as f64;
    // t[d + n - 1] holds the entry for i − j = d
    let t: Vec<C64> = (0..2 * n - 1)
        .map(|idx| {
            let d = idx as f64 - (n as f64 - 1.0);
            momenta
                .iter()
                .zip(weights)
                .map(|(&th, &w)| w * C64::from_polar(1.0, th * d))
                .sum::<C64>()
                * scale
        })
        .collect();
    ComplexMatrix::from_fn(n, |i, j| t[i + n - 1 - j])
}

pub fn sector_matrix(spec: &ChainSpec, part: &PartitionSpec, m: usize) -> Result<SectorMatrix> {
    if m >= part.n_blocks {
        return Err(Error::invalid("sector", format!("m = {m} not below N = {}", part.n_blocks)));
    }
    let sector = BlochSector::new(m, part.n_blocks, spec.twist());
    let momenta = sector.momenta(part.block_size);
    let spectrum = momenta
        .iter()
        .map(|&th| spec.dispersion(th))
        .collect::<Result<Vec<_>>>()?;
    let omega = spectral_toeplitz(&momenta, &spectrum);
    Ok(SectorMatrix {
        sector,
        omega,
        statistics: spec.statistics(),
        spectrum,
    })
}

/// All N sector matrices in order of m.
pub fn sector_matrices(spec: &ChainSpec, part: &PartitionSpec) -> Result<Vec<SectorMatrix>> {
    (0..part.n_blocks).map(|m| sector_matrix(spec, part, m)).collect()
}

/// The full Nℓ×Nℓ correlation matrix Ω_{ij} = (1/Nℓ) Σ_q ω(θ_q) e^{iθ_q(i−j)}.
pub fn full_correlation(spec: &ChainSpec, part: &PartitionSpec) -> Result<ComplexMatrix> {
    let sites = part.total_sites();
    let momenta: Vec<f64> = (0..sites)
        .map(|q| 2.0 * PI * (q as f64 + spec.twist()) / sites as f64)
        .collect();
    let weights = momenta
        .iter()
        .map(|&th| spec.dispersion(th))
        .collect::<Result<Vec<_>>>()?;
    Ok(spectral_toeplitz(&momenta, &weights))
}

/// Block Fourier transform of a block-Toeplitz matrix:
/// [ω_η]_{ij} = Σ_m [Ω]_{mℓ+i, j} e^{−imη}, η = 2π(m' + φ)/N.
pub fn bloch_transform(
    full: &ComplexMatrix,
    part: &PartitionSpec,
    twist: f64,
    statistics: Statistics,
) -> Result<Vec<SectorMatrix>> {
    let (n, l) = (part.n_blocks, part.block_size);
    if full.dim() != n * l {
        return Err(Error::DimensionMismatch {
            expected: n * l,
            found: full.dim(),
        });
    }
    let scale = full.frobenius_norm().max(1.0);
    let mut deviation: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            for i in 0..l {
                for j in 0..l {
                    let reference = if a >= b {
                        full[((a - b) * l + i, j)]
                    } else {
                        full[(i, (b - a) * l + j)]
                    };
                    deviation = deviation.max((full[(a * l + i, b * l + j)] - reference).norm());
                }
            }
        }
    }
    if deviation > 1e-10 * scale {
        return Err(Error::NotBlockToeplitz { deviation });
    }
    Ok((0..n)
        .map(|m| {
            let sector = BlochSector::new(m, n, twist);
            let omega = ComplexMatrix::from_fn(l, |i, j| {
                (0..n)
                    .map(|blk| full[(blk * l + i, j)] * C64::from_polar(1.0, -(blk as f64) * sector.eta))
                    .sum()
            });
            SectorMatrix {
                sector,
                omega,
                statistics,
                spectrum: Vec::new(),
            }
        })
        .collect())
}

/// Inverse of [`bloch_transform`]: the first block column of Ω, blocks stacked.
pub fn inverse_bloch_first_column(sectors: &[SectorMatrix]) -> Vec<ComplexMatrix> {
    let n = sectors.len();
    (0..n)
        .map(|blk| {
            let l = sectors[0].omega.dim();
            ComplexMatrix::from_fn(l, |i, j| {
                sectors
                    .iter()
                    .map(|s| s.omega[(i, j)] * C64::from_polar(1.0, blk as f64 * s.sector.eta))
                    .sum::<C64>()
                    / n as f64
            })
        })
        .collect()
}

/// Sector potential V_η = ω_η² of the harmonic chain: unit diagonal, −α/2 on
/// nearest neighbours, and the twisted ring bond −(α/2)e^{±iη} between the
/// last and first sites.
pub fn potential_matrix(alpha: f64, part: &PartitionSpec, m: usize) -> PotentialMatrix {
    let l = part.block_size;
    let sector = BlochSector::new(m, part.n_blocks, 0.0);
    let mut v = ComplexMatrix::identity(l);
    let hop = C64::new(-alpha / 2.0, 0.0);
    for i in 0..l {
        let j = i + 1;
        if j < l {
            v[(i, j)] += hop;
            v[(j, i)] += hop;
        } else {
            let phase = C64::from_polar(1.0, sector.eta);
            v[(i, 0)] += hop * phase;
            v[(0, i)] += hop * phase.conj();
        }
    }
    PotentialMatrix { sector, v }
}
