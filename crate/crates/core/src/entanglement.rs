//! Per-sector geometric entanglement, in bits.
//!
//! E_η = ± log₂ |det ½(ω + ω_η)| ∓ ½ log₂|det ω| ∓ ½ log₂|det ω_η|, with the
//! upper sign for bosons. At the critical harmonic point the η = 0 sector
//! carries a zero mode and is replaced by a finite renormalized value.

use std::f64::consts::LN_2;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{log_abs_det, ComplexMatrix};
use crate::models::{correlation_length, dispersion_boson, ChainSpec, SectorMatrix, Statistics};

/// Spectrum entries below this are treated as the critical zero mode.
const ZERO_MODE_TOL: f64 = 1e-12;

/// How the critical η = 0 sector is made finite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZeroModeTreatment {
    /// Restrict ω_op and ω₀ to the complement of the uniform vector, the
    /// eigenvector of the zero mode, before taking determinants.
    #[default]
    Project,
    /// Keep the full ℓ×ℓ determinants and drop only the zero eigenvalue from
    /// log det ω₀. Equals the α → 1 limit of E − E_div.
    Subtract,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectorEntanglement {
    pub m: usize,
    pub nu: f64,
    pub bits: f64,
    pub renormalized: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntanglementResult {
    pub per_sector: Vec<SectorEntanglement>,
    pub total: f64,
    /// total / N.
    pub density: f64,
    pub renormalized: bool,
    /// −½ log₂ ω(0) for the harmonic chain below criticality, 0 for fermions,
    /// `None` where it diverges.
    pub e_div: Option<f64>,
    /// Harmonic correlation length; infinite at criticality, `None` for fermions.
    pub xi: Option<f64>,
}

fn log2_abs_det(m: &ComplexMatrix) -> Result<f64> {
    if m.dim() == 0 {
        return Ok(0.0);
    }
    Ok(log_abs_det(m)? / LN_2)
}

/// log₂|det ω_η| from the sector spectrum.
fn log2_abs_det_sector(sector: &SectorMatrix, skip_zero_mode: bool) -> Result<f64> {
    let mut acc = 0.0;
    for (k, w) in sector.spectrum.iter().enumerate() {
        let modulus = w.norm();
        if modulus < ZERO_MODE_TOL {
            if skip_zero_mode {
                continue;
            }
            return Err(Error::SingularMatrix { step: k, pivot: modulus });
        }
        acc += modulus.log2();
    }
    Ok(acc)
}

fn combine(statistics: Statistics, half_sum: f64, op: f64, sector: f64) -> f64 {
    let value = half_sum - 0.5 * op - 0.5 * sector;
    match statistics {
        Statistics::Boson => value,
        Statistics::Fermion => -value,
    }
}

/// E_η for one sector. Fails with [`Error::SingularMatrix`] on the critical
/// zero mode; use [`sector_entanglement_renormalized`] there.
pub fn sector_entanglement(omega_op: &ComplexMatrix, sector: &SectorMatrix) -> Result<f64> {
    if omega_op.dim() != sector.omega.dim() {
        return Err(Error::DimensionMismatch {
            expected: sector.omega.dim(),
            found: omega_op.dim(),
        });
    }
    let log_sector = log2_abs_det_sector(sector, false)?;
    let half_sum = log2_abs_det(&(omega_op + &sector.omega).scale(0.5))?;
    let log_op = log2_abs_det(omega_op)?;
    Ok(combine(sector.statistics, half_sum, log_op, log_sector))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Renormalized {
    pub e_ren: f64,
    /// `None` at criticality, where it diverges.
    pub e_div: Option<f64>,
}

/// Renormalized η = 0 contribution of the harmonic chain.
///
/// Below criticality this is E₀ − E_div with E_div = −½ log₂ ω(0). At α = 1
/// the zero mode is removed according to `treatment`.
pub fn sector_entanglement_renormalized(
    omega_op: &ComplexMatrix,
    sector: &SectorMatrix,
    spec: &ChainSpec,
    treatment: ZeroModeTreatment,
) -> Result<Renormalized> {
    let alpha = match *spec {
        ChainSpec::Harmonic { alpha } => alpha,
        ChainSpec::Xy { .. } => return Err(Error::WrongSector),
    };
    if sector.sector.m != 0 || sector.statistics != Statistics::Boson {
        return Err(Error::WrongSector);
    }
    if !spec.is_boson_critical() {
        let e = sector_entanglement(omega_op, sector)?;
        let e_div = -0.5 * dispersion_boson(0.0, alpha).log2();
        return Ok(Renormalized {
            e_ren: e - e_div,
            e_div: Some(e_div),
        });
    }
    let log_sector = log2_abs_det_sector(sector, true)?;
    let e_ren = match treatment {
        ZeroModeTreatment::Subtract => {
            let half_sum = log2_abs_det(&(omega_op + &sector.omega).scale(0.5))?;
            combine(Statistics::Boson, half_sum, log2_abs_det(omega_op)?, log_sector)
        }
        ZeroModeTreatment::Project => {
            let op = omega_op.compress_off_uniform();
            let zero = sector.omega.compress_off_uniform();
            let half_sum = log2_abs_det(&(&op + &zero).scale(0.5))?;
            combine(Statistics::Boson, half_sum, log2_abs_det(&op)?, log_sector)
        }
    };
    Ok(Renormalized { e_ren, e_div: None })
}

/// Sum over sectors with the default zero-mode treatment.
pub fn total_entanglement(omega_op: &ComplexMatrix, sectors: &[SectorMatrix], spec: &ChainSpec) -> Result<EntanglementResult> {
    total_entanglement_with(omega_op, sectors, spec, ZeroModeTreatment::default())
}

pub fn total_entanglement_with(
    omega_op: &ComplexMatrix,
    sectors: &[SectorMatrix],
    spec: &ChainSpec,
    treatment: ZeroModeTreatment,
) -> Result<EntanglementResult> {
    if sectors.is_empty() {
        return Err(Error::invalid("sectors", "at least one sector is required"));
    }
    let critical = spec.is_boson_critical();
    let mut per_sector = Vec::with_capacity(sectors.len());
    for s in sectors {
        let renormalize = critical && s.sector.m == 0;
        let bits = if renormalize {
            sector_entanglement_renormalized(omega_op, s, spec, treatment)?.e_ren
        } else {
            sector_entanglement(omega_op, s)?
        };
        per_sector.push(SectorEntanglement {
            m: s.sector.m,
            nu: s.sector.nu,
            bits,
            renormalized: renormalize,
        });
    }
    let total: f64 = per_sector.iter().map(|s| s.bits).sum();
    let (e_div, xi) = match *spec {
        ChainSpec::Harmonic { alpha } => {
            let e_div = (!critical).then(|| -0.5 * dispersion_boson(0.0, alpha).log2());
            (e_div, Some(correlation_length(alpha)))
        }
        ChainSpec::Xy { .. } => (Some(0.0), None),
    };
    Ok(EntanglementResult {
        density: total / sectors.len() as f64,
        per_sector,
        total,
        renormalized: critical,
        e_div,
        xi,
    })
}
