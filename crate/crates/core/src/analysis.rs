//! Block-size sweeps and the logarithmic scaling fit.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::entanglement::{total_entanglement_with, EntanglementResult, ZeroModeTreatment};
use crate::error::{Error, Result};
use crate::models::{sector_matrices, ChainSpec, PartitionSpec, DEFAULT_MAX_SITES};
use crate::solver::{solve_optimal, OptimalState, SolverConfig};

/// Block size that δ𝓔 is measured against when present in the grid.
pub const REFERENCE_ELL: usize = 4;

const RHO_MIN: f64 = 0.05;
const RHO_MAX: f64 = 4.0;
const RHO_SCAN_POINTS: usize = 400;
const MAX_CONDITION: f64 = 1e12;
const SATURATION_FRACTION: f64 = 0.2;

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub solver: SolverConfig,
    pub max_sites: usize,
    pub zero_mode: ZeroModeTreatment,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            max_sites: DEFAULT_MAX_SITES,
            zero_mode: ZeroModeTreatment::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub ell: usize,
    pub entanglement: EntanglementResult,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    pub damping: f64,
    /// 𝓔(ℓ) − 𝓔(ℓ_ref).
    pub delta_density: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub spec: ChainSpec,
    pub n_blocks: usize,
    pub ell_grid: Vec<usize>,
    pub reference_ell: usize,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn all_converged(&self) -> bool {
        self.points.iter().all(|p| p.converged)
    }

    pub fn densities(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.entanglement.density).collect()
    }

    pub fn sector_table(&self) -> SectorTable {
        let sectors = match self.points.first() {
            None => Vec::new(),
            Some(first) => first
                .entanglement
                .per_sector
                .iter()
                .enumerate()
                .map(|(i, s)| SectorSeries {
                    m: s.m,
                    nu: s.nu,
                    values: self.points.iter().map(|p| p.entanglement.per_sector[i].bits).collect(),
                })
                .collect(),
        };
        SectorTable {
            ells: self.ell_grid.clone(),
            sectors,
        }
    }
}

/// Per-sector E_η on a block-size grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectorTable {
    pub ells: Vec<usize>,
    pub sectors: Vec<SectorSeries>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectorSeries {
    pub m: usize,
    pub nu: f64,
    pub values: Vec<f64>,
}

/// Checks the grid and the site budget for every point.
pub fn validate_grid(n_blocks: usize, ell_grid: &[usize], max_sites: usize) -> Result<()> {
    if ell_grid.is_empty() {
        return Err(Error::invalid("ell", "grid is empty"));
    }
    if ell_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("ell", "grid must be strictly increasing"));
    }
    for &ell in ell_grid {
        PartitionSpec::with_limit(n_blocks, ell, max_sites)?;
    }
    Ok(())
}

fn solve_point(spec: &ChainSpec, n_blocks: usize, ell: usize, config: &SweepConfig) -> Result<(OptimalState, EntanglementResult)> {
    let part = PartitionSpec::with_limit(n_blocks, ell, config.max_sites)?;
    let sectors = sector_matrices(spec, &part)?;
    let state = match solve_optimal(&sectors, &config.solver) {
        Ok(state) => state,
        Err(Error::NotConverged(state)) => *state,
        Err(e) => return Err(e),
    };
    let ent = total_entanglement_with(&state.omega_op, &sectors, spec, config.zero_mode)?;
    Ok((state, ent))
}

/// Runs the full pipeline at every block size. Points are solved
/// independently and may run concurrently; a point that exhausts its
/// iteration budget is kept and flagged.
pub fn sweep_block_size(spec: &ChainSpec, n_blocks: usize, ell_grid: &[usize], config: &SweepConfig) -> Result<SweepResult> {
    spec.validate()?;
    config.solver.validate()?;
    validate_grid(n_blocks, ell_grid, config.max_sites)?;
    let solved = config
        .solver
        .execution
        .map(ell_grid, |&ell| solve_point(spec, n_blocks, ell, config));
    let mut points = Vec::with_capacity(ell_grid.len());
    for (&ell, outcome) in ell_grid.iter().zip(solved) {
        let (state, entanglement) = outcome?;
        points.push(SweepPoint {
            ell,
            entanglement,
            converged: state.converged,
            iterations: state.iterations_used,
            residual: state.final_residual,
            damping: state.damping_used,
            delta_density: 0.0,
        });
    }
    let reference_ell = if ell_grid.contains(&REFERENCE_ELL) {
        REFERENCE_ELL
    } else {
        ell_grid[0]
    };
    let reference = points
        .iter()
        .find(|p| p.ell == reference_ell)
        .map(|p| p.entanglement.density)
        .unwrap_or(0.0);
    for p in &mut points {
        p.delta_density = p.entanglement.density - reference;
    }
    Ok(SweepResult {
        spec: *spec,
        n_blocks,
        ell_grid: ell_grid.to_vec(),
        reference_ell,
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeSeries {
    pub m: usize,
    pub nu: f64,
    pub slopes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeTable {
    /// Geometric midpoints √(ℓ₁ℓ₂) of consecutive grid points.
    pub ell_mid: Vec<f64>,
    pub series: Vec<SlopeSeries>,
}

/// κ_ν(ℓ_mid) = (E_η(ℓ₂) − E_η(ℓ₁)) / log₂(ℓ₂/ℓ₁) between consecutive grid
/// points; on a power-of-two grid this is the plain forward difference.
pub fn instantaneous_slopes(table: &SectorTable) -> Result<SlopeTable> {
    if table.ells.len() < 3 {
        return Err(Error::GridTooSmall(format!(
            "{} block sizes, at least 3 needed",
            table.ells.len()
        )));
    }
    if table.ells.windows(2).any(|w| w[0] >= w[1] || w[0] == 0) {
        return Err(Error::invalid("ell", "grid must be positive and strictly increasing"));
    }
    let steps: Vec<(f64, f64)> = table
        .ells
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0] as f64, w[1] as f64);
            ((a * b).sqrt(), (b / a).log2())
        })
        .collect();
    let mut series = Vec::with_capacity(table.sectors.len());
    for s in &table.sectors {
        if s.values.len() != table.ells.len() {
            return Err(Error::DimensionMismatch {
                expected: table.ells.len(),
                found: s.values.len(),
            });
        }
        let slopes = s
            .values
            .windows(2)
            .zip(&steps)
            .map(|(v, &(_, dlog))| (v[1] - v[0]) / dlog)
            .collect();
        series.push(SlopeSeries {
            m: s.m,
            nu: s.nu,
            slopes,
        });
    }
    Ok(SlopeTable {
        ell_mid: steps.iter().map(|s| s.0).collect(),
        series,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub kappa_star: f64,
    pub rho: f64,
    pub a0: f64,
    pub a2: f64,
    pub rss: f64,
    pub c_star: f64,
    /// From the linear-part covariance; `None` with no residual degrees of freedom.
    pub kappa_std_err: Option<f64>,
    pub condition: f64,
    pub points: usize,
}

struct LinearFit {
    coef: [f64; 3],
    rss: f64,
    singular: [f64; 3],
    v: DMatrix<f64>,
}

fn design(x: &[f64], nu: &[f64], rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(x.len(), 3, |i, j| {
        let decay = x[i].powf(-rho);
        match j {
            0 => 1.0,
            1 => decay,
            _ => (nu[i] - 0.5).powi(2) * decay,
        }
    })
}

fn linear_fit(x: &[f64], nu: &[f64], y: &DVector<f64>, rho: f64) -> Option<LinearFit> {
    let a = design(x, nu, rho);
    let svd = a.clone().svd(true, true);
    let s = &svd.singular_values;
    let smax = s.max();
    if !(smax > 0.0) {
        return None;
    }
    let coef = svd.solve(y, smax * 1e-15).ok()?;
    let rss = (&a * &coef - y).norm_squared();
    let v = svd.v_t.as_ref()?.transpose();
    // singular values in the order nalgebra returns, matched to columns of v
    Some(LinearFit {
        coef: [coef[0], coef[1], coef[2]],
        rss,
        singular: [s[0], s[1], s[2]],
        v,
    })
}

fn rss_at(x: &[f64], nu: &[f64], y: &DVector<f64>, rho: f64) -> f64 {
    linear_fit(x, nu, y, rho).map_or(f64::INFINITY, |f| f.rss)
}

fn distinct_count(values: impl Iterator<Item = f64>) -> usize {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    v.len()
}

/// Separable least squares for κ_ν(ℓ) = κ* + (a0 + a2(ν−½)²)ℓ^(−ρ): a scan
/// over ρ ∈ (0.05, 4] refined by golden-section search, with the linear
/// parameters solved exactly at each ρ.
pub fn fit_scaling(slopes: &SlopeTable) -> Result<FitResult> {
    let mut x = Vec::new();
    let mut nu = Vec::new();
    let mut y = Vec::new();
    for s in &slopes.series {
        for (&l, &k) in slopes.ell_mid.iter().zip(&s.slopes) {
            x.push(l);
            nu.push(s.nu);
            y.push(k);
        }
    }
    if distinct_count(slopes.ell_mid.iter().copied()) < 3 {
        return Err(Error::GridTooSmall("fit needs at least 3 distinct block sizes".into()));
    }
    if distinct_count(slopes.series.iter().map(|s| s.nu)) < 3 {
        return Err(Error::GridTooSmall("fit needs at least 3 distinct sectors".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let y = DVector::from_vec(y);

    let step = (RHO_MAX - RHO_MIN) / RHO_SCAN_POINTS as f64;
    let grid: Vec<f64> = (1..=RHO_SCAN_POINTS).map(|i| RHO_MIN + step * i as f64).collect();
    let scan: Vec<f64> = grid.iter().map(|&r| rss_at(&x, &nu, &y, r)).collect();
    let best = (0..grid.len())
        .min_by(|&a, &b| scan[a].total_cmp(&scan[b]))
        .expect("non-empty scan");
    let mut lo = if best == 0 { RHO_MIN + 1e-9 } else { grid[best - 1] };
    let mut hi = grid.get(best + 1).copied().unwrap_or(RHO_MAX);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - ratio * (hi - lo);
    let mut d = lo + ratio * (hi - lo);
    let mut fc = rss_at(&x, &nu, &y, c);
    let mut fd = rss_at(&x, &nu, &y, d);
    while hi - lo > 1e-13 * hi {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - ratio * (hi - lo);
            fc = rss_at(&x, &nu, &y, c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + ratio * (hi - lo);
            fd = rss_at(&x, &nu, &y, d);
        }
    }
    let mut rho = 0.5 * (lo + hi);
    if scan[best] < rss_at(&x, &nu, &y, rho) {
        rho = grid[best];
    }

    let fit = linear_fit(&x, &nu, &y, rho).ok_or(Error::IllConditionedFit { condition: f64::INFINITY })?;
    let smax = fit.singular.iter().cloned().fold(0.0, f64::max);
    let smin = fit.singular.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditionedFit { condition });
    }
    let n = y.len();
    let kappa_std_err = (n > 4).then(|| {
        let sigma2 = fit.rss / (n - 4) as f64;
        let var: f64 = (0..3).map(|k| (fit.v[(0, k)] / fit.singular[k]).powi(2)).sum();
        (sigma2 * var).sqrt()
    });
    let [kappa_star, a0, a2] = fit.coef;
    Ok(FitResult {
        kappa_star,
        rho,
        a0,
        a2,
        rss: fit.rss,
        c_star: 12.0 * kappa_star,
        kappa_std_err,
        condition,
        points: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CentralCharge {
    pub c_star: f64,
    pub std_err: Option<f64>,
}

/// c* = 12κ*, with the uncertainty scaled from the κ* standard error.
pub fn estimate_central_charge(fit: &FitResult) -> CentralCharge {
    CentralCharge {
        c_star: 12.0 * fit.kappa_star,
        std_err: fit.kappa_std_err.map(|s| 12.0 * s),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SaturationReport {
    pub saturated: bool,
    /// 𝓔(ℓ_{i+1}) − 𝓔(ℓ_i).
    pub increments: Vec<f64>,
    /// Largest increment magnitude starting at ℓ ≤ max(ξ, ℓ_min).
    pub reference_increment: f64,
    /// Start of the first increment below the threshold.
    pub crossover_ell: Option<usize>,
}

/// Saturated when the last two density increments each fall below 20% of
/// the largest increment seen before ℓ reaches ξ.
pub fn detect_saturation(sweep: &SweepResult, xi: f64) -> SaturationReport {
    saturation_from_densities(&sweep.ell_grid, &sweep.densities(), xi)
}

pub fn saturation_from_densities(ells: &[usize], densities: &[f64], xi: f64) -> SaturationReport {
    let increments: Vec<f64> = densities.windows(2).map(|w| w[1] - w[0]).collect();
    let first = ells.first().map_or(0.0, |&l| l as f64);
    let cutoff = xi.max(first);
    let reference_increment = increments
        .iter()
        .zip(ells)
        .filter(|&(_, &l)| (l as f64) <= cutoff)
        .map(|(&d, _)| d.abs())
        .fold(0.0, f64::max);
    let threshold = SATURATION_FRACTION * reference_increment;
    let crossover_ell = increments
        .iter()
        .zip(ells)
        .find(|&(&d, _)| d.abs() < threshold)
        .map(|(_, &l)| l);
    let flat = increments.iter().all(|d| d.abs() < 1e-12);
    let saturated = increments.len() >= 2
        && (flat || increments[increments.len() - 2..].iter().all(|d| d.abs() < threshold));
    SaturationReport {
        saturated,
        increments,
        reference_increment,
        crossover_ell,
    }
}
