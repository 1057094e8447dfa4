//! Fixed-point solver for the optimal single-block Gaussian state.
//!
//! The optimum satisfies ω⁻¹ = (1/N) Σ_η 2 (ω + ω_η)⁻¹. The map
//! F(ω) = [(2/N) Σ_η (ω + ω_η)⁻¹]⁻¹ is iterated from the sector mean, with
//! each iterate projected back to Hermitian matrices (bosons) or unitaries
//! (fermions).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::kernels::{hermitian_function, hermitize, invert, log_abs_det, polar_unitary, ComplexMatrix, C64};
use crate::models::{SectorMatrix, Statistics};

/// Consecutive residual increases that trigger the damped restart.
const OSCILLATION_WINDOW: usize = 10;
const RETRY_DAMPING: f64 = 0.5;
/// Iterations over which the contraction rate is measured. A run whose
/// updates alternate in direction and whose rate cannot reach the tolerance
/// within the budget is creeping along a near −1 mode, which damping removes.
const STALL_WINDOW: usize = 20;

#[derive(Debug, Clone, Default)]
pub enum InitStrategy {
    #[default]
    SectorMean,
    Identity,
    Provided(ComplexMatrix),
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub max_iterations: usize,
    pub residual_tolerance: f64,
    /// ω ← (1−d)·F(ω) + d·ω.
    pub damping: f64,
    pub init: InitStrategy,
    /// Restart once at d = 0.5 when the residual rises for ten iterations in a
    /// row, or stalls while the iterate flips back and forth.
    pub auto_damping: bool,
    pub execution: Execution,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            residual_tolerance: 1e-10,
            damping: 0.0,
            init: InitStrategy::SectorMean,
            auto_damping: true,
            execution: Execution::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations", "must be at least 1"));
        }
        if !(self.residual_tolerance > 0.0 && self.residual_tolerance.is_finite()) {
            return Err(Error::invalid("tolerance", "must be positive and finite"));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::invalid("damping", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct OptimalState {
    pub omega_op: ComplexMatrix,
    pub statistics: Statistics,
    /// Applications of the fixed-point map, summed over restarts.
    pub iterations_used: usize,
    pub final_residual: f64,
    pub converged: bool,
    pub damping_used: f64,
    /// Residual of every map application in the final run.
    pub residual_history: Vec<f64>,
}

fn check_sectors(sectors: &[SectorMatrix]) -> Result<(usize, Statistics)> {
    let first = sectors
        .first()
        .ok_or_else(|| Error::invalid("sectors", "at least one sector is required"))?;
    let dim = first.omega.dim();
    for s in sectors {
        if s.omega.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: s.omega.dim(),
            });
        }
        if s.statistics != first.statistics {
            return Err(Error::invalid("sectors", "mixed statistics"));
        }
    }
    Ok((dim, first.statistics))
}

fn project(m: &ComplexMatrix, statistics: Statistics) -> Result<ComplexMatrix> {
    match statistics {
        Statistics::Boson => Ok(hermitize(m)),
        Statistics::Fermion => polar_unitary(m),
    }
}

/// F(ω) followed by the statistics projection.
pub fn fixed_point_map(omega: &ComplexMatrix, sectors: &[SectorMatrix]) -> Result<ComplexMatrix> {
    fixed_point_map_with(omega, sectors, Execution::Sequential)
}

pub fn fixed_point_map_with(
    omega: &ComplexMatrix,
    sectors: &[SectorMatrix],
    execution: Execution,
) -> Result<ComplexMatrix> {
    let (dim, statistics) = check_sectors(sectors)?;
    if omega.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: omega.dim(),
        });
    }
    let inverses = execution.map(sectors, |s| invert(&(omega + &s.omega)));
    let mut sum = ComplexMatrix::zeros(dim);
    for inv in inverses {
        sum = &sum + &inv?;
    }
    let mean = sum.scale(2.0 / sectors.len() as f64);
    project(&invert(&mean)?, statistics)
}

fn relative_residual(omega: &ComplexMatrix, mapped: &ComplexMatrix) -> f64 {
    (omega - mapped).frobenius_norm() / omega.frobenius_norm().max(f64::MIN_POSITIVE)
}

fn initial_iterate(sectors: &[SectorMatrix], init: &InitStrategy, statistics: Statistics) -> Result<ComplexMatrix> {
    let dim = sectors[0].omega.dim();
    let raw = match init {
        InitStrategy::SectorMean => {
            let mut sum = ComplexMatrix::zeros(dim);
            for s in sectors {
                sum = &sum + &s.omega;
            }
            let mean = sum.scale(1.0 / sectors.len() as f64);
            // fermion sector values of opposite sign can cancel exactly
            return project(&mean, statistics).or_else(|_| {
                let shifted = &mean + &ComplexMatrix::identity(dim).scale_complex(C64::new(0.0, 0.5));
                project(&shifted, statistics)
            });
        }
        InitStrategy::Identity => ComplexMatrix::identity(dim),
        InitStrategy::Provided(m) => {
            if m.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: m.dim(),
                });
            }
            m.clone()
        }
    };
    project(&raw, statistics)
}

struct RunOutcome {
    omega: ComplexMatrix,
    iterations: usize,
    residual: f64,
    converged: bool,
    oscillating: bool,
    history: Vec<f64>,
}

fn run(
    sectors: &[SectorMatrix],
    start: ComplexMatrix,
    statistics: Statistics,
    config: &SolverConfig,
    damping: f64,
    watch_oscillation: bool,
) -> Result<RunOutcome> {
    let mut omega = start;
    let mut history = Vec::new();
    let mut rising = 0;
    let mut prev_step: Option<ComplexMatrix> = None;
    for it in 1..=config.max_iterations {
        let mapped = fixed_point_map_with(&omega, sectors, config.execution)?;
        let r = relative_residual(&omega, &mapped);
        if let Some(&prev) = history.last() {
            rising = if r > prev { rising + 1 } else { 0 };
        }
        history.push(r);
        let step = &mapped - &omega;
        let alternating = prev_step
            .as_ref()
            .is_some_and(|p| p.as_matrix().dotc(step.as_matrix()).re < 0.0);
        prev_step = Some(step);
        let stalled = alternating && it > STALL_WINDOW && {
            let rate = (r / history[it - 1 - STALL_WINDOW]).powf(1.0 / STALL_WINDOW as f64);
            rate >= 1.0 || it as f64 + (config.residual_tolerance / r).ln() / rate.ln() > config.max_iterations as f64
        };
        if r <= config.residual_tolerance {
            return Ok(RunOutcome {
                omega,
                iterations: it,
                residual: r,
                converged: true,
                oscillating: false,
                history,
            });
        }
        if watch_oscillation && (rising >= OSCILLATION_WINDOW || stalled) {
            return Ok(RunOutcome {
                omega,
                iterations: it,
                residual: r,
                converged: false,
                oscillating: true,
                history,
            });
        }
        omega = if damping > 0.0 {
            project(&(&mapped.scale(1.0 - damping) + &omega.scale(damping)), statistics)?
        } else {
            mapped
        };
    }
    let residual = *history.last().unwrap_or(&f64::INFINITY);
    Ok(RunOutcome {
        omega,
        iterations: config.max_iterations,
        residual,
        converged: false,
        oscillating: false,
        history,
    })
}

/// Iterates the fixed-point map to convergence. Returns
/// [`Error::NotConverged`] carrying the last iterate when the budget runs out.
pub fn solve_optimal(sectors: &[SectorMatrix], config: &SolverConfig) -> Result<OptimalState> {
    config.validate()?;
    let (_, statistics) = check_sectors(sectors)?;
    let start = initial_iterate(sectors, &config.init, statistics)?;
    let retry = config.auto_damping && config.damping < RETRY_DAMPING;
    let first = run(sectors, start.clone(), statistics, config, config.damping, retry)?;
    let (outcome, damping, spent) = if first.oscillating {
        let second = run(sectors, start, statistics, config, RETRY_DAMPING, false)?;
        (second, RETRY_DAMPING, first.iterations)
    } else {
        (first, config.damping, 0)
    };
    let state = OptimalState {
        omega_op: outcome.omega,
        statistics,
        iterations_used: spent + outcome.iterations,
        final_residual: outcome.residual,
        converged: outcome.converged,
        damping_used: damping,
        residual_history: outcome.history,
    };
    if state.converged {
        Ok(state)
    } else {
        Err(Error::NotConverged(Box::new(state)))
    }
}

/// Entanglement objective up to the ω-independent log det ω_η terms, in nats.
fn objective(omega: &ComplexMatrix, sectors: &[SectorMatrix], statistics: Statistics) -> Result<f64> {
    let mut total = 0.0;
    for s in sectors {
        let half_sum = (omega + &s.omega).scale(0.5);
        total += log_abs_det(&half_sum)?;
    }
    Ok(match statistics {
        Statistics::Boson => total - 0.5 * sectors.len() as f64 * log_abs_det(omega)?,
        Statistics::Fermion => -total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationarityReport {
    pub min_delta: f64,
    pub max_delta: f64,
    pub probes: usize,
    /// No probe lowered the objective by more than the noise threshold.
    pub stationary: bool,
}

pub const STATIONARITY_PROBES: usize = 64;
pub const STATIONARITY_STEP: f64 = 1e-4;
/// Second-order gains at step 10⁻⁴ are ~10⁻⁸; first-order losses at a
/// non-stationary point dominate this by orders of magnitude.
pub const STATIONARITY_THRESHOLD: f64 = 1e-9;

fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
    let raw = ComplexMatrix::from_fn(n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let h = hermitize(&raw);
    let norm = h.frobenius_norm();
    h.scale(1.0 / norm)
}

/// Probes the objective around ω_op along random manifold-preserving
/// directions (±H pairs) of relative size [`STATIONARITY_STEP`]. Values are in bits.
pub fn verify_stationarity(state: &OptimalState, sectors: &[SectorMatrix], seed: u64) -> Result<StationarityReport> {
    let (dim, statistics) = check_sectors(sectors)?;
    let omega = &state.omega_op;
    let base = objective(omega, sectors, statistics)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_delta = f64::INFINITY;
    let mut max_delta = f64::NEG_INFINITY;
    let pairs = STATIONARITY_PROBES / 2;
    for _ in 0..pairs {
        let h = random_hermitian(&mut rng, dim);
        for sign in [1.0, -1.0] {
            let probe = match statistics {
                Statistics::Boson => {
                    let step = STATIONARITY_STEP * sign * omega.frobenius_norm();
                    omega + &h.scale(step)
                }
                Statistics::Fermion => {
                    let eps = STATIONARITY_STEP * sign;
                    let rotation = hermitian_function(&h, |x| C64::from_polar(1.0, eps * x))?;
                    omega * &rotation
                }
            };
            let delta = (objective(&probe, sectors, statistics)? - base) / std::f64::consts::LN_2;
            min_delta = min_delta.min(delta);
            max_delta = max_delta.max(delta);
        }
    }
    Ok(StationarityReport {
        min_delta,
        max_delta,
        probes: 2 * pairs,
        stationary: min_delta >= -STATIONARITY_THRESHOLD,
    })
}

#[derive(Debug, Clone)]
pub struct UniquenessReport {
    pub trials: usize,
    pub converged_trials: usize,
    /// Largest relative Frobenius distance from the default-initialized solution.
    pub max_deviation: f64,
    pub agree: bool,
}

fn random_start(rng: &mut ChaCha8Rng, n: usize, statistics: Statistics) -> Result<ComplexMatrix> {
    let raw = ComplexMatrix::from_fn(n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    match statistics {
        Statistics::Boson => {
            let gram = &raw * &raw.adjoint();
            Ok(&gram.scale(1.0 / n as f64) + &ComplexMatrix::identity(n).scale(0.5))
        }
        Statistics::Fermion => polar_unitary(&raw),
    }
}

/// Re-solves from `trials` random starting points and compares against the
/// sector-mean solution. Disagreement is reported, not resolved.
pub fn uniqueness_check(
    sectors: &[SectorMatrix],
    config: &SolverConfig,
    trials: usize,
    seed: u64,
) -> Result<UniquenessReport> {
    let (dim, statistics) = check_sectors(sectors)?;
    let reference = solve_optimal(
        sectors,
        &SolverConfig {
            init: InitStrategy::SectorMean,
            ..config.clone()
        },
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_deviation: f64 = 0.0;
    let mut converged_trials = 0;
    for _ in 0..trials {
        let start = random_start(&mut rng, dim, statistics)?;
        let cfg = SolverConfig {
            init: InitStrategy::Provided(start),
            ..config.clone()
        };
        match solve_optimal(sectors, &cfg) {
            Ok(state) => {
                converged_trials += 1;
                let d = relative_residual(&reference.omega_op, &state.omega_op);
                max_deviation = max_deviation.max(d);
            }
            Err(Error::NotConverged(_)) => {}
            Err(e) => return Err(e),
        }
    }
    let agree_tol = (1e3 * config.residual_tolerance).max(1e-8);
    Ok(UniquenessReport {
        trials,
        converged_trials,
        max_deviation,
        agree: converged_trials == trials && max_deviation <= agree_tol,
    })
}
