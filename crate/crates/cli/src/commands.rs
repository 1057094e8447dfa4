use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};

use critscale_core::analysis::{estimate_central_charge, fit_scaling, instantaneous_slopes, sweep_block_size};
use critscale_core::entanglement::total_entanglement_with;
use critscale_core::models::{sector_matrices, PartitionSpec};
use critscale_core::oracle::{
    bosonic_bipartite_measures, exact_diag_oracle, fermionic_bipartite_measures, reduced_block_fermion,
    reduced_blocks_boson, symplectic_spectrum, BipartiteMeasures, DENSE_SITE_LIMIT,
};
use critscale_core::report::{compute_document, fit_document, plot_script, read_sweep_csv, round_sig, sweep_csv_string, to_json_string};
use critscale_core::solver::solve_optimal;
use critscale_core::{exec, ChainSpec, Error, Statistics};

use crate::config::{ConfigError, RunConfig};

pub const EXIT_OK: i32 = 0;
/// Output could not be written.
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;
pub const EXIT_FIT: i32 = 4;
pub const EXIT_ORACLE: i32 = 5;

/// Solver vs two-party Schmidt value.
pub const SOLVER_ORACLE_TOL: f64 = 1e-3;
/// Gaussian formula vs Fock-space ground state.
pub const EXACT_TOL: f64 = 1e-8;

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::new(EXIT_CONFIG, format!("config error: {e}"))
    }
}

/// Maps a pipeline error onto the exit-code contract.
fn pipeline_failure(e: Error) -> Failure {
    let code = match &e {
        Error::InvalidParameter { .. }
        | Error::GaplessPoint { .. }
        | Error::TooLarge { .. }
        | Error::Critical
        | Error::NotBlockToeplitz { .. }
        | Error::DimensionMismatch { .. }
        | Error::WrongSector => EXIT_CONFIG,
        Error::GridTooSmall(_) | Error::IllConditionedFit { .. } => EXIT_FIT,
        Error::InvalidState(_) => EXIT_ORACLE,
        _ => EXIT_NOT_CONVERGED,
    };
    let prefix = if code == EXIT_CONFIG { "config error" } else { "error" };
    Failure::new(code, format!("{prefix}: {e}"))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    let result = match out {
        Some(path) => std::fs::write(path, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush())
        }
    };
    result.map_err(|e| Failure::new(EXIT_IO, format!("cannot write output: {e}")))
}

pub fn compute(cfg: &RunConfig, timing: bool) -> Result<i32, Failure> {
    let &[ell] = cfg.ells.as_slice() else {
        return Err(ConfigError::new("ell", "compute takes exactly one block size").into());
    };
    let started = Instant::now();
    let part = PartitionSpec::with_limit(cfg.n_blocks, ell, cfg.sweep.max_sites).map_err(pipeline_failure)?;
    let outcome = exec::with_workers(cfg.workers, || {
        let sectors = sector_matrices(&cfg.spec, &part)?;
        let state = match solve_optimal(&sectors, &cfg.sweep.solver) {
            Ok(s) => s,
            Err(Error::NotConverged(s)) => *s,
            Err(e) => return Err(e),
        };
        let ent = total_entanglement_with(&state.omega_op, &sectors, &cfg.spec, cfg.sweep.zero_mode)?;
        Ok((state, ent))
    });
    let (state, ent) = outcome.map_err(pipeline_failure)?;
    let wall = timing.then(|| started.elapsed().as_secs_f64());
    let doc = compute_document(&cfg.spec, cfg.n_blocks, ell, &state, &ent, wall);
    emit(cfg.out.as_deref(), &to_json_string(&doc))?;
    Ok(if state.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

pub fn sweep(cfg: &RunConfig, plot: Option<&Path>) -> Result<i32, Failure> {
    let result = exec::with_workers(cfg.workers, || sweep_block_size(&cfg.spec, cfg.n_blocks, &cfg.ells, &cfg.sweep))
        .map_err(pipeline_failure)?;
    emit(cfg.out.as_deref(), &sweep_csv_string(&result))?;
    if let Some(path) = plot {
        let csv_name = cfg
            .out
            .as_ref()
            .map_or_else(|| "sweep.csv".to_string(), |p| p.display().to_string());
        std::fs::write(path, plot_script(&csv_name))
            .map_err(|e| Failure::new(EXIT_IO, format!("cannot write plot script: {e}")))?;
    }
    Ok(if result.all_converged() { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

pub fn fit(csv: &Path, out: Option<&PathBuf>) -> Result<i32, Failure> {
    let text = std::fs::read_to_string(csv)
        .map_err(|e| Failure::new(EXIT_CONFIG, format!("config error: cannot read {}: {e}", csv.display())))?;
    let table = read_sweep_csv(&text).map_err(pipeline_failure)?;
    let slopes = instantaneous_slopes(&table).map_err(pipeline_failure)?;
    let result = fit_scaling(&slopes).map_err(pipeline_failure)?;
    let charge = estimate_central_charge(&result);
    emit(out.map(PathBuf::as_path), &to_json_string(&fit_document(&result, &charge, &slopes)))?;
    Ok(EXIT_OK)
}

fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(round_sig(x))
    } else {
        Value::Null
    }
}

fn measures_value(m: &BipartiteMeasures) -> Value {
    json!({ "E_geom_bits": num(m.e_geom), "S_bits": num(m.entropy) })
}

/// Two-party checks: solver total against the Schmidt formula at every ℓ,
/// plus an exact Fock-space comparison for fermion rings small enough.
pub fn oracle_check(cfg: &RunConfig) -> Result<i32, Failure> {
    if cfg.n_blocks != 2 {
        return Err(ConfigError::new("blocks", "oracle-check compares two-party cuts; use --blocks 2").into());
    }
    if cfg.spec.is_boson_critical() {
        return Err(ConfigError::new("alpha", "the bipartite oracle needs alpha < 1").into());
    }
    let sweep = exec::with_workers(cfg.workers, || sweep_block_size(&cfg.spec, 2, &cfg.ells, &cfg.sweep))
        .map_err(pipeline_failure)?;
    let mut checks = Vec::new();
    let mut all_pass = true;
    for p in &sweep.points {
        let sites = 2 * p.ell;
        let gaussian = gaussian_measures(&cfg.spec, sites, p.ell).map_err(pipeline_failure)?;
        let solver_e = p.entanglement.total;
        let solver_gap = (solver_e - gaussian.e_geom).abs();
        let mut pass = solver_gap <= SOLVER_ORACLE_TOL;
        let exact = if cfg.spec.statistics() == Statistics::Fermion && sites <= DENSE_SITE_LIMIT {
            let ed = exact_diag_oracle(&cfg.spec, sites, p.ell, 0).map_err(pipeline_failure)?;
            let gap = (ed.e_geom - gaussian.e_geom).abs().max((ed.entropy - gaussian.entropy).abs());
            pass &= gap <= EXACT_TOL;
            let mut v = measures_value(&ed);
            v["max_gap"] = num(gap);
            v
        } else {
            Value::Null
        };
        all_pass &= pass;
        let ratio = if gaussian.entropy > 0.0 {
            num(p.entanglement.density / gaussian.entropy)
        } else {
            Value::Null
        };
        checks.push(json!({
            "ell": p.ell,
            "solver_E_bits": num(solver_e),
            "solver_converged": p.converged,
            "gaussian": measures_value(&gaussian),
            "solver_gap": num(solver_gap),
            "density_over_S": ratio,
            "exact": exact,
            "pass": pass,
        }));
    }
    let doc = json!({
        "spec": serde_json::to_value(cfg.spec).expect("spec serializes"),
        "tolerances": { "solver_vs_oracle": SOLVER_ORACLE_TOL, "gaussian_vs_exact": EXACT_TOL },
        "checks": checks,
        "pass": all_pass,
    });
    emit(cfg.out.as_deref(), &to_json_string(&doc))?;
    Ok(if !sweep.all_converged() {
        EXIT_NOT_CONVERGED
    } else if all_pass {
        EXIT_OK
    } else {
        EXIT_ORACLE
    })
}

fn gaussian_measures(spec: &ChainSpec, sites: usize, block: usize) -> critscale_core::Result<BipartiteMeasures> {
    match spec.statistics() {
        Statistics::Boson => {
            let (g, h) = reduced_blocks_boson(spec, sites, block)?;
            Ok(bosonic_bipartite_measures(&symplectic_spectrum(&g, &h)?))
        }
        Statistics::Fermion => fermionic_bipartite_measures(&reduced_block_fermion(spec, sites, block)?),
    }
}
