//! Deterministic CSV and JSON rendering.
//!
//! Every float is rounded to 12 significant digits before it is printed, so
//! repeated runs with the same configuration produce identical bytes.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde_json::{json, Map, Value};

use crate::analysis::{CentralCharge, FitResult, SectorSeries, SectorTable, SlopeTable, SweepResult};
use crate::entanglement::EntanglementResult;
use crate::error::{Error, Result};
use crate::models::ChainSpec;
use crate::solver::OptimalState;

pub const SIGNIFICANT_DIGITS: usize = 12;

pub const CSV_COLUMNS: [&str; 14] = [
    "model",
    "params",
    "N",
    "ell",
    "sector_m",
    "nu",
    "E_eta_bits",
    "E_eta_renormalized_flag",
    "total_E_bits",
    "density_bits",
    "delta_density_bits",
    "converged",
    "iterations",
    "residual",
];

/// Sector label of the per-ℓ summary row.
pub const TOTAL_ROW: &str = "total";

/// Rounds to [`SIGNIFICANT_DIGITS`] significant digits. Negative zero becomes zero.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { 0.0 } else { x };
    }
    let r: f64 = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .expect("formatted float parses");
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Shortest decimal for the rounded value; scientific notation outside [1e-6, 1e15).
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let r = round_sig(x);
    let a = r.abs();
    if r == 0.0 || (1e-6..1e15).contains(&a) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(round_sig(x))
    } else {
        Value::Null
    }
}

fn opt_num(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

/// ξ field: "inf" at criticality.
fn xi_value(xi: Option<f64>) -> Value {
    match xi {
        Some(x) if x.is_infinite() => Value::String("inf".into()),
        other => opt_num(other),
    }
}

pub fn write_sweep_csv<W: Write>(sweep: &SweepResult, out: &mut W) -> io::Result<()> {
    writeln!(out, "{}", CSV_COLUMNS.join(","))?;
    let model = sweep.spec.model_name();
    let params = sweep.spec.params_label();
    for p in &sweep.points {
        let e = &p.entanglement;
        let shared_tail = format!(
            "{},{},{},{},{},{}",
            format_number(e.total),
            format_number(e.density),
            format_number(p.delta_density),
            p.converged,
            p.iterations,
            format_number(p.residual)
        );
        for s in &e.per_sector {
            writeln!(
                out,
                "{model},{params},{},{},{},{},{},{},{shared_tail}",
                sweep.n_blocks,
                p.ell,
                s.m,
                format_number(s.nu),
                format_number(s.bits),
                s.renormalized,
            )?;
        }
        writeln!(
            out,
            "{model},{params},{},{},{TOTAL_ROW},,,{},{shared_tail}",
            sweep.n_blocks, p.ell, e.renormalized,
        )?;
    }
    Ok(())
}

pub fn sweep_csv_string(sweep: &SweepResult) -> String {
    let mut buf = Vec::new();
    write_sweep_csv(sweep, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

fn csv_error(line: usize, message: impl Into<String>) -> Error {
    Error::invalid("csv", format!("line {line}: {}", message.into()))
}

/// Per-sector energies from a sweep CSV. The file must hold a single
/// (model, params, N) run with every sector present at every block size.
pub fn read_sweep_csv(text: &str) -> Result<SectorTable> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| csv_error(1, "empty file"))?;
    let names: Vec<&str> = header.trim_end_matches('\r').split(',').collect();
    let col = |name: &str| {
        names
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| csv_error(1, format!("missing column {name}")))
    };
    let (c_model, c_params, c_n, c_ell, c_m, c_nu, c_e) = (
        col("model")?,
        col("params")?,
        col("N")?,
        col("ell")?,
        col("sector_m")?,
        col("nu")?,
        col("E_eta_bits")?,
    );
    let mut run: Option<(String, String, String)> = None;
    let mut by_sector: BTreeMap<usize, (f64, BTreeMap<usize, f64>)> = BTreeMap::new();
    let mut ells = std::collections::BTreeSet::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let fields: Vec<&str> = line.trim_end_matches('\r').split(',').collect();
        if fields.len() != names.len() {
            return Err(csv_error(lineno, format!("expected {} fields, found {}", names.len(), fields.len())));
        }
        let key = (
            fields[c_model].to_string(),
            fields[c_params].to_string(),
            fields[c_n].to_string(),
        );
        match &run {
            None => run = Some(key),
            Some(k) if *k != key => return Err(csv_error(lineno, "rows from more than one run")),
            _ => {}
        }
        let ell: usize = fields[c_ell]
            .parse()
            .map_err(|_| csv_error(lineno, format!("bad ell {:?}", fields[c_ell])))?;
        ells.insert(ell);
        if fields[c_m] == TOTAL_ROW {
            continue;
        }
        let m: usize = fields[c_m]
            .parse()
            .map_err(|_| csv_error(lineno, format!("bad sector_m {:?}", fields[c_m])))?;
        let parse = |c: usize| {
            fields[c]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| csv_error(lineno, format!("bad number {:?}", fields[c])))
        };
        let nu = parse(c_nu)?;
        let e = parse(c_e)?;
        let entry = by_sector.entry(m).or_insert_with(|| (nu, BTreeMap::new()));
        if entry.1.insert(ell, e).is_some() {
            return Err(csv_error(lineno, format!("duplicate row for ell {ell}, sector {m}")));
        }
    }
    let ells: Vec<usize> = ells.into_iter().collect();
    let mut sectors = Vec::with_capacity(by_sector.len());
    for (m, (nu, values)) in by_sector {
        if values.len() != ells.len() {
            return Err(Error::invalid("csv", format!("sector {m} is missing block sizes")));
        }
        sectors.push(SectorSeries {
            m,
            nu,
            values: values.into_values().collect(),
        });
    }
    Ok(SectorTable { ells, sectors })
}

fn spec_value(spec: &ChainSpec) -> Value {
    let mut v = serde_json::to_value(spec).expect("spec serializes");
    if let Value::Object(map) = &mut v {
        for (_, x) in map.iter_mut() {
            if let Some(f) = x.as_f64() {
                *x = num(f);
            }
        }
    }
    v
}

pub fn entanglement_value(e: &EntanglementResult) -> Value {
    let sectors: Vec<Value> = e
        .per_sector
        .iter()
        .map(|s| {
            json!({
                "m": s.m,
                "nu": num(s.nu),
                "E_eta_bits": num(s.bits),
                "renormalized": s.renormalized,
            })
        })
        .collect();
    json!({
        "sectors": sectors,
        "total_E_bits": num(e.total),
        "density_bits": num(e.density),
        "renormalized": e.renormalized,
        "E_div_bits": opt_num(e.e_div),
        "xi": xi_value(e.xi),
    })
}

/// Single-point result document. Wall time is included only when given.
pub fn compute_document(
    spec: &ChainSpec,
    n_blocks: usize,
    ell: usize,
    state: &OptimalState,
    entanglement: &EntanglementResult,
    wall_seconds: Option<f64>,
) -> Value {
    let mut doc = Map::new();
    doc.insert("spec".into(), spec_value(spec));
    doc.insert("N".into(), json!(n_blocks));
    doc.insert("ell".into(), json!(ell));
    doc.insert("entanglement".into(), entanglement_value(entanglement));
    doc.insert(
        "solver".into(),
        json!({
            "converged": state.converged,
            "iterations": state.iterations_used,
            "residual": num(state.final_residual),
            "damping": num(state.damping_used),
        }),
    );
    if let Some(t) = wall_seconds {
        doc.insert("wall_seconds".into(), num(t));
    }
    Value::Object(doc)
}

pub fn fit_document(fit: &FitResult, charge: &CentralCharge, slopes: &SlopeTable) -> Value {
    let series: Vec<Value> = slopes
        .series
        .iter()
        .map(|s| {
            json!({
                "m": s.m,
                "nu": num(s.nu),
                "slopes": s.slopes.iter().map(|&k| num(k)).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({
        "kappa_star": num(fit.kappa_star),
        "kappa_std_err": opt_num(fit.kappa_std_err),
        "rho": num(fit.rho),
        "a0": num(fit.a0),
        "a2": num(fit.a2),
        "rss": num(fit.rss),
        "c_star": num(charge.c_star),
        "c_star_std_err": opt_num(charge.std_err),
        "condition": num(fit.condition),
        "points": fit.points,
        "slopes": {
            "ell_mid": slopes.ell_mid.iter().map(|&l| num(l)).collect::<Vec<_>>(),
            "sectors": series,
        },
    })
}

/// Pretty JSON with a trailing newline.
pub fn to_json_string(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json serializes");
    s.push('\n');
    s
}

/// Gnuplot script plotting δ𝓔 against log₂ℓ from a sweep CSV.
pub fn plot_script(csv_path: &str) -> String {
    format!(
        "# gnuplot -p this_file\n\
         set datafile separator ','\n\
         set logscale x 2\n\
         set xlabel 'block size ell'\n\
         set ylabel 'delta density (bits)'\n\
         set key off\n\
         plot '{csv_path}' using (strcol(5) eq \"{TOTAL_ROW}\" ? $4 : 1/0):11 with linespoints\n"
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{sweep_block_size, SweepConfig};
    use crate::models::Boundary;

    #[test]
    fn numbers_use_twelve_significant_digits() {
        assert_eq!(format_number(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_number(-0.0), "0");
        assert_eq!(format_number(0.0837), "0.0837");
        assert_eq!(format_number(123456.7890123456), "123456.789012");
        assert_eq!(format_number(2.5e-11), "2.5e-11");
        assert_eq!(format_number(f64::INFINITY), "inf");
        assert_eq!(round_sig(-1e-320), -1e-320);
    }

    #[test]
    fn csv_layout() {
        let spec = ChainSpec::harmonic(0.5).unwrap();
        let sweep = sweep_block_size(&spec, 3, &[2, 4], &SweepConfig::default()).unwrap();
        let csv = sweep_csv_string(&sweep);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_COLUMNS.join(","));
        assert_eq!(lines.len(), 1 + 2 * 4);
        assert!(!csv.contains('\r') && !csv.contains('"'));
        assert!(lines.iter().all(|l| l.split(',').count() == 14));
        assert!(lines[4].starts_with("harmonic,alpha=0.5,3,2,total,,,false,"));
    }

    #[test]
    fn csv_round_trips_sector_values() {
        let spec = ChainSpec::xy(1.0, 1.0, Boundary::Antiperiodic).unwrap();
        let sweep = sweep_block_size(&spec, 3, &[2, 4, 8], &SweepConfig::default()).unwrap();
        let table = read_sweep_csv(&sweep_csv_string(&sweep)).unwrap();
        let direct = sweep.sector_table();
        assert_eq!(table.ells, direct.ells);
        for (a, b) in table.sectors.iter().zip(&direct.sectors) {
            assert_eq!(a.m, b.m);
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((x - y).abs() <= 1e-11 * y.abs().max(1.0));
            }
        }
    }

    #[test]
    fn csv_reader_rejects_malformed_input() {
        assert!(read_sweep_csv("").is_err());
        assert!(read_sweep_csv("model,params\n").is_err());
        let header = CSV_COLUMNS.join(",");
        let row = "harmonic,alpha=1,2,4,0,0,x,true,0,0,0,true,1,0";
        assert!(read_sweep_csv(&format!("{header}\n{row}\n")).is_err());
        let a = "harmonic,alpha=1,2,4,0,0,0.1,true,0,0,0,true,1,0";
        let b = "harmonic,alpha=0.5,2,8,0,0,0.1,true,0,0,0,true,1,0";
        assert!(read_sweep_csv(&format!("{header}\n{a}\n{b}\n")).is_err());
    }

    #[test]
    fn critical_document_marks_divergences() {
        let spec = ChainSpec::harmonic(1.0).unwrap();
        let sweep = sweep_block_size(&spec, 2, &[4], &SweepConfig::default()).unwrap();
        let v = entanglement_value(&sweep.points[0].entanglement);
        assert_eq!(v["xi"], Value::String("inf".into()));
        assert_eq!(v["E_div_bits"], Value::Null);
        assert_eq!(v["renormalized"], Value::Bool(true));
    }
}
