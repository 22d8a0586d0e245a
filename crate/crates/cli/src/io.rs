//! File formats: GCG v1 grid fields, `name = value` parameter files and
//! fit reports, and TSV diagnostic tables.
//!
//! GCG v1 layout: a header line `gcg 1 <m> <n> <lat_min> <lat_max> <offset>`
//! (offset 1 = longitude cell centers, 0 = cell edges) followed by m lines
//! of n whitespace-separated values, row = ascending latitude, column =
//! ascending longitude, with `NA` marking missing cells. Values are printed
//! with 17 significant digits so a write/read round trip is bit-exact.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use axisym::{Field, FitResult, GridSpec, LonOffset, ModelSpec, ParamId, ParamVector};

use crate::CliError;

fn malformed(path: &Path, what: impl std::fmt::Display) -> CliError {
    CliError::Malformed(format!("{}: {what}", path.display()))
}

pub fn read_field(path: &Path) -> Result<Field, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| malformed(path, e))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| malformed(path, "empty file"))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 7 || tokens[0] != "gcg" || tokens[1] != "1" {
        return Err(malformed(
            path,
            "header must be 'gcg 1 <m> <n> <lat_min> <lat_max> <offset>'",
        ));
    }
    let m: usize = tokens[2]
        .parse()
        .map_err(|_| malformed(path, "bad latitude count"))?;
    let n: usize = tokens[3]
        .parse()
        .map_err(|_| malformed(path, "bad longitude count"))?;
    let lat_min: f64 = tokens[4]
        .parse()
        .map_err(|_| malformed(path, "bad lat_min"))?;
    let lat_max: f64 = tokens[5]
        .parse()
        .map_err(|_| malformed(path, "bad lat_max"))?;
    let offset = match tokens[6] {
        "1" => LonOffset::CellCenter,
        "0" => LonOffset::CellEdge,
        other => return Err(malformed(path, format!("bad offset flag '{other}'"))),
    };
    let grid = GridSpec::with_offset(m, n, lat_min, lat_max, offset)
        .map_err(|e| malformed(path, e))?;
    let mut values = DMatrix::zeros(m, n);
    let mut missing = DMatrix::from_element(m, n, false);
    for i in 0..m {
        let line = lines
            .next()
            .ok_or_else(|| malformed(path, format!("expected {m} data rows, found {i}")))?;
        let cells: Vec<&str> = line.split_whitespace().collect();
        if cells.len() != n {
            return Err(malformed(
                path,
                format!("row {i} has {} values, expected {n}", cells.len()),
            ));
        }
        for (j, cell) in cells.iter().enumerate() {
            if *cell == "NA" {
                missing[(i, j)] = true;
                values[(i, j)] = f64::NAN;
            } else {
                values[(i, j)] = cell
                    .parse()
                    .map_err(|_| malformed(path, format!("bad value '{cell}' at row {i}")))?;
            }
        }
    }
    if let Some(extra) = lines.find(|l| !l.trim().is_empty()) {
        return Err(malformed(path, format!("unexpected trailing data '{extra}'")));
    }
    Field::with_mask(grid, values, missing).map_err(|e| malformed(path, e))
}

pub fn write_field(path: &Path, field: &Field) -> Result<(), CliError> {
    let grid = field.grid();
    let offset = match grid.offset() {
        LonOffset::CellCenter => 1,
        LonOffset::CellEdge => 0,
    };
    let mut out = String::new();
    writeln!(
        out,
        "gcg 1 {} {} {} {} {}",
        grid.n_lat(),
        grid.n_lon(),
        grid.lat_min(),
        grid.lat_max(),
        offset
    )
    .unwrap();
    for i in 0..grid.n_lat() {
        for j in 0..grid.n_lon() {
            if j > 0 {
                out.push(' ');
            }
            if field.is_missing(i, j) {
                out.push_str("NA");
            } else {
                write!(out, "{:.16e}", field.get(i, j)).unwrap();
            }
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| malformed(path, e))
}

/// Keys a parameter file may carry besides the model parameters themselves.
/// Report-only keys are accepted and ignored when reading parameters back.
const META_KEYS: &[&str] = &["model", "fixed"];
const REPORT_KEYS: &[&str] = &[
    "loglik",
    "converged",
    "iterations",
    "restarts",
    "trace_len",
    "grad_norm",
    "near_singular",
    "note",
];

/// Parsed `name = value` file: covariance parameters plus optional metadata.
pub struct ParamFile {
    pub params: ParamVector,
    pub model: Option<ModelSpec>,
    pub loglik: Option<f64>,
}

/// Reads a parameter file (or fit report) for a known model spec. All of
/// the spec's parameter names must be present; unknown keys are rejected.
pub fn read_params(path: &Path, spec: &ModelSpec) -> Result<ParamFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| malformed(path, e))?;
    let mut params = ParamVector::neutral(spec);
    let ids = spec.param_ids();
    let mut seen: BTreeSet<ParamId> = BTreeSet::new();
    let mut fixed: BTreeSet<ParamId> = BTreeSet::new();
    let mut model: Option<ModelSpec> = None;
    let mut loglik = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| malformed(path, format!("line {}: expected 'name = value'", lineno + 1)))?;
        let key = key.trim();
        let value = value.trim();
        if key == "model" {
            model = Some(value.parse().map_err(|e| malformed(path, e))?);
            continue;
        }
        if key == "fixed" {
            for name in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let id: ParamId = name.parse().map_err(|e| malformed(path, e))?;
                fixed.insert(id);
            }
            continue;
        }
        if key == "loglik" {
            loglik = value.parse().ok();
            continue;
        }
        if REPORT_KEYS.contains(&key) || key.starts_with("se_") {
            continue;
        }
        let id: ParamId = key
            .parse()
            .map_err(|_| malformed(path, format!("line {}: unknown key '{key}'", lineno + 1)))?;
        if !ids.contains(&id) {
            return Err(malformed(
                path,
                format!("parameter '{id}' does not belong to this model"),
            ));
        }
        let v: f64 = value
            .parse()
            .map_err(|_| malformed(path, format!("bad number '{value}' for '{key}'")))?;
        params
            .set(id, v)
            .map_err(|e| malformed(path, e))?;
        seen.insert(id);
    }
    let missing: Vec<String> = ids
        .iter()
        .filter(|id| !seen.contains(id))
        .map(|id| id.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(malformed(
            path,
            format!("missing parameters: {}", missing.join(", ")),
        ));
    }
    for id in fixed {
        if !ids.contains(&id) {
            return Err(malformed(
                path,
                format!("fixed parameter '{id}' does not belong to this model"),
            ));
        }
        params.fixed.insert(id);
    }
    params.validate().map_err(|e| CliError::Constraint(e.to_string()))?;
    Ok(ParamFile {
        params,
        model,
        loglik,
    })
}

fn push_param_lines(out: &mut String, spec: &ModelSpec, params: &ParamVector) {
    for id in spec.param_ids() {
        writeln!(out, "{id} = {:.16e}", params.get(id).unwrap()).unwrap();
    }
    if !params.fixed.is_empty() {
        let names: Vec<String> = params.fixed.iter().map(|id| id.to_string()).collect();
        writeln!(out, "fixed = {}", names.join(",")).unwrap();
    }
}

/// Writes a plain parameter file.
pub fn write_params(path: &Path, spec: &ModelSpec, params: &ParamVector) -> Result<(), CliError> {
    let mut out = String::new();
    writeln!(out, "model = {spec}").unwrap();
    push_param_lines(&mut out, spec, params);
    std::fs::write(path, out).map_err(|e| malformed(path, e))
}

/// Writes a machine-readable fit report. The report doubles as a parameter
/// file: [`read_params`] accepts every key it contains.
pub fn write_fit_report(path: &Path, fit: &FitResult) -> Result<(), CliError> {
    let mut out = String::new();
    writeln!(out, "model = {}", fit.spec).unwrap();
    push_param_lines(&mut out, &fit.spec, &fit.estimates);
    writeln!(out, "loglik = {:.16e}", fit.loglik).unwrap();
    writeln!(out, "converged = {}", fit.converged).unwrap();
    writeln!(out, "iterations = {}", fit.iterations).unwrap();
    writeln!(out, "restarts = {}", fit.restarts).unwrap();
    writeln!(out, "trace_len = {}", fit.trace.len()).unwrap();
    writeln!(out, "grad_norm = {:.6e}", fit.grad_norm).unwrap();
    for (idx, id) in fit.free_ids.iter().enumerate() {
        match fit.ses.get(idx).copied().flatten() {
            Some(se) => writeln!(out, "se_{id} = {se:.16e}").unwrap(),
            None => writeln!(out, "se_{id} = NA").unwrap(),
        }
    }
    if let Some(bad) = &fit.near_singular {
        let names: Vec<String> = bad.iter().map(|id| id.to_string()).collect();
        writeln!(out, "near_singular = {}", names.join(",")).unwrap();
    }
    if let Some(note) = fit.spec.catalog_note() {
        writeln!(out, "note = {note}").unwrap();
    }
    std::fs::write(path, out).map_err(|e| malformed(path, e))
}

/// Writes a TSV table: a header row then the data columns, tab-separated,
/// values with full precision.
pub fn write_tsv(
    path: &Path,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<(), CliError> {
    let mut out = String::new();
    out.push_str(&header.join("\t"));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| malformed(path, e))
}

pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}
